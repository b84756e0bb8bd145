//! Level-set reinitialization: rebuild signed distances away from the
//! interface while freezing interface-cell values.
//!
//! Cartesian grids use the fast sweeping method (Gauss-Seidel sweeps in all
//! 2^d index orderings with the upwind Godunov eikonal update); triangular
//! grids use pseudo-time relaxation of `phi_tau = sgn(phi0)(1 - |grad phi|)`
//! with least-squares cell gradients.

use crate::mesh::{Mesh, MeshKind};
use crate::{Error, Result};

/// FSM stops once the largest update in a full pass drops below this factor
/// times the smallest cell size.
const FSM_TOL_FACTOR: f64 = 1e-3;
const FSM_MAX_PASSES: usize = 100;

/// Iterative method: pseudo-time step factor, residual target, iteration cap.
const ITER_STEP_FACTOR: f64 = 0.3;
const ITER_RESIDUAL_TOL: f64 = 0.05;
const ITER_MAX_STEPS: usize = 200;

fn check_frozen(frozen: &[bool]) -> Result<()> {
    if frozen.iter().any(|&f| f) {
        Ok(())
    } else {
        Err(Error::Numerics("reinitialization has no frozen interface cells to anchor".into()))
    }
}

/// Sign a free cell takes after reinitialization: the side its VOF value
/// indicates.
fn side_sign(h_bar: f64) -> f64 {
    if h_bar >= 0.5 {
        1.0
    } else {
        -1.0
    }
}

/// Fast sweeping reinitialization on a Cartesian mesh.
///
/// Frozen cells keep their values bit-for-bit and act as boundary data
/// (through their absolute values); every free cell is rebuilt from scratch,
/// capped at the domain diagonal, and signed by its VOF side.
pub fn reinit_fsm(mesh: &Mesh, phi: &mut [f64], frozen: &[bool], vof: &[f64]) -> Result<()> {
    check_frozen(frozen)?;
    let (n, h) = match mesh.kind {
        MeshKind::Cartesian2 { nx, ny, dx, dy } => ([nx, ny, 1], [dx, dy, f64::INFINITY]),
        MeshKind::Cartesian3 { nx, ny, nz, dx, dy, dz } => ([nx, ny, nz], [dx, dy, dz]),
        MeshKind::Triangular { .. } => {
            return Err(Error::Config("fast sweeping requires a Cartesian mesh".into()))
        }
    };
    let cap = mesh.domain_diagonal();
    let tol = FSM_TOL_FACTOR * mesh.min_delta();
    let dim = if n[2] == 1 { 2 } else { 3 };

    let mut d: Vec<f64> = (0..mesh.n_cells())
        .map(|c| if frozen[c] { phi[c].abs() } else { cap })
        .collect();

    let idx = |i: usize, j: usize, k: usize| (k * n[1] + j) * n[0] + i;
    for _pass in 0..FSM_MAX_PASSES {
        let mut max_change = 0.0_f64;
        for ordering in 0..(1usize << dim) {
            let rev = [ordering & 1 != 0, ordering & 2 != 0, ordering & 4 != 0];
            for kk in 0..n[2] {
                let k = if rev[2] { n[2] - 1 - kk } else { kk };
                for jj in 0..n[1] {
                    let j = if rev[1] { n[1] - 1 - jj } else { jj };
                    for ii in 0..n[0] {
                        let i = if rev[0] { n[0] - 1 - ii } else { ii };
                        let c = idx(i, j, k);
                        if frozen[c] {
                            continue;
                        }
                        let axis_min = |lo: Option<usize>, hi: Option<usize>| -> f64 {
                            let a = lo.map_or(f64::INFINITY, |cc| d[cc]);
                            let b = hi.map_or(f64::INFINITY, |cc| d[cc]);
                            a.min(b)
                        };
                        let mut cands = [(f64::INFINITY, 1.0); 3];
                        cands[0] = (
                            axis_min(
                                (i > 0).then(|| idx(i - 1, j, k)),
                                (i + 1 < n[0]).then(|| idx(i + 1, j, k)),
                            ),
                            h[0],
                        );
                        cands[1] = (
                            axis_min(
                                (j > 0).then(|| idx(i, j - 1, k)),
                                (j + 1 < n[1]).then(|| idx(i, j + 1, k)),
                            ),
                            h[1],
                        );
                        if dim == 3 {
                            cands[2] = (
                                axis_min(
                                    (k > 0).then(|| idx(i, j, k - 1)),
                                    (k + 1 < n[2]).then(|| idx(i, j, k + 1)),
                                ),
                                h[2],
                            );
                        }
                        let x = eikonal_update(&mut cands[..dim]).min(cap);
                        if x < d[c] {
                            max_change = max_change.max(d[c] - x);
                            d[c] = x;
                        }
                    }
                }
            }
        }
        if max_change < tol {
            break;
        }
    }

    for c in 0..mesh.n_cells() {
        if !frozen[c] {
            phi[c] = side_sign(vof[c]) * d[c];
        }
    }
    Ok(())
}

/// Upwind Godunov update: the solution of `sum_k ((x - a_k)/h_k)^2 = 1` over
/// the active subset of axis candidates.
fn eikonal_update(cands: &mut [(f64, f64)]) -> f64 {
    cands.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut x = f64::INFINITY;
    for m in 1..=cands.len() {
        if !cands[m - 1].0.is_finite() {
            break;
        }
        if m == 1 {
            x = cands[0].0 + cands[0].1;
        } else {
            let (mut qa, mut qb, mut qc) = (0.0, 0.0, -1.0);
            for &(a, h) in &cands[..m] {
                let inv = 1.0 / (h * h);
                qa += inv;
                qb += a * inv;
                qc += a * a * inv;
            }
            let disc = qb * qb - qa * qc;
            if disc < 0.0 {
                break;
            }
            x = (qb + disc.sqrt()) / qa;
        }
        // Stop once the next (larger) candidate would not be upwind.
        if m == cands.len() || x <= cands[m].0 {
            break;
        }
    }
    x
}

/// Pseudo-time reinitialization on a triangular mesh.
///
/// Relaxes `phi_tau = sgn(phi0)(1 - |grad phi|)` with Jacobi updates, a step
/// of 0.3 times the smallest cell size and the smoothed sign
/// `phi0 / sqrt(phi0^2 + delta^2)`, until the eikonal residual over free
/// cells touching the frozen band falls below 0.05 (or 200 steps).
pub fn reinit_iterative(mesh: &Mesh, phi: &mut [f64], frozen: &[bool], vof: &[f64]) -> Result<()> {
    check_frozen(frozen)?;
    if !matches!(mesh.kind, MeshKind::Triangular { .. }) {
        return Err(Error::Config("iterative reinitialization expects a triangular mesh".into()));
    }
    let _ = vof;
    let n = mesh.n_cells();
    let free: Vec<usize> = (0..n).filter(|&c| !frozen[c]).collect();
    if free.is_empty() {
        return Ok(());
    }
    let mut band_adjacent: Vec<usize> = free
        .iter()
        .copied()
        .filter(|&c| mesh.vertex_neighbors(c).iter().any(|&nb| frozen[nb]))
        .collect();
    if band_adjacent.is_empty() {
        band_adjacent = free.clone();
    }

    let cap = mesh.domain_diagonal();
    let dtau = ITER_STEP_FACTOR * mesh.min_delta();
    let smoothed_sign: Vec<f64> = (0..n)
        .map(|c| {
            let delta = mesh.cells[c].delta;
            phi[c] / (phi[c] * phi[c] + delta * delta).sqrt()
        })
        .collect();

    let mut snapshot = phi.to_vec();
    for _step in 0..ITER_MAX_STEPS {
        snapshot.copy_from_slice(phi);
        let grad_norm = |c: usize| -> Option<f64> {
            let center = mesh.cells[c].centroid;
            let (mut sxx, mut sxy, mut syy, mut bx, mut by) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for &nb in mesh.vertex_neighbors(c) {
                let dvec = mesh.cells[nb].centroid - center;
                let w = 1.0 / dvec.norm_sq();
                let dphi = snapshot[nb] - snapshot[c];
                sxx += w * dvec.x * dvec.x;
                sxy += w * dvec.x * dvec.y;
                syy += w * dvec.y * dvec.y;
                bx += w * dvec.x * dphi;
                by += w * dvec.y * dphi;
            }
            let det = sxx * syy - sxy * sxy;
            if det.abs() <= 1e-30 * (sxx + syy).powi(2) {
                return None;
            }
            let gx = (syy * bx - sxy * by) / det;
            let gy = (sxx * by - sxy * bx) / det;
            Some(gx.hypot(gy))
        };

        let mut residual = 0.0_f64;
        for &c in &band_adjacent {
            if let Some(g) = grad_norm(c) {
                residual = residual.max((1.0 - g).abs());
            }
        }
        if residual < ITER_RESIDUAL_TOL {
            break;
        }
        for &c in &free {
            if let Some(g) = grad_norm(c) {
                let updated = snapshot[c] + dtau * smoothed_sign[c] * (1.0 - g);
                phi[c] = updated.clamp(-cap, cap);
            }
        }
    }
    Ok(())
}
