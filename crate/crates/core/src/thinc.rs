//! Cell-wise tanh-of-polynomial reconstruction.
//!
//! Each interface cell carries a quadratic `P` in local coordinates fitted to
//! the level-set field, a steepness `beta`, and a shift chosen so that the
//! quadrature average of `0.5 (1 + tanh(beta (P + shift)))` reproduces the
//! cell's volume fraction. Scaling and inverse scaling convert between the
//! level-set and VOF views of that function.

use crate::geom::Vec3;
use crate::mesh::{Mesh, MeshKind};
use crate::{Error, Result};

/// Band half-width in VOF value: a cell is an interface cell iff
/// `EPS <= h <= 1 - EPS`.
pub const INTERFACE_EPS: f64 = 1e-8;

/// Stop threshold on the transformed conservation residual.
pub const NEWTON_TOL: f64 = 1e-11;

pub const NEWTON_MAX_ITERS: usize = 100;

/// VOF values are clamped to `[H_CLAMP, 1 - H_CLAMP]` before inverse scaling.
pub const H_CLAMP: f64 = 1e-14;

/// Steepness rule keeping the tanh transition 2-3 cells wide.
pub fn beta_from_cell(delta: f64) -> f64 {
    6.0 / delta
}

pub fn is_interface_cell(h_bar: f64) -> bool {
    (INTERFACE_EPS..=1.0 - INTERFACE_EPS).contains(&h_bar)
}

/// Level set to smoothed Heaviside.
pub fn thinc_scale(phi: f64, beta: f64) -> f64 {
    0.5 * (1.0 + (beta * phi).tanh())
}

/// Smoothed Heaviside back to level set; the clamp bounds the result by
/// `inverse_scale_bound() / beta`.
pub fn inverse_scale(h: f64, beta: f64) -> f64 {
    let h = h.clamp(H_CLAMP, 1.0 - H_CLAMP);
    (2.0 * h - 1.0).atanh() / beta
}

/// Largest `|beta * phi|` representable through the clamped inverse scaling.
pub fn inverse_scale_bound() -> f64 {
    (1.0 - 2.0 * H_CLAMP).atanh()
}

/// Monomial order of `SurfacePolynomial::coeffs`.
/// In 2D the Z-related slots stay zero.
const C_1: usize = 0;
const C_X: usize = 1;
const C_Y: usize = 2;
const C_Z: usize = 3;
const C_XX: usize = 4;
const C_YY: usize = 5;
const C_ZZ: usize = 6;
const C_XY: usize = 7;
const C_XZ: usize = 8;
const C_YZ: usize = 9;

/// Quadratic level-set polynomial of one cell, with the conservation shift.
///
/// The zero set of `P + shift` is the cell's piecewise interface.
#[derive(Clone, Debug)]
pub struct SurfacePolynomial {
    pub cell: usize,
    /// Local coordinate origin (the cell centroid).
    pub center: Vec3,
    /// Coefficients ordered `[1, X, Y, Z, X^2, Y^2, Z^2, XY, XZ, YZ]`.
    pub coeffs: [f64; 10],
    /// Conservation shift; zero until `solve_interface_shift` has run.
    pub shift: f64,
    pub beta: f64,
    /// Set when a rank-deficient stencil forced a linear fit.
    pub degraded: bool,
}

impl SurfacePolynomial {
    /// Evaluate `P` at a global point.
    pub fn eval(&self, p: Vec3) -> f64 {
        let d = p - self.center;
        let c = &self.coeffs;
        c[C_1]
            + c[C_X] * d.x
            + c[C_Y] * d.y
            + c[C_Z] * d.z
            + c[C_XX] * d.x * d.x
            + c[C_YY] * d.y * d.y
            + c[C_ZZ] * d.z * d.z
            + c[C_XY] * d.x * d.y
            + c[C_XZ] * d.x * d.z
            + c[C_YZ] * d.y * d.z
    }

    /// The interface polynomial `psi = P + shift`.
    pub fn psi(&self, p: Vec3) -> f64 {
        self.eval(p) + self.shift
    }

    /// Gradient of `P` at a global point.
    pub fn gradient(&self, p: Vec3) -> Vec3 {
        let d = p - self.center;
        let c = &self.coeffs;
        Vec3::new(
            c[C_X] + 2.0 * c[C_XX] * d.x + c[C_XY] * d.y + c[C_XZ] * d.z,
            c[C_Y] + 2.0 * c[C_YY] * d.y + c[C_XY] * d.x + c[C_YZ] * d.z,
            c[C_Z] + 2.0 * c[C_ZZ] * d.z + c[C_XZ] * d.x + c[C_YZ] * d.y,
        )
    }

    /// The cell's tanh reconstruction at a global point.
    pub fn thinc_value(&self, p: Vec3) -> f64 {
        thinc_scale(self.psi(p), self.beta)
    }
}

// ---------------------------------------------------------------------------
// Polynomial fit
// ---------------------------------------------------------------------------

/// Fit the quadratic level-set polynomial of `cell`, shift unset.
///
/// Cartesian meshes use second-order central differences at the cell center
/// (one-sided at domain boundaries); triangular meshes use inverse-distance
/// weighted least squares over all vertex neighbors, constrained to
/// interpolate the centroid value exactly.
pub fn fit_polynomial(mesh: &Mesh, phi: &[f64], cell: usize, beta: f64) -> SurfacePolynomial {
    debug_assert_eq!(phi.len(), mesh.n_cells());
    let mut coeffs = [0.0; 10];
    coeffs[C_1] = phi[cell];
    let mut degraded = false;

    match &mesh.kind {
        MeshKind::Cartesian2 { nx, ny, dx, dy } => {
            let (nx, ny) = (*nx as i64, *ny as i64);
            let [i, j, _] = mesh.cart_index(cell);
            let at = |di: i64, dj: i64| -> Option<f64> {
                let (ii, jj) = (i as i64 + di, j as i64 + dj);
                (ii >= 0 && ii < nx && jj >= 0 && jj < ny).then(|| phi[(jj * nx + ii) as usize])
            };
            coeffs[C_X] = central1(&|d| at(d, 0), *dx);
            coeffs[C_Y] = central1(&|d| at(0, d), *dy);
            coeffs[C_XX] = 0.5 * central2(&|d| at(d, 0), *dx);
            coeffs[C_YY] = 0.5 * central2(&|d| at(0, d), *dy);
            let dy_at = |di: i64| -> Option<f64> {
                at(di, 0)?;
                Some(central1(&|dj| at(di, dj), *dy))
            };
            coeffs[C_XY] = central1(&dy_at, *dx);
        }
        MeshKind::Cartesian3 { nx, ny, nz, dx, dy, dz } => {
            let (nx, ny, nz) = (*nx as i64, *ny as i64, *nz as i64);
            let [i, j, k] = mesh.cart_index(cell);
            let at = |di: i64, dj: i64, dk: i64| -> Option<f64> {
                let (ii, jj, kk) = (i as i64 + di, j as i64 + dj, k as i64 + dk);
                (ii >= 0 && ii < nx && jj >= 0 && jj < ny && kk >= 0 && kk < nz)
                    .then(|| phi[((kk * ny + jj) * nx + ii) as usize])
            };
            coeffs[C_X] = central1(&|d| at(d, 0, 0), *dx);
            coeffs[C_Y] = central1(&|d| at(0, d, 0), *dy);
            coeffs[C_Z] = central1(&|d| at(0, 0, d), *dz);
            coeffs[C_XX] = 0.5 * central2(&|d| at(d, 0, 0), *dx);
            coeffs[C_YY] = 0.5 * central2(&|d| at(0, d, 0), *dy);
            coeffs[C_ZZ] = 0.5 * central2(&|d| at(0, 0, d), *dz);
            let dy_at = |di: i64| -> Option<f64> {
                at(di, 0, 0)?;
                Some(central1(&|dj| at(di, dj, 0), *dy))
            };
            coeffs[C_XY] = central1(&dy_at, *dx);
            let dz_at_x = |di: i64| -> Option<f64> {
                at(di, 0, 0)?;
                Some(central1(&|dk| at(di, 0, dk), *dz))
            };
            coeffs[C_XZ] = central1(&dz_at_x, *dx);
            let dz_at_y = |dj: i64| -> Option<f64> {
                at(0, dj, 0)?;
                Some(central1(&|dk| at(0, dj, dk), *dz))
            };
            coeffs[C_YZ] = central1(&dz_at_y, *dy);
        }
        MeshKind::Triangular { .. } => {
            degraded = !fit_tri_wls(mesh, phi, cell, &mut coeffs);
        }
    }

    SurfacePolynomial {
        cell,
        center: mesh.cells[cell].centroid,
        coeffs,
        shift: 0.0,
        beta,
        degraded,
    }
}

/// First derivative from lattice samples, one-sided at boundaries.
fn central1(f: &dyn Fn(i64) -> Option<f64>, h: f64) -> f64 {
    let c = f(0).expect("stencil center");
    match (f(-1), f(1)) {
        (Some(m), Some(p)) => (p - m) / (2.0 * h),
        (None, Some(p)) => match f(2) {
            Some(p2) => (-3.0 * c + 4.0 * p - p2) / (2.0 * h),
            None => (p - c) / h,
        },
        (Some(m), None) => match f(-2) {
            Some(m2) => (3.0 * c - 4.0 * m + m2) / (2.0 * h),
            None => (c - m) / h,
        },
        (None, None) => 0.0,
    }
}

/// Second derivative from lattice samples, shifted at boundaries.
fn central2(f: &dyn Fn(i64) -> Option<f64>, h: f64) -> f64 {
    let c = f(0).expect("stencil center");
    match (f(-1), f(1)) {
        (Some(m), Some(p)) => (p - 2.0 * c + m) / (h * h),
        (None, Some(p)) => match f(2) {
            Some(p2) => (c - 2.0 * p + p2) / (h * h),
            None => 0.0,
        },
        (Some(m), None) => match f(-2) {
            Some(m2) => (c - 2.0 * m + m2) / (h * h),
            None => 0.0,
        },
        (None, None) => 0.0,
    }
}

/// Weighted least-squares quadratic over the vertex-neighbor stencil, in
/// coordinates scaled by the hydraulic diameter. Returns false when the
/// stencil only supports a linear fit.
fn fit_tri_wls(mesh: &Mesh, phi: &[f64], cell: usize, coeffs: &mut [f64; 10]) -> bool {
    let center = mesh.cells[cell].centroid;
    let scale = mesh.cells[cell].delta;
    let neighbors = mesh.vertex_neighbors(cell);

    let rows: Vec<([f64; 5], f64, f64)> = neighbors
        .iter()
        .map(|&nb| {
            let d = mesh.cells[nb].centroid - center;
            let (xi, eta) = (d.x / scale, d.y / scale);
            let w = 1.0 / d.norm_sq().max(1e-300);
            ([xi, eta, xi * xi, eta * eta, xi * eta], w, phi[nb] - phi[cell])
        })
        .collect();

    if rows.len() >= 5 {
        if let Some(sol) = wls_solve::<5>(&rows) {
            coeffs[C_X] = sol[0] / scale;
            coeffs[C_Y] = sol[1] / scale;
            coeffs[C_XX] = sol[2] / (scale * scale);
            coeffs[C_YY] = sol[3] / (scale * scale);
            coeffs[C_XY] = sol[4] / (scale * scale);
            return true;
        }
    }
    // Linear fallback on the same stencil.
    let lin_rows: Vec<([f64; 2], f64, f64)> =
        rows.iter().map(|(m, w, r)| ([m[0], m[1]], *w, *r)).collect();
    if let Some(sol) = wls_solve::<2>(&lin_rows) {
        coeffs[C_X] = sol[0] / scale;
        coeffs[C_Y] = sol[1] / scale;
    }
    false
}

/// Solve the normal equations of a weighted least-squares problem with `K`
/// unknowns. Returns None when the system is numerically rank-deficient.
fn wls_solve<const K: usize>(rows: &[([f64; K], f64, f64)]) -> Option<[f64; K]> {
    let mut a = [[0.0; K]; K];
    let mut b = [0.0; K];
    for (m, w, r) in rows {
        for p in 0..K {
            for q in 0..K {
                a[p][q] += w * m[p] * m[q];
            }
            b[p] += w * m[p] * r;
        }
    }
    let pivot_floor = 1e-10 * (0..K).map(|p| a[p][p]).fold(0.0_f64, f64::max);

    // Gaussian elimination with partial pivoting.
    let mut order: [usize; K] = std::array::from_fn(|p| p);
    for col in 0..K {
        let (best, mag) = (col..K)
            .map(|r| (r, a[order[r]][col].abs()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())?;
        if mag <= pivot_floor || !mag.is_finite() {
            return None;
        }
        order.swap(col, best);
        let p = order[col];
        for r in col + 1..K {
            let row = order[r];
            let factor = a[row][col] / a[p][col];
            for q in col..K {
                a[row][q] -= factor * a[p][q];
            }
            b[row] -= factor * b[p];
        }
    }
    let mut x = [0.0; K];
    for col in (0..K).rev() {
        let p = order[col];
        let mut s = b[p];
        for q in col + 1..K {
            s -= a[p][q] * x[q];
        }
        x[col] = s / a[p][col];
    }
    Some(x)
}

// ---------------------------------------------------------------------------
// Conservation shift
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub struct ShiftSolution {
    pub shift: f64,
    pub iterations: usize,
}

/// Solve the volume-conservation constraint for the interface shift.
///
/// The constraint `sum_g w_g 0.5 (1 + tanh(beta P_g + beta shift)) = h_bar`
/// is recast with `A_g = tanh(beta P_g + gamma)`, `D = tanh(beta shift - gamma)`
/// and `gamma = -min_g(beta P_g) + 1e-8` (making every `A_g > 0`) into
/// `f(D) = sum_g w_g (A_g + D) / (1 + A_g D) - 2 (h_bar - 1/2) = 0`,
/// solved by Newton iteration from `D = -1`. The iterate sequence increases
/// monotonically inside [-1, 1] and converges quadratically; iteration stops
/// once `|f| <= 1e-11`.
///
/// `points`/`weights` are the cell quadrature (weights summing to 1).
pub fn solve_interface_shift(
    poly: &SurfacePolynomial,
    h_bar: f64,
    points: &[Vec3],
    weights: &[f64],
) -> Result<ShiftSolution> {
    let beta_p: Vec<f64> = points.iter().map(|&p| poly.beta * poly.eval(p)).collect();
    let root = solve_transformed(&beta_p, weights, h_bar, &mut |_| {})?;
    Ok(ShiftSolution { shift: root.shift_beta / poly.beta, iterations: root.iterations })
}

#[derive(Clone, Copy, Debug)]
pub struct TransformedRoot {
    pub gamma: f64,
    /// Root offset from the lower endpoint: `s = 1 + D`.
    pub s: f64,
    pub d: f64,
    /// `beta * shift = atanh(D) + gamma`.
    pub shift_beta: f64,
    pub iterations: usize,
}

/// Newton solve of the transformed constraint; `observe` receives every
/// iterate as its offset `s = 1 + D` from the starting endpoint.
///
/// The iteration is carried in `s` with `1 - A_g` evaluated stably, so roots
/// within an ulp of `D = -1` (nearly empty cells under large `gamma`) stay
/// resolvable; the iterate sequence itself is unchanged.
pub fn solve_transformed(
    beta_p: &[f64],
    weights: &[f64],
    h_bar: f64,
    observe: &mut dyn FnMut(f64),
) -> Result<TransformedRoot> {
    if !is_interface_cell(h_bar) {
        return Err(Error::Numerics(format!(
            "conservation solve requires an interface cell, got h_bar = {h_bar:e}"
        )));
    }
    let min_bp = beta_p.iter().copied().fold(f64::INFINITY, f64::min);
    if !min_bp.is_finite() {
        return Err(Error::Numerics("non-finite polynomial values in conservation solve".into()));
    }
    let gamma = -min_bp + 1e-8;
    let c = 2.0 * (h_bar - 0.5);

    // a = tanh(x) and m = 1 - a, the latter from exp to avoid cancellation.
    let terms: Vec<(f64, f64, f64)> = beta_p
        .iter()
        .zip(weights)
        .map(|(&bp, &w)| {
            let x = bp + gamma;
            let e = (-2.0 * x).exp();
            (x.tanh(), 2.0 * e / (1.0 + e), w)
        })
        .collect();

    let f_at = |s: f64| -> f64 {
        let mut f = -c;
        for &(a, m, w) in &terms {
            // (A + D)/(1 + A D) with D = s - 1; the term is the constant 1
            // once tanh has saturated to exactly 1.
            f += if m == 0.0 { w } else { w * (s - m) / (m + a * s) };
        }
        f
    };
    let fprime_at = |s: f64| -> f64 {
        let mut fp = 0.0;
        for &(a, m, w) in &terms {
            if m > 0.0 {
                let den = m + a * s;
                fp += w * m * (1.0 + a) / (den * den);
            }
        }
        fp
    };

    let mut s = 0.0;
    observe(s);
    let mut iterations = 0;
    loop {
        let f = f_at(s);
        if f.abs() <= NEWTON_TOL {
            break;
        }
        if iterations >= NEWTON_MAX_ITERS {
            return Err(Error::Numerics(format!(
                "conservation solve stalled after {NEWTON_MAX_ITERS} iterations (|f| = {:e})",
                f.abs()
            )));
        }
        let fp = fprime_at(s);
        if !fp.is_finite() || fp <= 0.0 {
            return Err(Error::Numerics(format!("degenerate Newton derivative {fp:e}")));
        }
        let s_prev = s;
        s -= f / fp;
        iterations += 1;
        if !(0.0..=2.0).contains(&s) {
            return Err(Error::Numerics(format!(
                "Newton iterate left [-1, 1]: D = {:e} (s_prev={s_prev:e} f={f:e} fp={fp:e} h={h_bar:e} bp_min={min_bp:e} bp_max={:e})",
                s - 1.0,
                beta_p.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            )));
        }
        observe(s);
    }

    // atanh(D) = atanh(s - 1) = -0.5 ln((2 - s)/s), stable for small s.
    let atanh_d = -0.5 * ((2.0 - s) / s).ln();
    if !atanh_d.is_finite() {
        return Err(Error::Numerics(format!("root pinned at D = {:e}", s - 1.0)));
    }
    Ok(TransformedRoot { gamma, s, d: s - 1.0, shift_beta: atanh_d + gamma, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_cartesian, build_triangular};
    use crate::quadrature::{cell_quadrature, RuleChoice};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn beta_rule_matches_tabulated_values() {
        assert!((beta_from_cell(1.0 / 32.0) - 192.0).abs() <= 1e-12);
        assert!((beta_from_cell(1.0 / 64.0) - 384.0).abs() <= 1e-12);
        assert!((beta_from_cell(1.0 / 128.0) - 768.0).abs() <= 1e-12);
        assert!((beta_from_cell(6.0) - 1.0).abs() <= 1e-15);
        // Triangular N=32 row: the rounded cell size gives a value within 1%
        // of the one tabulated from the exact size.
        let b = beta_from_cell(1.67e-2);
        assert!((b - 361.31).abs() / 361.31 < 0.01, "beta = {b}");
    }

    #[test]
    fn interface_classification() {
        assert!(is_interface_cell(0.5));
        assert!(!is_interface_cell(0.0));
        assert!(!is_interface_cell(1e-9));
        assert!(is_interface_cell(1e-8));
        assert!(!is_interface_cell(1.0));
    }

    #[test]
    fn inverse_scale_closed_forms_agree() {
        // atanh(2H - 1) and 0.5 ln(H/(1-H)) are the same function.
        let beta = 192.0;
        assert_eq!(inverse_scale(0.5, beta), 0.0);
        let mut h = 1e-6;
        while h < 1.0 - 1e-6 {
            let a = inverse_scale(h, beta);
            let b = 0.5 * (h / (1.0 - h)).ln() / beta;
            assert!((a - b).abs() <= 1e-12, "H = {h}: {a} vs {b}");
            h += 1e-3;
        }
        let phi = inverse_scale(0.9, 192.0);
        assert!((phi - 0.8_f64.atanh() / 192.0).abs() <= 1e-15);
    }

    #[test]
    fn scaling_roundtrip_within_window() {
        let beta = 384.0;
        for k in -150..=150 {
            let phi = k as f64 * 0.1 / beta; // beta*phi in [-15, 15]
            let back = inverse_scale(thinc_scale(phi, beta), beta);
            assert!((back - phi).abs() <= 1e-9, "phi {phi}: {back}");
        }
    }

    fn poly_on_square(coeffs: [f64; 10], beta: f64) -> (SurfacePolynomial, Vec<Vec3>, Vec<f64>) {
        let mesh = build_cartesian(&[1.0, 1.0], &[8, 8]).unwrap();
        let cell = 3 * 8 + 3;
        let (pts, wts) = cell_quadrature(&mesh, cell, RuleChoice::Default);
        let poly = SurfacePolynomial {
            cell,
            center: mesh.cells[cell].centroid,
            coeffs,
            shift: 0.0,
            beta,
            degraded: false,
        };
        (poly, pts, wts)
    }

    #[test]
    fn thinc_value_basics() {
        let mut coeffs = [0.0; 10];
        coeffs[C_X] = 1.0; // P = X
        let (poly, _, _) = poly_on_square(coeffs, 192.0);
        // On the interface: H = 1/2.
        assert!((poly.thinc_value(poly.center) - 0.5).abs() <= 1e-15);
        // beta (P + shift) = atanh(0.8) => H = 0.9.
        let x = poly.center + Vec3::xy(0.8_f64.atanh() / 192.0, 0.0);
        assert!((poly.thinc_value(x) - 0.9).abs() <= 1e-13);
    }

    #[test]
    fn antisymmetric_cell_with_half_fraction_has_zero_shift() {
        let mut coeffs = [0.0; 10];
        coeffs[C_X] = 1.0;
        let (poly, pts, wts) = poly_on_square(coeffs, 192.0);
        let sol = solve_interface_shift(&poly, 0.5, &pts, &wts).unwrap();
        assert!(sol.shift.abs() <= 1e-10, "shift = {:e}", sol.shift);
        // A slightly overfull cell pushes the interface outward: positive shift.
        let sol = solve_interface_shift(&poly, 0.5 + 1e-3, &pts, &wts).unwrap();
        assert!(sol.shift > 0.0);
    }

    #[test]
    fn shift_solve_rejects_non_interface_cells() {
        let mut coeffs = [0.0; 10];
        coeffs[C_X] = 1.0;
        let (poly, pts, wts) = poly_on_square(coeffs, 192.0);
        assert!(solve_interface_shift(&poly, 0.0, &pts, &wts).is_err());
        assert!(solve_interface_shift(&poly, 1.0, &pts, &wts).is_err());
    }

    #[test]
    fn conservation_closure_after_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let mut coeffs = [0.0; 10];
            for idx in [C_X, C_Y, C_XX, C_YY, C_XY] {
                coeffs[idx] = rng.gen_range(-3.0..3.0);
            }
            coeffs[C_1] = rng.gen_range(-0.05..0.05);
            let beta = rng.gen_range(50.0..800.0);
            let (mut poly, pts, wts) = poly_on_square(coeffs, beta);
            let h_bar = rng.gen_range(1e-6..1.0 - 1e-6);
            let sol = solve_interface_shift(&poly, h_bar, &pts, &wts).unwrap();
            poly.shift = sol.shift;
            let avg: f64 = pts.iter().zip(&wts).map(|(&p, w)| w * poly.thinc_value(p)).sum();
            assert!((avg - h_bar).abs() <= 2e-11, "closure {:e}", (avg - h_bar).abs());
        }
    }

    #[test]
    fn constraint_average_is_monotone_in_shift() {
        let mut coeffs = [0.0; 10];
        coeffs[C_X] = 1.3;
        coeffs[C_YY] = -2.0;
        let (mut poly, pts, wts) = poly_on_square(coeffs, 192.0);
        let mut prev = -1.0;
        for k in -40..=40 {
            poly.shift = k as f64 * 0.5 / poly.beta;
            let avg: f64 = pts.iter().zip(&wts).map(|(&p, w)| w * poly.thinc_value(p)).sum();
            assert!(avg > prev, "average not increasing at shift {}", poly.shift);
            prev = avg;
        }
    }

    /// Bisection on the untransformed f(D), as an independent root oracle.
    fn bisect_root(beta_p: &[f64], w: &[f64], h_bar: f64, gamma: f64) -> f64 {
        let c = 2.0 * (h_bar - 0.5);
        let f = |d: f64| -> f64 {
            beta_p
                .iter()
                .zip(w)
                .map(|(&bp, &wg)| {
                    let a = (bp + gamma).tanh();
                    wg * (a + d) / (1.0 + a * d)
                })
                .sum::<f64>()
                - c
        };
        let (mut lo, mut hi) = (-1.0 + 1e-15, 1.0 - 1e-15);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn newton_agrees_with_bisection_and_stays_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for case in 0..1000 {
            let n = rng.gen_range(4..=12);
            let beta_p: Vec<f64> = (0..n).map(|_| rng.gen_range(-12.0..12.0)).collect();
            let mut w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= s);
            let h_bar = match case % 3 {
                0 => rng.gen_range(1e-8..1e-4),
                1 => rng.gen_range(1.0 - 1e-4..1.0 - 1e-8),
                _ => rng.gen_range(0.01..0.99),
            };

            let mut trace = Vec::new();
            let root = solve_transformed(&beta_p, &w, h_bar, &mut |s| trace.push(s)).unwrap();
            // Monotone increasing offsets, all inside [-1, 1].
            for pair in trace.windows(2) {
                assert!(pair[1] > pair[0], "iterates not increasing: {:?}", trace);
            }
            assert!(trace.iter().all(|&s| (0.0..=2.0).contains(&s)));

            let d_ref = bisect_root(&beta_p, &w, h_bar, root.gamma);
            assert!(
                (root.d - d_ref).abs() <= 1e-9,
                "case {case}: newton D {} vs bisection {}",
                root.d,
                d_ref
            );
        }
    }

    #[test]
    fn opposite_gamma_branch_reaches_the_same_shift() {
        // The all-negative branch (gamma < -max beta P, start at D = +1) is
        // the mirror problem (-P, 1 - h_bar); both must give the same shift.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..200 {
            let beta_p: Vec<f64> = (0..6).map(|_| rng.gen_range(-8.0..8.0)).collect();
            let w = vec![1.0 / 6.0; 6];
            let h_bar = rng.gen_range(1e-6..1.0 - 1e-6);

            let primary = solve_transformed(&beta_p, &w, h_bar, &mut |_| {}).unwrap();
            let mirrored: Vec<f64> = beta_p.iter().map(|&v| -v).collect();
            let mut trace = Vec::new();
            let mirror =
                solve_transformed(&mirrored, &w, 1.0 - h_bar, &mut |s| trace.push(s)).unwrap();

            // Read in the original variables the mirror runs from D = +1
            // downward, monotone decreasing within [-1, 1].
            let descending: Vec<f64> = trace.iter().map(|&s| 1.0 - s).collect();
            for pair in descending.windows(2) {
                assert!(pair[1] < pair[0]);
            }
            assert!(
                (primary.shift_beta + mirror.shift_beta).abs()
                    <= 1e-8 * (1.0 + primary.shift_beta.abs()),
                "{} vs {}",
                primary.shift_beta,
                -mirror.shift_beta
            );
        }
    }

    #[test]
    fn near_empty_cell_with_saturated_points_still_converges() {
        // Root within an ulp of D = -1: a steep cell barely clipped by the
        // interface. The offset parameterization must still meet the 1e-11
        // residual stop.
        let beta_p = vec![-12.0, -9.0, -6.0, -0.2];
        let w = vec![0.25; 4];
        let root = solve_transformed(&beta_p, &w, 1.2e-8, &mut |_| {}).unwrap();
        assert!(root.s > 0.0 && root.s < 1e-12, "s = {:e}", root.s);
        assert!(root.shift_beta.is_finite());
        assert!(root.iterations <= NEWTON_MAX_ITERS);
    }

    #[test]
    fn fit_reproduces_linear_field_exactly() {
        let mesh = build_cartesian(&[1.0, 1.0], &[16, 16]).unwrap();
        let phi: Vec<f64> = mesh.cells.iter().map(|c| c.centroid.x - 0.5).collect();
        for cell in [5 * 16 + 5, 0, 255] {
            let p = fit_polynomial(&mesh, &phi, cell, 96.0);
            assert!((p.coeffs[C_X] - 1.0).abs() <= 1e-12);
            assert!(p.coeffs[C_Y].abs() <= 1e-12);
            for idx in [C_XX, C_YY, C_XY] {
                assert!(p.coeffs[idx].abs() <= 1e-10);
            }
            assert!((p.coeffs[C_1] - phi[cell]).abs() <= 1e-15);
        }
    }

    #[test]
    fn fit_is_exact_on_quadratics() {
        // Interior Cartesian cells must reproduce any total-degree-2 field.
        let mesh = build_cartesian(&[1.0, 1.0], &[16, 16]).unwrap();
        let f = |p: Vec3| {
            0.3 + 1.7 * p.x - 0.9 * p.y + 2.0 * p.x * p.x + 0.5 * p.y * p.y - 1.1 * p.x * p.y
        };
        let phi: Vec<f64> = mesh.cells.iter().map(|c| f(c.centroid)).collect();
        for cell in 0..mesh.n_cells() {
            let [i, j, _] = mesh.cart_index(cell);
            if i == 0 || j == 0 || i == 15 || j == 15 {
                continue;
            }
            let p = fit_polynomial(&mesh, &phi, cell, 96.0);
            let c = mesh.cells[cell].centroid;
            for (dx, dy) in [(0.01, 0.02), (-0.02, 0.015), (0.0, -0.025)] {
                let q = Vec3::xy(c.x + dx, c.y + dy);
                assert!((p.eval(q) - f(q)).abs() <= 1e-10);
            }
        }

        let mesh3 = build_cartesian(&[1.0, 1.0, 1.0], &[8, 8, 8]).unwrap();
        let g = |p: Vec3| 1.0 + p.x - 2.0 * p.z + p.x * p.y + 0.5 * p.z * p.z - p.y * p.z;
        let phi3: Vec<f64> = mesh3.cells.iter().map(|c| g(c.centroid)).collect();
        let cell = mesh3.locate_clamped(Vec3::new(0.55, 0.55, 0.55), 0);
        let p = fit_polynomial(&mesh3, &phi3, cell, 48.0);
        let c = mesh3.cells[cell].centroid;
        let q = Vec3::new(c.x + 0.03, c.y - 0.02, c.z + 0.01);
        assert!((p.eval(q) - g(q)).abs() <= 1e-10);
    }

    #[test]
    fn triangular_fit_is_exact_on_quadratics() {
        let mesh = build_triangular(&[1.0, 1.0], 9).unwrap();
        let f = |p: Vec3| 0.1 - 0.8 * p.x + 0.4 * p.y + 1.5 * p.x * p.x - 0.7 * p.x * p.y;
        let phi: Vec<f64> = mesh.cells.iter().map(|c| f(c.centroid)).collect();
        for cell in 0..mesh.n_cells() {
            let p = fit_polynomial(&mesh, &phi, cell, 100.0);
            assert!(!p.degraded, "cell {cell} degraded");
            let c = mesh.cells[cell].centroid;
            let q = Vec3::xy(c.x + 0.01, c.y - 0.014);
            let err = (p.eval(q) - f(q)).abs();
            assert!(err <= 1e-9, "cell {cell}: {err:e}");
        }
    }

    #[test]
    fn circle_fit_normal_converges_quadratically() {
        // Fitted zero-contour normal vs the analytic circle normal, measured
        // at the interface point nearest each near-interface centroid.
        let center = Vec3::xy(0.5, 0.5);
        let r = 0.15;
        let max_angle = |n: usize| -> f64 {
            let mesh = build_cartesian(&[1.0, 1.0], &[n, n]).unwrap();
            let phi: Vec<f64> =
                mesh.cells.iter().map(|c| r - (c.centroid - center).norm()).collect();
            let mut worst: f64 = 0.0;
            for cell in 0..mesh.n_cells() {
                let c = mesh.cells[cell].centroid;
                let dist = (c - center).norm();
                if (dist - r).abs() > 0.5 * mesh.cells[cell].delta {
                    continue;
                }
                let radial = (c - center).scale(1.0 / dist);
                let onto = center + radial * r; // nearest interface point
                let p = fit_polynomial(&mesh, &phi, cell, beta_from_cell(1.0 / n as f64));
                let g = p.gradient(onto);
                // phi decreases outward, so the fitted normal is -radial.
                let cosang = g.dot(-radial) / g.norm();
                worst = worst.max(cosang.clamp(-1.0, 1.0).acos());
            }
            worst
        };
        let e32 = max_angle(32);
        let e64 = max_angle(64);
        assert!(e64 <= e32 / 2.5, "angles {e32:e} -> {e64:e} not O(delta^2)");
        assert!(e32 < 0.02, "angle error too large: {e32}");
    }

    #[test]
    fn degenerate_tri_stencil_falls_back_to_linear() {
        // A two-triangle mesh gives each cell a single vertex-neighbor:
        // far fewer than the 5 quadratic unknowns.
        let verts = vec![
            Vec3::xy(0.0, 0.0),
            Vec3::xy(1.0, 0.0),
            Vec3::xy(1.0, 1.0),
            Vec3::xy(0.0, 1.0),
        ];
        let mesh = crate::mesh::from_triangles(verts, vec![[0, 1, 2], [0, 2, 3]]).unwrap();
        let phi = vec![0.1, -0.2];
        let p = fit_polynomial(&mesh, &phi, 0, 10.0);
        assert!(p.degraded);
        assert!((p.coeffs[C_1] - 0.1).abs() <= 1e-15);
        for idx in [C_XX, C_YY, C_XY] {
            assert_eq!(p.coeffs[idx], 0.0);
        }
    }
}
