//! Error metrics, interface extraction and output writers.

use crate::geom::Vec3;
use crate::mesh::{CellShape, Mesh, MeshKind};
use crate::thinc::{SurfacePolynomial, INTERFACE_EPS};
use crate::{Error, Result};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

/// Sub-cells per axis used by the symmetric-difference metric.
pub const SYM_DIFF_SUBDIV: usize = 20;

/// Metrics of one benchmark run.
#[derive(Clone, Debug)]
pub struct ErrorReport {
    pub case: String,
    pub mesh: String,
    pub n: usize,
    pub cells: usize,
    pub e_l1: f64,
    pub e_r: f64,
    pub e_sd: f64,
    /// Relative drift of the total VOF over the run.
    pub vof_drift: f64,
    /// Clipped volume over the run, relative to the initial total.
    pub clipped_mass: f64,
    /// Mean over steps of the per-step average Newton iteration count.
    pub newton_avg_iters: f64,
    pub newton_avg_min: f64,
    pub newton_avg_max: f64,
    pub steps: usize,
}

fn check_fields(mesh: &Mesh, fields: &[&[f64]]) -> Result<()> {
    for f in fields {
        if f.len() != mesh.n_cells() {
            return Err(Error::FieldMismatch { expected: mesh.n_cells(), got: f.len() });
        }
    }
    Ok(())
}

/// `sum_i |H_i - H_i^e| |cell_i|`.
pub fn error_l1(numeric: &[f64], exact: &[f64], mesh: &Mesh) -> Result<f64> {
    check_fields(mesh, &[numeric, exact])?;
    Ok(numeric
        .iter()
        .zip(exact)
        .zip(&mesh.cells)
        .map(|((n, e), c)| (n - e).abs() * c.volume)
        .sum())
}

/// L1 error normalized by the exact mass.
pub fn error_relative(numeric: &[f64], exact: &[f64], mesh: &Mesh) -> Result<f64> {
    let mass: f64 = exact.iter().zip(&mesh.cells).map(|(e, c)| e.abs() * c.volume).sum();
    if mass <= 0.0 {
        return Err(Error::Numerics("relative error undefined for zero exact mass".into()));
    }
    Ok(error_l1(numeric, exact, mesh)? / mass)
}

/// Convergence order between two resolutions: `log(e1/e2) / log(n2/n1)`.
pub fn convergence_order(e1: f64, e2: f64, n1: usize, n2: usize) -> f64 {
    (e1 / e2).ln() / (n2 as f64 / n1 as f64).ln()
}

/// Symmetric-difference error.
///
/// Over cells where both fields are interface cells, the reconstructed
/// region `psi >= 0` is compared against the exact region `phi^e >= 0` on a
/// sub-grid of `subdiv^d` control volumes, accumulating mismatched sub-cell
/// volume; all other cells contribute their plain VOF mismatch.
pub fn error_symmetric_difference(
    numeric: &[f64],
    polys: &[Option<SurfacePolynomial>],
    exact_level_set: &dyn Fn(Vec3) -> f64,
    exact: &[f64],
    mesh: &Mesh,
    subdiv: usize,
) -> Result<f64> {
    check_fields(mesh, &[numeric, exact])?;
    let in_band = |h: f64| h > INTERFACE_EPS && h < 1.0 - INTERFACE_EPS;
    let mut total = 0.0;
    for c in 0..mesh.n_cells() {
        let vol = mesh.cells[c].volume;
        if in_band(numeric[c]) && in_band(exact[c]) {
            let poly = polys[c].as_ref().ok_or_else(|| {
                Error::Numerics(format!("cell {c} is in the interface set but has no PSI"))
            })?;
            let mut mismatch = 0usize;
            let mut count = 0usize;
            for_each_subcell_center(mesh.cell_shape(c), subdiv, &mut |p| {
                count += 1;
                if (poly.psi(p) >= 0.0) != (exact_level_set(p) >= 0.0) {
                    mismatch += 1;
                }
            });
            total += vol * mismatch as f64 / count as f64;
        } else {
            total += (numeric[c] - exact[c]).abs() * vol;
        }
    }
    Ok(total)
}

/// Centers of a `subdiv`-per-axis decomposition of the cell, all of equal
/// volume.
fn for_each_subcell_center(shape: CellShape, subdiv: usize, visit: &mut dyn FnMut(Vec3)) {
    let n = subdiv;
    match shape {
        CellShape::Rectangle { lo, dx, dy } => {
            for j in 0..n {
                for i in 0..n {
                    visit(Vec3::xy(
                        lo.x + (i as f64 + 0.5) * dx / n as f64,
                        lo.y + (j as f64 + 0.5) * dy / n as f64,
                    ));
                }
            }
        }
        CellShape::Hexahedron { lo, dx, dy, dz } => {
            for k in 0..n {
                for j in 0..n {
                    for i in 0..n {
                        visit(Vec3::new(
                            lo.x + (i as f64 + 0.5) * dx / n as f64,
                            lo.y + (j as f64 + 0.5) * dy / n as f64,
                            lo.z + (k as f64 + 0.5) * dz / n as f64,
                        ));
                    }
                }
            }
        }
        CellShape::Triangle { v0, v1, v2 } => {
            // Uniform barycentric refinement into n^2 congruent triangles.
            let e1 = (v1 - v0).scale(1.0 / n as f64);
            let e2 = (v2 - v0).scale(1.0 / n as f64);
            let third = 1.0 / 3.0;
            for i in 0..n {
                for j in 0..n - i {
                    let base = v0 + e1 * i as f64 + e2 * j as f64;
                    // Upward triangle (i, j).
                    visit(base + (e1 + e2) * third);
                    // Downward triangle, present except on the hypotenuse row.
                    if i + j < n - 1 {
                        visit(base + (e1 + e2) * (2.0 * third));
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// PSI extraction
// ---------------------------------------------------------------------------

/// Piecewise-linear sampling of the interface polynomials: line segments in
/// 2D, triangles in 3D.
#[derive(Clone, Debug, Default)]
pub struct PsiSoup {
    pub segments: Vec<[Vec3; 2]>,
    pub triangles: Vec<[Vec3; 3]>,
}

/// Sample each interface cell's `psi` on a `samples_per_axis` lattice and
/// extract its zero set, clipped to the cell. Cells may contribute several
/// disconnected pieces.
pub fn extract_psi(
    polys: &[Option<SurfacePolynomial>],
    mesh: &Mesh,
    samples_per_axis: usize,
) -> PsiSoup {
    let s = samples_per_axis.max(2);
    let mut soup = PsiSoup::default();
    for (c, poly) in polys.iter().enumerate() {
        let Some(poly) = poly else { continue };
        match mesh.cell_shape(c) {
            CellShape::Rectangle { lo, dx, dy } => {
                marching_squares(poly, lo, dx, dy, s, None, &mut soup.segments);
            }
            CellShape::Triangle { v0, v1, v2 } => {
                let lo = Vec3::xy(v0.x.min(v1.x).min(v2.x), v0.y.min(v1.y).min(v2.y));
                let hi = Vec3::xy(v0.x.max(v1.x).max(v2.x), v0.y.max(v1.y).max(v2.y));
                marching_squares(
                    poly,
                    lo,
                    hi.x - lo.x,
                    hi.y - lo.y,
                    s,
                    Some([v0, v1, v2]),
                    &mut soup.segments,
                );
            }
            CellShape::Hexahedron { lo, dx, dy, dz } => {
                marching_tetrahedra(poly, lo, dx, dy, dz, s, &mut soup.triangles);
            }
        }
    }
    soup
}

fn zero_cross(a: Vec3, va: f64, b: Vec3, vb: f64) -> Vec3 {
    let t = if va == vb { 0.5 } else { va / (va - vb) };
    a + (b - a) * t.clamp(0.0, 1.0)
}

fn marching_squares(
    poly: &SurfacePolynomial,
    lo: Vec3,
    dx: f64,
    dy: f64,
    s: usize,
    clip_tri: Option<[Vec3; 3]>,
    out: &mut Vec<[Vec3; 2]>,
) {
    let m = s - 1; // sub-quads per axis
    let point = |i: usize, j: usize| {
        Vec3::xy(lo.x + dx * i as f64 / m as f64, lo.y + dy * j as f64 / m as f64)
    };
    let mut vals = vec![0.0; s * s];
    for j in 0..s {
        for i in 0..s {
            vals[j * s + i] = poly.psi(point(i, j));
        }
    }
    let mut emit = |a: Vec3, b: Vec3| {
        let seg = match clip_tri {
            None => Some([a, b]),
            Some(tri) => clip_segment_to_triangle(a, b, tri),
        };
        if let Some([p, q]) = seg {
            if (q - p).norm() > 1e-14 * (dx + dy) {
                out.push([p, q]);
            }
        }
    };
    for j in 0..m {
        for i in 0..m {
            let corners = [point(i, j), point(i + 1, j), point(i + 1, j + 1), point(i, j + 1)];
            let v = [
                vals[j * s + i],
                vals[j * s + i + 1],
                vals[(j + 1) * s + i + 1],
                vals[(j + 1) * s + i],
            ];
            let mut case = 0usize;
            for (bit, &vv) in v.iter().enumerate() {
                if vv >= 0.0 {
                    case |= 1 << bit;
                }
            }
            // Edge crossings: 0 bottom, 1 right, 2 top, 3 left.
            let edge = |e: usize| -> Vec3 {
                let (a, b) = [(0, 1), (1, 2), (2, 3), (3, 0)][e];
                zero_cross(corners[a], v[a], corners[b], v[b])
            };
            match case {
                0 | 15 => {}
                1 | 14 => emit(edge(3), edge(0)),
                2 | 13 => emit(edge(0), edge(1)),
                4 | 11 => emit(edge(1), edge(2)),
                8 | 7 => emit(edge(2), edge(3)),
                3 | 12 => emit(edge(3), edge(1)),
                6 | 9 => emit(edge(0), edge(2)),
                5 | 10 => {
                    // Saddle: resolve the pairing with the center value.
                    let center = (corners[0] + corners[2]).scale(0.5);
                    let vc = poly.psi(center);
                    let flip = (vc >= 0.0) != (case == 5);
                    if flip {
                        emit(edge(3), edge(0));
                        emit(edge(1), edge(2));
                    } else {
                        emit(edge(0), edge(1));
                        emit(edge(2), edge(3));
                    }
                }
                _ => unreachable!(),
            }
        }
    }
}

/// Clip a segment against a (counterclockwise) triangle; None when outside.
fn clip_segment_to_triangle(a: Vec3, b: Vec3, tri: [Vec3; 3]) -> Option<[Vec3; 2]> {
    let (mut t0, mut t1) = (0.0_f64, 1.0_f64);
    let d = b - a;
    for k in 0..3 {
        let (p, q) = (tri[k], tri[(k + 1) % 3]);
        let edge = q - p;
        // Inside is to the left of each edge.
        let nx = -edge.y;
        let ny = edge.x;
        let denom = nx * d.x + ny * d.y;
        let dist = nx * (a.x - p.x) + ny * (a.y - p.y);
        if denom.abs() < 1e-300 {
            if dist < 0.0 {
                return None;
            }
            continue;
        }
        let t = -dist / denom;
        if denom > 0.0 {
            t0 = t0.max(t);
        } else {
            t1 = t1.min(t);
        }
        if t0 > t1 {
            return None;
        }
    }
    Some([a + d * t0, a + d * t1])
}

/// Six-tetrahedron decomposition of each lattice cube, one or two triangles
/// per crossed tetrahedron.
fn marching_tetrahedra(
    poly: &SurfacePolynomial,
    lo: Vec3,
    dx: f64,
    dy: f64,
    dz: f64,
    s: usize,
    out: &mut Vec<[Vec3; 3]>,
) {
    let m = s - 1;
    let point = |i: usize, j: usize, k: usize| {
        Vec3::new(
            lo.x + dx * i as f64 / m as f64,
            lo.y + dy * j as f64 / m as f64,
            lo.z + dz * k as f64 / m as f64,
        )
    };
    let mut vals = vec![0.0; s * s * s];
    for k in 0..s {
        for j in 0..s {
            for i in 0..s {
                vals[(k * s + j) * s + i] = poly.psi(point(i, j, k));
            }
        }
    }
    // Cube corners indexed by bits (x, y, z); all six tets share edge 0-7.
    const TETS: [[usize; 4]; 6] =
        [[0, 1, 5, 7], [0, 5, 4, 7], [0, 4, 6, 7], [0, 6, 2, 7], [0, 2, 3, 7], [0, 3, 1, 7]];
    for k in 0..m {
        for j in 0..m {
            for i in 0..m {
                let corner = |bit: usize| {
                    (point(i + (bit & 1), j + ((bit >> 1) & 1), k + ((bit >> 2) & 1)), {
                        let (ii, jj, kk) = (i + (bit & 1), j + ((bit >> 1) & 1), k + ((bit >> 2) & 1));
                        vals[(kk * s + jj) * s + ii]
                    })
                };
                for tet in TETS {
                    let pv: Vec<(Vec3, f64)> = tet.iter().map(|&b| corner(b)).collect();
                    let inside: Vec<usize> =
                        (0..4).filter(|&q| pv[q].1 >= 0.0).collect();
                    match inside.len() {
                        0 | 4 => {}
                        1 | 3 => {
                            let apex = if inside.len() == 1 {
                                inside[0]
                            } else {
                                (0..4).find(|q| !inside.contains(q)).unwrap()
                            };
                            let others: Vec<usize> = (0..4).filter(|&q| q != apex).collect();
                            let tri: Vec<Vec3> = others
                                .iter()
                                .map(|&o| zero_cross(pv[apex].0, pv[apex].1, pv[o].0, pv[o].1))
                                .collect();
                            out.push([tri[0], tri[1], tri[2]]);
                        }
                        2 => {
                            let (a, b) = (inside[0], inside[1]);
                            let outs: Vec<usize> =
                                (0..4).filter(|q| !inside.contains(q)).collect();
                            let p = [
                                zero_cross(pv[a].0, pv[a].1, pv[outs[0]].0, pv[outs[0]].1),
                                zero_cross(pv[a].0, pv[a].1, pv[outs[1]].0, pv[outs[1]].1),
                                zero_cross(pv[b].0, pv[b].1, pv[outs[1]].0, pv[outs[1]].1),
                                zero_cross(pv[b].0, pv[b].1, pv[outs[0]].0, pv[outs[0]].1),
                            ];
                            out.push([p[0], p[1], p[2]]);
                            out.push([p[0], p[2], p[3]]);
                        }
                        _ => unreachable!(),
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Writers
// ---------------------------------------------------------------------------

fn fmt_f64(x: f64) -> String {
    format!("{x:.17e}")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut file = std::fs::File::create(path)
        .map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    file.write_all(text.as_bytes())
        .map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    Ok(())
}

/// Legacy ASCII VTK of per-cell scalar fields: STRUCTURED_POINTS on
/// Cartesian meshes, UNSTRUCTURED_GRID on triangulations. Values carry 17
/// significant digits so a reader recovers them exactly.
pub fn write_vtk(mesh: &Mesh, fields: &[(&str, &[f64])], path: &Path) -> Result<()> {
    for (_, f) in fields {
        check_fields(mesh, &[f])?;
    }
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    s.push_str("thinc-scaling fields\nASCII\n");
    match &mesh.kind {
        MeshKind::Cartesian2 { nx, ny, dx, dy } => {
            s.push_str("DATASET STRUCTURED_POINTS\n");
            let _ = writeln!(s, "DIMENSIONS {} {} 1", nx + 1, ny + 1);
            let _ = writeln!(s, "ORIGIN {} {} 0", fmt_f64(mesh.lo.x), fmt_f64(mesh.lo.y));
            let _ = writeln!(s, "SPACING {} {} 1", fmt_f64(*dx), fmt_f64(*dy));
        }
        MeshKind::Cartesian3 { nx, ny, nz, dx, dy, dz } => {
            s.push_str("DATASET STRUCTURED_POINTS\n");
            let _ = writeln!(s, "DIMENSIONS {} {} {}", nx + 1, ny + 1, nz + 1);
            let _ = writeln!(
                s,
                "ORIGIN {} {} {}",
                fmt_f64(mesh.lo.x),
                fmt_f64(mesh.lo.y),
                fmt_f64(mesh.lo.z)
            );
            let _ = writeln!(s, "SPACING {} {} {}", fmt_f64(*dx), fmt_f64(*dy), fmt_f64(*dz));
        }
        MeshKind::Triangular { vertices, tris, .. } => {
            s.push_str("DATASET UNSTRUCTURED_GRID\n");
            let _ = writeln!(s, "POINTS {} double", vertices.len());
            for v in vertices {
                let _ = writeln!(s, "{} {} 0", fmt_f64(v.x), fmt_f64(v.y));
            }
            let _ = writeln!(s, "CELLS {} {}", tris.len(), 4 * tris.len());
            for t in tris {
                let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
            }
            let _ = writeln!(s, "CELL_TYPES {}", tris.len());
            for _ in tris {
                s.push_str("5\n");
            }
        }
    }
    let _ = writeln!(s, "CELL_DATA {}", mesh.n_cells());
    for (name, values) in fields {
        let _ = writeln!(s, "SCALARS {name} double 1");
        s.push_str("LOOKUP_TABLE default\n");
        for v in *values {
            s.push_str(&fmt_f64(*v));
            s.push('\n');
        }
    }
    write_text(path, &s)
}

/// The PSI soup as VTK POLYDATA (lines in 2D, triangles in 3D).
pub fn write_vtk_psi(soup: &PsiSoup, path: &Path) -> Result<()> {
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    s.push_str("interface polynomial zero set\nASCII\nDATASET POLYDATA\n");
    let npts = 2 * soup.segments.len() + 3 * soup.triangles.len();
    let _ = writeln!(s, "POINTS {npts} double");
    for seg in &soup.segments {
        for p in seg {
            let _ = writeln!(s, "{} {} {}", fmt_f64(p.x), fmt_f64(p.y), fmt_f64(p.z));
        }
    }
    for tri in &soup.triangles {
        for p in tri {
            let _ = writeln!(s, "{} {} {}", fmt_f64(p.x), fmt_f64(p.y), fmt_f64(p.z));
        }
    }
    if !soup.segments.is_empty() {
        let _ = writeln!(s, "LINES {} {}", soup.segments.len(), 3 * soup.segments.len());
        for (i, _) in soup.segments.iter().enumerate() {
            let _ = writeln!(s, "2 {} {}", 2 * i, 2 * i + 1);
        }
    }
    if !soup.triangles.is_empty() {
        let base = 2 * soup.segments.len();
        let _ = writeln!(s, "POLYGONS {} {}", soup.triangles.len(), 4 * soup.triangles.len());
        for (i, _) in soup.triangles.iter().enumerate() {
            let _ = writeln!(s, "3 {} {} {}", base + 3 * i, base + 3 * i + 1, base + 3 * i + 2);
        }
    }
    write_text(path, &s)
}

/// One CSV row per report, with the pairwise convergence order of `e_l1`
/// against the previous row.
pub fn write_csv(reports: &[ErrorReport], path: &Path) -> Result<()> {
    let mut s = String::from(
        "case,mesh,n,cells,e_l1,e_r,e_sd,order_l1,vof_drift,clipped_mass,newton_avg_iters,steps\n",
    );
    for (i, r) in reports.iter().enumerate() {
        let order = if i > 0 && reports[i - 1].case == r.case && reports[i - 1].mesh == r.mesh {
            fmt_f64(convergence_order(reports[i - 1].e_l1, r.e_l1, reports[i - 1].n, r.n))
        } else {
            String::new()
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.case,
            r.mesh,
            r.n,
            r.cells,
            fmt_f64(r.e_l1),
            fmt_f64(r.e_r),
            fmt_f64(r.e_sd),
            order,
            fmt_f64(r.vof_drift),
            fmt_f64(r.clipped_mass),
            fmt_f64(r.newton_avg_iters),
            r.steps,
        );
    }
    write_text(path, &s)
}
