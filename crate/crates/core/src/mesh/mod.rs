//! Mesh construction, geometry, connectivity and point location.
//!
//! Supports uniform Cartesian grids in 2D/3D and conforming triangulations in
//! 2D (from an internal generator or a Gmsh MSH 2.2 file). A mesh is immutable
//! after construction.

mod msh;

pub use msh::load_gmsh;

use crate::geom::Vec3;
use crate::quadrature::gauss_legendre_01;
use crate::{Error, Result};
use std::collections::HashMap;

/// Neighbor id used on boundary faces.
pub const NO_NEIGHBOR: usize = usize::MAX;

#[derive(Clone, Debug)]
pub struct Cell {
    pub centroid: Vec3,
    pub volume: f64,
    /// Face ids, and for triangles: `faces[k]` is the edge opposite vertex k.
    pub faces: Vec<usize>,
    /// Face-neighbor cell ids aligned with `faces`; `NO_NEIGHBOR` on boundary.
    pub neighbors: Vec<usize>,
    /// Characteristic size: min spacing on Cartesian grids, hydraulic
    /// diameter 4A/P on triangles.
    pub delta: f64,
}

#[derive(Clone, Debug)]
pub struct Face {
    pub area: f64,
    /// Unit normal oriented outward from the owner (lower-id) cell.
    pub normal: Vec3,
    pub owner: usize,
    pub neighbor: Option<usize>,
    pub gauss_points: Vec<Vec3>,
    /// Normalized weights (sum to 1); integrals scale by `area`.
    pub gauss_weights: Vec<f64>,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.neighbor.is_none()
    }
}

#[derive(Clone, Debug)]
pub enum MeshKind {
    Cartesian2 { nx: usize, ny: usize, dx: f64, dy: f64 },
    Cartesian3 { nx: usize, ny: usize, nz: usize, dx: f64, dy: f64, dz: f64 },
    Triangular {
        vertices: Vec<Vec3>,
        /// Vertex ids per triangle, counterclockwise.
        tris: Vec<[usize; 3]>,
        /// Cells sharing at least one vertex with each cell (excluding it).
        vertex_neighbors: Vec<Vec<usize>>,
    },
}

/// Geometric description of one cell, for quadrature mapping and subdivision.
#[derive(Clone, Copy, Debug)]
pub enum CellShape {
    Rectangle { lo: Vec3, dx: f64, dy: f64 },
    Hexahedron { lo: Vec3, dx: f64, dy: f64, dz: f64 },
    Triangle { v0: Vec3, v1: Vec3, v2: Vec3 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Location {
    Cell(usize),
    Outside,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    pub dim: usize,
    pub cells: Vec<Cell>,
    pub faces: Vec<Face>,
    pub kind: MeshKind,
    pub lo: Vec3,
    pub hi: Vec3,
    min_delta: f64,
}

const BARY_TOL: f64 = 1e-12;

impl Mesh {
    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn min_delta(&self) -> f64 {
        self.min_delta
    }

    pub fn domain_diagonal(&self) -> f64 {
        (self.hi - self.lo).norm()
    }

    pub fn is_cartesian(&self) -> bool {
        matches!(self.kind, MeshKind::Cartesian2 { .. } | MeshKind::Cartesian3 { .. })
    }

    /// Lattice index of a Cartesian cell id.
    pub fn cart_index(&self, c: usize) -> [usize; 3] {
        match self.kind {
            MeshKind::Cartesian2 { nx, .. } => [c % nx, c / nx, 0],
            MeshKind::Cartesian3 { nx, ny, .. } => [c % nx, (c / nx) % ny, c / (nx * ny)],
            _ => panic!("cart_index on unstructured mesh"),
        }
    }

    pub fn cell_shape(&self, c: usize) -> CellShape {
        match &self.kind {
            MeshKind::Cartesian2 { nx, dx, dy, .. } => {
                let (i, j) = (c % nx, c / nx);
                let lo = Vec3::new(self.lo.x + i as f64 * dx, self.lo.y + j as f64 * dy, 0.0);
                CellShape::Rectangle { lo, dx: *dx, dy: *dy }
            }
            MeshKind::Cartesian3 { nx, ny, dx, dy, dz, .. } => {
                let [i, j, k] = self.cart_index(c);
                let _ = (nx, ny);
                let lo = Vec3::new(
                    self.lo.x + i as f64 * dx,
                    self.lo.y + j as f64 * dy,
                    self.lo.z + k as f64 * dz,
                );
                CellShape::Hexahedron { lo, dx: *dx, dy: *dy, dz: *dz }
            }
            MeshKind::Triangular { vertices, tris, .. } => {
                let [a, b, cc] = tris[c];
                CellShape::Triangle { v0: vertices[a], v1: vertices[b], v2: vertices[cc] }
            }
        }
    }

    /// Cells sharing a vertex with `c` (triangular meshes only).
    pub fn vertex_neighbors(&self, c: usize) -> &[usize] {
        match &self.kind {
            MeshKind::Triangular { vertex_neighbors, .. } => &vertex_neighbors[c],
            _ => panic!("vertex_neighbors on Cartesian mesh"),
        }
    }

    /// Cell containing `point`, or `Outside`. Points exactly on an interior
    /// face resolve to the lower-id adjacent cell.
    pub fn locate_cell(&self, point: Vec3, hint: usize) -> Location {
        match &self.kind {
            MeshKind::Cartesian2 { .. } | MeshKind::Cartesian3 { .. } => self.locate_cart(point),
            MeshKind::Triangular { .. } => self.locate_tri(point, hint),
        }
    }

    /// Like `locate_cell`, but out-of-domain points are clamped to the
    /// nearest boundary cell. Used by departure-point tracing, where only
    /// floating-point drift can leave the domain.
    pub fn locate_clamped(&self, point: Vec3, hint: usize) -> usize {
        if let Location::Cell(c) = self.locate_cell(point, hint) {
            return c;
        }
        let ext = self.hi - self.lo;
        let eps = 1e-12;
        let clamped = Vec3::new(
            point.x.clamp(self.lo.x + eps * ext.x, self.hi.x - eps * ext.x),
            point.y.clamp(self.lo.y + eps * ext.y, self.hi.y - eps * ext.y),
            if self.dim == 3 {
                point.z.clamp(self.lo.z + eps * ext.z, self.hi.z - eps * ext.z)
            } else {
                0.0
            },
        );
        match self.locate_cell(clamped, hint) {
            Location::Cell(c) => c,
            Location::Outside => {
                // Clamped point still unlocated (degenerate triangulation gap);
                // fall back to the nearest centroid.
                (0..self.n_cells())
                    .min_by(|&a, &b| {
                        let da = (self.cells[a].centroid - clamped).norm_sq();
                        let db = (self.cells[b].centroid - clamped).norm_sq();
                        da.partial_cmp(&db).unwrap()
                    })
                    .expect("mesh has no cells")
            }
        }
    }

    fn locate_cart(&self, p: Vec3) -> Location {
        if p.x < self.lo.x || p.x > self.hi.x || p.y < self.lo.y || p.y > self.hi.y {
            return Location::Outside;
        }
        match self.kind {
            MeshKind::Cartesian2 { nx, ny, dx, dy } => {
                let i = lattice_coord((p.x - self.lo.x) / dx, nx);
                let j = lattice_coord((p.y - self.lo.y) / dy, ny);
                Location::Cell(j * nx + i)
            }
            MeshKind::Cartesian3 { nx, ny, nz, dx, dy, dz } => {
                if p.z < self.lo.z || p.z > self.hi.z {
                    return Location::Outside;
                }
                let i = lattice_coord((p.x - self.lo.x) / dx, nx);
                let j = lattice_coord((p.y - self.lo.y) / dy, ny);
                let k = lattice_coord((p.z - self.lo.z) / dz, nz);
                Location::Cell((k * ny + j) * nx + i)
            }
            _ => unreachable!(),
        }
    }

    fn barycentric(&self, c: usize, p: Vec3) -> [f64; 3] {
        let CellShape::Triangle { v0, v1, v2 } = self.cell_shape(c) else {
            panic!("barycentric on non-triangle");
        };
        let denom = cross2(v1 - v0, v2 - v0);
        [
            cross2(v1 - p, v2 - p) / denom,
            cross2(v2 - p, v0 - p) / denom,
            cross2(v0 - p, v1 - p) / denom,
        ]
    }

    fn tri_contains(&self, c: usize, p: Vec3) -> bool {
        self.barycentric(c, p).iter().all(|&l| l >= -BARY_TOL)
    }

    fn locate_tri(&self, p: Vec3, hint: usize) -> Location {
        let hint = if hint < self.n_cells() { hint } else { 0 };
        // Walk toward the point via the most violated edge; cap the walk to
        // guard against cycling on degenerate meshes, then scan exhaustively.
        let cap = 4 * (self.n_cells() as f64).sqrt().ceil() as usize + 8;
        let mut cur = hint;
        for _ in 0..cap {
            let bary = self.barycentric(cur, p);
            let (kmin, &lmin) = bary
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap();
            if lmin >= -BARY_TOL {
                return Location::Cell(self.tri_tie_break(cur, p, bary));
            }
            match self.cells[cur].neighbors[kmin] {
                NO_NEIGHBOR => break,
                nb => cur = nb,
            }
        }
        for c in 0..self.n_cells() {
            if self.tri_contains(c, p) {
                return Location::Cell(self.tri_tie_break(c, p, self.barycentric(c, p)));
            }
        }
        Location::Outside
    }

    /// Among `found` and its neighbors across edges the point lies on,
    /// return the lowest id that contains the point.
    fn tri_tie_break(&self, found: usize, p: Vec3, bary: [f64; 3]) -> usize {
        let mut best = found;
        for k in 0..3 {
            if bary[k].abs() <= BARY_TOL {
                let nb = self.cells[found].neighbors[k];
                if nb != NO_NEIGHBOR && nb < best && self.tri_contains(nb, p) {
                    best = nb;
                }
            }
        }
        best
    }
}

/// Cell index along one axis with tie-break to the lower cell on exact faces.
fn lattice_coord(t: f64, n: usize) -> usize {
    let mut i = t.floor();
    if i == t && i > 0.0 {
        i -= 1.0;
    }
    (i as usize).min(n - 1)
}

fn cross2(a: Vec3, b: Vec3) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Uniform Cartesian mesh over `[0, extents]` with `counts[d]` cells per axis.
pub fn build_cartesian(extents: &[f64], counts: &[usize]) -> Result<Mesh> {
    if extents.len() != counts.len() || !(extents.len() == 2 || extents.len() == 3) {
        return Err(Error::Config(format!(
            "expected 2 or 3 matching extents/counts, got {}/{}",
            extents.len(),
            counts.len()
        )));
    }
    for (&e, &n) in extents.iter().zip(counts) {
        if e <= 0.0 {
            return Err(Error::Config(format!("domain extent must be positive, got {e}")));
        }
        if n < 2 {
            return Err(Error::Config(format!("need at least 2 cells per axis, got {n}")));
        }
    }
    if extents.len() == 2 {
        Ok(build_cartesian2(extents[0], extents[1], counts[0], counts[1]))
    } else {
        Ok(build_cartesian3(extents, counts))
    }
}

fn build_cartesian2(lx: f64, ly: f64, nx: usize, ny: usize) -> Mesh {
    let (dx, dy) = (lx / nx as f64, ly / ny as f64);
    let delta = dx.min(dy);
    let volume = dx * dy;
    let (gx, gw) = gauss_legendre_01(2);

    let mut cells = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            cells.push(Cell {
                centroid: Vec3::xy((i as f64 + 0.5) * dx, (j as f64 + 0.5) * dy),
                volume,
                faces: Vec::with_capacity(4),
                neighbors: Vec::with_capacity(4),
                delta,
            });
        }
    }

    let mut faces = Vec::with_capacity((nx + 1) * ny + nx * (ny + 1));
    let mut add_face = |cells: &mut Vec<Cell>, left: Option<usize>, right: Option<usize>, area, normal, gp, gwt| {
        let id = faces.len();
        let (owner, neighbor) = match (left, right) {
            (Some(l), Some(r)) => (l, Some(r)),
            (Some(l), None) => (l, None),
            (None, Some(r)) => (r, None),
            (None, None) => unreachable!(),
        };
        faces.push(Face { area, normal, owner, neighbor, gauss_points: gp, gauss_weights: gwt });
        if let Some(l) = left {
            cells[l].faces.push(id);
            cells[l].neighbors.push(right.unwrap_or(NO_NEIGHBOR));
        }
        if let Some(r) = right {
            cells[r].faces.push(id);
            cells[r].neighbors.push(left.unwrap_or(NO_NEIGHBOR));
        }
    };

    // x-normal faces at x = i*dx; owner is the left (lower-id) cell.
    for j in 0..ny {
        for i in 0..=nx {
            let left = (i > 0).then(|| j * nx + i - 1);
            let right = (i < nx).then(|| j * nx + i);
            let x = i as f64 * dx;
            let normal = if left.is_some() { Vec3::xy(1.0, 0.0) } else { Vec3::xy(-1.0, 0.0) };
            let gp = gx.iter().map(|&t| Vec3::xy(x, (j as f64 + t) * dy)).collect();
            add_face(&mut cells, left, right, dy, normal, gp, gw.clone());
        }
    }
    // y-normal faces at y = j*dy; owner is the lower cell.
    for j in 0..=ny {
        for i in 0..nx {
            let below = (j > 0).then(|| (j - 1) * nx + i);
            let above = (j < ny).then(|| j * nx + i);
            let y = j as f64 * dy;
            let normal = if below.is_some() { Vec3::xy(0.0, 1.0) } else { Vec3::xy(0.0, -1.0) };
            let gp = gx.iter().map(|&t| Vec3::xy((i as f64 + t) * dx, y)).collect();
            add_face(&mut cells, below, above, dx, normal, gp, gw.clone());
        }
    }

    Mesh {
        dim: 2,
        cells,
        faces,
        kind: MeshKind::Cartesian2 { nx, ny, dx, dy },
        lo: Vec3::ZERO,
        hi: Vec3::xy(lx, ly),
        min_delta: delta,
    }
}

fn build_cartesian3(extents: &[f64], counts: &[usize]) -> Mesh {
    let (nx, ny, nz) = (counts[0], counts[1], counts[2]);
    let (dx, dy, dz) = (
        extents[0] / nx as f64,
        extents[1] / ny as f64,
        extents[2] / nz as f64,
    );
    let delta = dx.min(dy).min(dz);
    let volume = dx * dy * dz;
    let (g3, w3) = gauss_legendre_01(3);

    let mut cells = Vec::with_capacity(nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                cells.push(Cell {
                    centroid: Vec3::new(
                        (i as f64 + 0.5) * dx,
                        (j as f64 + 0.5) * dy,
                        (k as f64 + 0.5) * dz,
                    ),
                    volume,
                    faces: Vec::with_capacity(6),
                    neighbors: Vec::with_capacity(6),
                    delta,
                });
            }
        }
    }

    let cell_id = |i: usize, j: usize, k: usize| (k * ny + j) * nx + i;
    let mut faces: Vec<Face> = Vec::new();
    // 3x3 tensor Gauss on a rectangular face spanned by axes (a, b).
    let face_gauss = |base: Vec3, ea: Vec3, eb: Vec3| -> (Vec<Vec3>, Vec<f64>) {
        let mut pts = Vec::with_capacity(9);
        let mut wts = Vec::with_capacity(9);
        for (ia, &ta) in g3.iter().enumerate() {
            for (ib, &tb) in g3.iter().enumerate() {
                pts.push(base + ea * ta + eb * tb);
                wts.push(w3[ia] * w3[ib]);
            }
        }
        (pts, wts)
    };
    let mut add_face = |cells: &mut Vec<Cell>,
                        lowc: Option<usize>,
                        highc: Option<usize>,
                        area: f64,
                        axis_normal: Vec3,
                        gp: Vec<Vec3>,
                        gwt: Vec<f64>| {
        let id = faces.len();
        let (owner, neighbor, normal) = match (lowc, highc) {
            (Some(l), Some(r)) => (l, Some(r), axis_normal),
            (Some(l), None) => (l, None, axis_normal),
            (None, Some(r)) => (r, None, -axis_normal),
            (None, None) => unreachable!(),
        };
        faces.push(Face { area, normal, owner, neighbor, gauss_points: gp, gauss_weights: gwt });
        if let Some(l) = lowc {
            cells[l].faces.push(id);
            cells[l].neighbors.push(highc.unwrap_or(NO_NEIGHBOR));
        }
        if let Some(r) = highc {
            cells[r].faces.push(id);
            cells[r].neighbors.push(lowc.unwrap_or(NO_NEIGHBOR));
        }
    };

    for k in 0..nz {
        for j in 0..ny {
            for i in 0..=nx {
                let lowc = (i > 0).then(|| cell_id(i - 1, j, k));
                let highc = (i < nx).then(|| cell_id(i, j, k));
                let base = Vec3::new(i as f64 * dx, j as f64 * dy, k as f64 * dz);
                let (gp, gwt) = face_gauss(base, Vec3::new(0.0, dy, 0.0), Vec3::new(0.0, 0.0, dz));
                add_face(&mut cells, lowc, highc, dy * dz, Vec3::new(1.0, 0.0, 0.0), gp, gwt);
            }
        }
    }
    for k in 0..nz {
        for j in 0..=ny {
            for i in 0..nx {
                let lowc = (j > 0).then(|| cell_id(i, j - 1, k));
                let highc = (j < ny).then(|| cell_id(i, j, k));
                let base = Vec3::new(i as f64 * dx, j as f64 * dy, k as f64 * dz);
                let (gp, gwt) = face_gauss(base, Vec3::new(dx, 0.0, 0.0), Vec3::new(0.0, 0.0, dz));
                add_face(&mut cells, lowc, highc, dx * dz, Vec3::new(0.0, 1.0, 0.0), gp, gwt);
            }
        }
    }
    for k in 0..=nz {
        for j in 0..ny {
            for i in 0..nx {
                let lowc = (k > 0).then(|| cell_id(i, j, k - 1));
                let highc = (k < nz).then(|| cell_id(i, j, k));
                let base = Vec3::new(i as f64 * dx, j as f64 * dy, k as f64 * dz);
                let (gp, gwt) = face_gauss(base, Vec3::new(dx, 0.0, 0.0), Vec3::new(0.0, dy, 0.0));
                add_face(&mut cells, lowc, highc, dx * dy, Vec3::new(0.0, 0.0, 1.0), gp, gwt);
            }
        }
    }

    Mesh {
        dim: 3,
        cells,
        faces,
        kind: MeshKind::Cartesian3 { nx, ny, nz, dx, dy, dz },
        lo: Vec3::ZERO,
        hi: Vec3::new(extents[0], extents[1], extents[2]),
        min_delta: delta,
    }
}

/// Conforming triangulation of `[0, extents]` built by splitting each quad of
/// an (n-1) x (n-1) Cartesian grid along its diagonal, where `n` is the
/// number of nodes per boundary edge. Fallback generator so triangular runs
/// need no external mesh files.
pub fn build_triangular(extents: &[f64], boundary_nodes: usize) -> Result<Mesh> {
    if extents.len() != 2 || extents[0] <= 0.0 || extents[1] <= 0.0 {
        return Err(Error::Config("triangular generator needs two positive extents".into()));
    }
    if boundary_nodes < 2 {
        return Err(Error::Config(format!(
            "need at least 2 boundary nodes per edge, got {boundary_nodes}"
        )));
    }
    let n = boundary_nodes - 1; // quads per axis
    let (dx, dy) = (extents[0] / n as f64, extents[1] / n as f64);
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(Vec3::xy(i as f64 * dx, j as f64 * dy));
        }
    }
    let vid = |i: usize, j: usize| j * (n + 1) + i;
    let mut tris = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (p00, p10, p11, p01) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            tris.push([p00, p10, p11]);
            tris.push([p00, p11, p01]);
        }
    }
    from_triangles(vertices, tris)
}

/// Build a triangular mesh from raw vertices and triangle connectivity.
/// Triangles are reoriented counterclockwise; degenerate ones are rejected.
pub fn from_triangles(vertices: Vec<Vec3>, mut tris: Vec<[usize; 3]>) -> Result<Mesh> {
    if tris.is_empty() {
        return Err(Error::Config("triangulation has no cells".into()));
    }
    let (gx, gw) = gauss_legendre_01(2);
    let mut lo = Vec3::new(f64::INFINITY, f64::INFINITY, 0.0);
    let mut hi = Vec3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0);
    for v in &vertices {
        lo.x = lo.x.min(v.x);
        lo.y = lo.y.min(v.y);
        hi.x = hi.x.max(v.x);
        hi.y = hi.y.max(v.y);
    }
    let scale2 = (hi - lo).norm_sq().max(f64::MIN_POSITIVE);

    let mut cells = Vec::with_capacity(tris.len());
    for (t, tri) in tris.iter_mut().enumerate() {
        for &v in tri.iter() {
            if v >= vertices.len() {
                return Err(Error::Config(format!("triangle {t} references missing vertex {v}")));
            }
        }
        let [a, b, c] = *tri;
        let mut area2 = cross2(vertices[b] - vertices[a], vertices[c] - vertices[a]);
        if area2 < 0.0 {
            tri.swap(1, 2);
            area2 = -area2;
        }
        if area2 <= 1e-14 * scale2 {
            return Err(Error::Config(format!("triangle {t} is degenerate (zero area)")));
        }
        let [a, b, c] = *tri;
        let area = 0.5 * area2;
        let perimeter = (vertices[b] - vertices[a]).norm()
            + (vertices[c] - vertices[b]).norm()
            + (vertices[a] - vertices[c]).norm();
        cells.push(Cell {
            centroid: (vertices[a] + vertices[b] + vertices[c]).scale(1.0 / 3.0),
            volume: area,
            faces: vec![0; 3],
            neighbors: vec![NO_NEIGHBOR; 3],
            delta: 4.0 * area / perimeter,
        });
    }

    // Edge k of a triangle is opposite vertex k.
    let mut faces: Vec<Face> = Vec::new();
    let mut edge_map: HashMap<(usize, usize), usize> = HashMap::new();
    for (t, tri) in tris.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
            let key = (a.min(b), a.max(b));
            match edge_map.get(&key) {
                Some(&f) => {
                    if faces[f].neighbor.is_some() {
                        return Err(Error::Config(format!(
                            "edge ({a}, {b}) is shared by more than two triangles"
                        )));
                    }
                    faces[f].neighbor = Some(t);
                    cells[t].faces[k] = f;
                    let owner = faces[f].owner;
                    cells[t].neighbors[k] = owner;
                    // Point the owner's aligned slot back at us.
                    let ok = tris[owner].iter().position(|&v| v != a && v != b).unwrap();
                    cells[owner].neighbors[ok] = t;
                }
                None => {
                    let (pa, pb) = (vertices[a], vertices[b]);
                    let e = pb - pa;
                    let len = e.norm();
                    // Edges run counterclockwise around the owner, so the
                    // outward normal is the clockwise rotation.
                    let normal = Vec3::xy(e.y / len, -e.x / len);
                    let gp = gx.iter().map(|&s| pa + e * s).collect();
                    let id = faces.len();
                    faces.push(Face {
                        area: len,
                        normal,
                        owner: t,
                        neighbor: None,
                        gauss_points: gp,
                        gauss_weights: gw.clone(),
                    });
                    edge_map.insert(key, id);
                    cells[t].faces[k] = id;
                }
            }
        }
    }

    let mut vertex_cells: Vec<Vec<usize>> = vec![Vec::new(); vertices.len()];
    for (t, tri) in tris.iter().enumerate() {
        for &v in tri {
            vertex_cells[v].push(t);
        }
    }
    let mut vertex_neighbors = Vec::with_capacity(tris.len());
    for (t, tri) in tris.iter().enumerate() {
        let mut nbrs: Vec<usize> = tri
            .iter()
            .flat_map(|&v| vertex_cells[v].iter().copied())
            .filter(|&c| c != t)
            .collect();
        nbrs.sort_unstable();
        nbrs.dedup();
        vertex_neighbors.push(nbrs);
    }

    let min_delta = cells.iter().map(|c| c.delta).fold(f64::INFINITY, f64::min);
    Ok(Mesh {
        dim: 2,
        cells,
        faces,
        kind: MeshKind::Triangular { vertices, tris, vertex_neighbors },
        lo,
        hi,
        min_delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn check_geometry(m: &Mesh) {
        // Closed-surface identity and unit normals.
        for (c, cell) in m.cells.iter().enumerate() {
            let mut s = Vec3::ZERO;
            let mut area_sum = 0.0;
            for &f in &cell.faces {
                let face = &m.faces[f];
                let sign = if face.owner == c { 1.0 } else { -1.0 };
                s += face.normal * (face.area * sign);
                area_sum += face.area;
                assert!((face.normal.norm() - 1.0).abs() <= 1e-14);
            }
            assert!(s.norm() <= 1e-12 * area_sum, "cell {c} not closed: {:?}", s);
            assert!(cell.volume > 0.0);
        }
        // Total volume matches the domain volume.
        let total: f64 = m.cells.iter().map(|c| c.volume).sum();
        let ext = m.hi - m.lo;
        let domain = if m.dim == 2 { ext.x * ext.y } else { ext.x * ext.y * ext.z };
        assert!((total - domain).abs() <= 1e-12 * domain);
        // Each centroid locates to its own cell.
        for c in 0..m.n_cells() {
            assert_eq!(m.locate_cell(m.cells[c].centroid, 0), Location::Cell(c));
        }
        // Face weights are normalized.
        for f in &m.faces {
            let s: f64 = f.gauss_weights.iter().sum();
            assert!((s - 1.0).abs() <= 1e-14);
        }
    }

    #[test]
    fn cartesian_unit_square_n32() {
        let m = build_cartesian(&[1.0, 1.0], &[32, 32]).unwrap();
        assert_eq!(m.n_cells(), 32 * 32);
        for c in &m.cells {
            assert!((c.delta - 3.125e-2).abs() <= 1e-15);
        }
        check_geometry(&m);
    }

    #[test]
    fn cartesian_cuboid_shear_layout() {
        let m = build_cartesian(&[1.0, 1.0, 2.0], &[32, 32, 64]).unwrap();
        assert_eq!(m.n_cells(), 32 * 32 * 64);
        for c in &m.cells {
            assert!((c.delta - 1.0 / 32.0).abs() <= 1e-15);
            assert!((c.volume - (1.0 / 32.0_f64).powi(3)).abs() <= 1e-18);
        }
        check_geometry(&m);
    }

    #[test]
    fn cartesian_rejects_bad_config() {
        assert!(build_cartesian(&[0.0, 1.0], &[4, 4]).is_err());
        assert!(build_cartesian(&[-1.0, 1.0], &[4, 4]).is_err());
        assert!(build_cartesian(&[1.0, 1.0], &[1, 4]).is_err());
    }

    #[test]
    fn triangular_split_counts() {
        let m = build_triangular(&[1.0, 1.0], 4).unwrap();
        assert_eq!(m.n_cells(), 18); // 3x3 quads, two triangles each
        check_geometry(&m);
        // Right isoceles triangle with legs h: hydraulic diameter 2h/(2+sqrt(2)).
        let h = 1.0 / 3.0;
        let want = 2.0 * h / (2.0 + 2.0_f64.sqrt());
        for c in &m.cells {
            assert!((c.delta - want).abs() <= 1e-14);
        }
    }

    #[test]
    fn equilateral_hydraulic_diameter() {
        let s = 0.7;
        let verts = vec![
            Vec3::xy(0.0, 0.0),
            Vec3::xy(s, 0.0),
            Vec3::xy(0.5 * s, s * 3.0_f64.sqrt() / 2.0),
        ];
        let m = from_triangles(verts, vec![[0, 1, 2]]).unwrap();
        assert!((m.cells[0].delta - s / 3.0_f64.sqrt()).abs() <= 1e-14);
    }

    #[test]
    fn locate_by_index_arithmetic() {
        let m = build_cartesian(&[1.0, 1.0], &[10, 10]).unwrap();
        assert_eq!(m.locate_cell(Vec3::xy(0.55, 0.55), 0), Location::Cell(5 * 10 + 5));
        assert_eq!(m.locate_cell(Vec3::xy(1.5, 0.5), 0), Location::Outside);
        // Clamp pulls an outside point into the nearest boundary cell.
        assert_eq!(m.locate_clamped(Vec3::xy(1.5, 0.55), 0), 5 * 10 + 9);
    }

    #[test]
    fn locate_face_tie_breaks_to_lower_id() {
        // Power-of-two spacing keeps face coordinates exactly representable.
        let m = build_cartesian(&[1.0, 1.0], &[8, 8]).unwrap();
        // x = 0.25 is the face between cells i=1 and i=2.
        assert_eq!(m.locate_cell(Vec3::xy(0.25, 0.1), 0), Location::Cell(1));
        // Domain corner stays in cell 0.
        assert_eq!(m.locate_cell(Vec3::xy(0.0, 0.0), 0), Location::Cell(0));
        assert_eq!(m.locate_cell(Vec3::xy(1.0, 1.0), 0), Location::Cell(63));
    }

    #[test]
    fn locate_matches_exhaustive_scan() {
        let tri = build_triangular(&[1.0, 1.0], 9).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..500 {
            let p = Vec3::xy(rng.gen::<f64>(), rng.gen::<f64>());
            let hint = rng.gen_range(0..tri.n_cells());
            let walked = tri.locate_cell(p, hint);
            let scanned = (0..tri.n_cells()).find(|&c| tri.tri_contains(c, p));
            assert_eq!(walked, Location::Cell(scanned.expect("point in domain")));
        }
        let cart = build_cartesian(&[1.0, 2.0], &[7, 9]).unwrap();
        for _ in 0..500 {
            let p = Vec3::xy(rng.gen::<f64>(), 2.0 * rng.gen::<f64>());
            let got = cart.locate_cell(p, 0);
            let want = (0..cart.n_cells()).find(|&c| {
                let CellShape::Rectangle { lo, dx, dy } = cart.cell_shape(c) else { panic!() };
                p.x >= lo.x && p.x <= lo.x + dx && p.y >= lo.y && p.y <= lo.y + dy
            });
            assert_eq!(got, Location::Cell(want.unwrap()));
        }
    }

    #[test]
    fn triangle_neighbors_are_symmetric() {
        let m = build_triangular(&[1.0, 1.0], 6).unwrap();
        for (c, cell) in m.cells.iter().enumerate() {
            for &nb in &cell.neighbors {
                if nb != NO_NEIGHBOR {
                    assert!(m.cells[nb].neighbors.contains(&c));
                }
            }
        }
        // Interior triangles have three neighbors; every vertex-neighbor list
        // contains all face-neighbors.
        for (c, cell) in m.cells.iter().enumerate() {
            for &nb in cell.neighbors.iter().filter(|&&n| n != NO_NEIGHBOR) {
                assert!(m.vertex_neighbors(c).contains(&nb));
            }
        }
    }
}
