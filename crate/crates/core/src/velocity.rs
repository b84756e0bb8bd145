//! Benchmark velocity fields and initial interface shapes.
//!
//! All four fields are analytic, divergence-free and separable in time
//! (a spatial profile times a scalar time factor), which the transport module
//! exploits to precompute face fluxes.

use crate::geom::Vec3;
use crate::mesh::{CellShape, Mesh};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseId {
    /// Slotted disk in rigid rotation; one revolution is t in [0, 2 pi].
    Zalesak,
    /// Single-vortex shear of a circle, period T = 8.
    Vortex2d,
    /// 3D deformation of a sphere, period T = 3.
    Deform3d,
    /// 3D shear of a sphere in a [1, 1, 2] cuboid, period T = 3.
    Shear3d,
}

impl CaseId {
    pub fn parse(s: &str) -> Result<CaseId> {
        match s {
            "zalesak" => Ok(CaseId::Zalesak),
            "vortex2d" => Ok(CaseId::Vortex2d),
            "deform3d" => Ok(CaseId::Deform3d),
            "shear3d" => Ok(CaseId::Shear3d),
            other => Err(Error::Config(format!(
                "unknown case '{other}' (expected zalesak|vortex2d|deform3d|shear3d)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CaseId::Zalesak => "zalesak",
            CaseId::Vortex2d => "vortex2d",
            CaseId::Deform3d => "deform3d",
            CaseId::Shear3d => "shear3d",
        }
    }
}

/// A velocity field of the form `u(x, t) = time_factor(t) * profile(x)`.
pub trait VelocityField {
    fn profile(&self, x: Vec3) -> Vec3;

    fn time_factor(&self, _t: f64) -> f64 {
        1.0
    }

    fn at(&self, x: Vec3, t: f64) -> Vec3 {
        self.profile(x) * self.time_factor(t)
    }

    /// Whether the analytic divergence vanishes identically.
    fn is_divergence_free(&self) -> bool {
        false
    }
}

/// One configured benchmark: velocity field plus initial interface shape.
#[derive(Clone, Copy, Debug)]
pub struct BenchmarkCase {
    pub id: CaseId,
    pub center: Vec3,
    pub radius: f64,
    /// Slot half-width and top coordinate (slotted disk only).
    pub slot: Option<(f64, f64)>,
}

impl BenchmarkCase {
    pub fn new(id: CaseId) -> Self {
        match id {
            CaseId::Zalesak => BenchmarkCase {
                id,
                center: Vec3::xy(0.5, 0.75),
                radius: 0.15,
                slot: Some((0.025, 0.85)),
            },
            CaseId::Vortex2d => {
                BenchmarkCase { id, center: Vec3::xy(0.5, 0.75), radius: 0.15, slot: None }
            }
            CaseId::Deform3d => {
                BenchmarkCase { id, center: Vec3::new(0.35, 0.35, 0.35), radius: 0.15, slot: None }
            }
            CaseId::Shear3d => {
                BenchmarkCase { id, center: Vec3::new(0.5, 0.75, 0.5), radius: 0.15, slot: None }
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self.id {
            CaseId::Zalesak | CaseId::Vortex2d => 2,
            CaseId::Deform3d | CaseId::Shear3d => 3,
        }
    }

    pub fn domain_extents(&self) -> Vec<f64> {
        match self.id {
            CaseId::Zalesak | CaseId::Vortex2d => vec![1.0, 1.0],
            CaseId::Deform3d => vec![1.0, 1.0, 1.0],
            CaseId::Shear3d => vec![1.0, 1.0, 2.0],
        }
    }

    /// Cartesian cell counts for resolution `n`; the shear cuboid takes `n`
    /// cells in x and y and `2n` in z.
    pub fn mesh_counts(&self, n: usize) -> Vec<usize> {
        match self.id {
            CaseId::Zalesak | CaseId::Vortex2d => vec![n, n],
            CaseId::Deform3d => vec![n, n, n],
            CaseId::Shear3d => vec![n, n, 2 * n],
        }
    }

    /// Duration of one period (one revolution for the rotating disk).
    pub fn period(&self) -> f64 {
        match self.id {
            CaseId::Zalesak => 2.0 * PI,
            CaseId::Vortex2d => 8.0,
            CaseId::Deform3d | CaseId::Shear3d => 3.0,
        }
    }

    pub fn default_cfl(&self) -> f64 {
        if self.dim() == 2 {
            0.25
        } else {
            0.1
        }
    }

    /// Signed distance to the initial interface, positive inside the body.
    pub fn initial_level_set(&self, p: Vec3) -> f64 {
        let circle = self.radius - (p - self.center).norm();
        match self.slot {
            None => circle,
            Some((half_width, top)) => {
                // Disk minus slot: intersect the disk with the slot complement.
                circle.min(-slot_signed_distance(p, self.center.x, half_width, top))
            }
        }
    }
}

/// Signed distance to the semi-infinite slot `|x - cx| <= w && y <= top`,
/// positive inside the slot.
fn slot_signed_distance(p: Vec3, cx: f64, w: f64, top: f64) -> f64 {
    let dx = (p.x - cx).abs() - w;
    let dy = p.y - top;
    if dx <= 0.0 && dy <= 0.0 {
        -dx.max(dy)
    } else {
        -(dx.max(0.0).hypot(dy.max(0.0)))
    }
}

impl VelocityField for BenchmarkCase {
    fn profile(&self, p: Vec3) -> Vec3 {
        match self.id {
            CaseId::Zalesak => Vec3::xy(p.y - 0.5, 0.5 - p.x),
            CaseId::Vortex2d => {
                // Stream function (1/pi) sin^2(pi x) sin^2(pi y), with
                // u = dPsi/dy and v = -dPsi/dx.
                let sx = (PI * p.x).sin();
                let sy = (PI * p.y).sin();
                Vec3::xy(
                    sx * sx * (2.0 * PI * p.y).sin(),
                    -(2.0 * PI * p.x).sin() * sy * sy,
                )
            }
            CaseId::Deform3d => {
                let (sx, sy, sz) = ((PI * p.x).sin(), (PI * p.y).sin(), (PI * p.z).sin());
                let (s2x, s2y, s2z) = (
                    (2.0 * PI * p.x).sin(),
                    (2.0 * PI * p.y).sin(),
                    (2.0 * PI * p.z).sin(),
                );
                Vec3::new(
                    2.0 * sx * sx * s2y * s2z,
                    -s2x * sy * sy * s2z,
                    -s2x * s2y * sz * sz,
                )
            }
            CaseId::Shear3d => {
                let (sx, sy) = ((PI * p.x).sin(), (PI * p.y).sin());
                let r = (p.x - 0.5).hypot(p.y - 0.5);
                let w = 1.0 - 2.0 * r;
                Vec3::new(
                    sx * sx * (2.0 * PI * p.y).sin(),
                    -(2.0 * PI * p.x).sin() * sy * sy,
                    w * w,
                )
            }
        }
    }

    fn time_factor(&self, t: f64) -> f64 {
        match self.id {
            CaseId::Zalesak => 1.0,
            _ => (PI * t / self.period()).cos(),
        }
    }

    fn is_divergence_free(&self) -> bool {
        true
    }
}

/// Evaluate a benchmark velocity field (dispatch helper for the CLI).
pub fn velocity_at(case: &BenchmarkCase, x: Vec3, t: f64) -> Vec3 {
    case.at(x, t)
}

// ---------------------------------------------------------------------------
// Initial fields
// ---------------------------------------------------------------------------

/// Subdivision depth of the sharp-Heaviside cell integrator.
pub const SUBDIVISION_DEPTH: usize = 6;

/// Build the initial VOF and level-set fields on `mesh`.
///
/// The level set is the analytic signed distance at centroids; the volume
/// fraction is the cell average of the exact sharp Heaviside, integrated by
/// recursive cell subdivision, so the initial mass is geometry-exact rather
/// than tanh-smoothed.
pub fn initial_fields(case: &BenchmarkCase, mesh: &Mesh) -> Result<(Vec<f64>, Vec<f64>)> {
    let r = case.radius;
    let c = case.center;
    let inside = |lo: Vec3, hi: Vec3| {
        c.x - r >= lo.x
            && c.x + r <= hi.x
            && c.y - r >= lo.y
            && c.y + r <= hi.y
            && (mesh.dim == 2 || (c.z - r >= lo.z && c.z + r <= hi.z))
    };
    if !inside(mesh.lo, mesh.hi) {
        return Err(Error::Config(format!(
            "initial shape of case '{}' exceeds the mesh domain",
            case.id.name()
        )));
    }
    let sdf = |p: Vec3| case.initial_level_set(p);
    let phi: Vec<f64> = mesh.cells.iter().map(|cell| sdf(cell.centroid)).collect();
    let h_bar: Vec<f64> = (0..mesh.n_cells())
        .map(|i| sharp_heaviside_average(mesh.cell_shape(i), &sdf, SUBDIVISION_DEPTH))
        .collect();
    Ok((h_bar, phi))
}

/// Cell average of the sharp Heaviside of a signed-distance function, by
/// recursive subdivision. Cells whose center is farther from the interface
/// than their circumradius are classified whole; ambiguous leaves get a
/// planar-interface volume fraction.
pub fn sharp_heaviside_average(shape: CellShape, sdf: &dyn Fn(Vec3) -> f64, depth: usize) -> f64 {
    match shape {
        CellShape::Rectangle { lo, dx, dy } => {
            let center = Vec3::new(lo.x + 0.5 * dx, lo.y + 0.5 * dy, 0.0);
            let d = sdf(center);
            if d.abs() >= 0.5 * dx.hypot(dy) {
                return if d > 0.0 { 1.0 } else { 0.0 };
            }
            if depth == 0 {
                return (0.5 + d / dx.min(dy)).clamp(0.0, 1.0);
            }
            let (hx, hy) = (0.5 * dx, 0.5 * dy);
            let mut sum = 0.0;
            for (ox, oy) in [(0.0, 0.0), (hx, 0.0), (0.0, hy), (hx, hy)] {
                let sub = CellShape::Rectangle {
                    lo: Vec3::new(lo.x + ox, lo.y + oy, 0.0),
                    dx: hx,
                    dy: hy,
                };
                sum += sharp_heaviside_average(sub, sdf, depth - 1);
            }
            sum / 4.0
        }
        CellShape::Hexahedron { lo, dx, dy, dz } => {
            let center = Vec3::new(lo.x + 0.5 * dx, lo.y + 0.5 * dy, lo.z + 0.5 * dz);
            let d = sdf(center);
            if d.abs() >= 0.5 * (dx * dx + dy * dy + dz * dz).sqrt() {
                return if d > 0.0 { 1.0 } else { 0.0 };
            }
            if depth == 0 {
                return (0.5 + d / dx.min(dy).min(dz)).clamp(0.0, 1.0);
            }
            let (hx, hy, hz) = (0.5 * dx, 0.5 * dy, 0.5 * dz);
            let mut sum = 0.0;
            for oct in 0..8 {
                let sub = CellShape::Hexahedron {
                    lo: Vec3::new(
                        lo.x + hx * (oct & 1) as f64,
                        lo.y + hy * ((oct >> 1) & 1) as f64,
                        lo.z + hz * ((oct >> 2) & 1) as f64,
                    ),
                    dx: hx,
                    dy: hy,
                    dz: hz,
                };
                sum += sharp_heaviside_average(sub, sdf, depth - 1);
            }
            sum / 8.0
        }
        CellShape::Triangle { v0, v1, v2 } => {
            let center = (v0 + v1 + v2).scale(1.0 / 3.0);
            let circum = (v0 - center)
                .norm()
                .max((v1 - center).norm())
                .max((v2 - center).norm());
            let d = sdf(center);
            if d.abs() >= circum {
                return if d > 0.0 { 1.0 } else { 0.0 };
            }
            if depth == 0 {
                let area = 0.5 * (v1 - v0).cross(v2 - v0).norm();
                return (0.5 + d / (2.0 * area).sqrt()).clamp(0.0, 1.0);
            }
            let (m01, m12, m20) =
                ((v0 + v1).scale(0.5), (v1 + v2).scale(0.5), (v2 + v0).scale(0.5));
            let subs = [
                CellShape::Triangle { v0, v1: m01, v2: m20 },
                CellShape::Triangle { v0: m01, v1, v2: m12 },
                CellShape::Triangle { v0: m20, v1: m12, v2 },
                CellShape::Triangle { v0: m01, v1: m12, v2: m20 },
            ];
            subs.iter().map(|s| sharp_heaviside_average(*s, sdf, depth - 1)).sum::<f64>() / 4.0
        }
    }
}
