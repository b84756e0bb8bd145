//! Gauss quadrature rules on reference cells and their mapping to mesh cells.
//!
//! All weights are normalized so that `sum(w) = 1`; a rule therefore computes
//! the *average* of the integrand over the cell, and integrals are recovered
//! by multiplying with the cell volume (or face area).

use crate::geom::Vec3;
use crate::mesh::{CellShape, Mesh};

/// Per-axis Gauss-Legendre nodes/weights on [0, 1], weights summing to 1.
pub fn gauss_legendre_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    match n {
        1 => (vec![0.5], vec![1.0]),
        2 => {
            let d = 0.5 / 3.0_f64.sqrt();
            (vec![0.5 - d, 0.5 + d], vec![0.5, 0.5])
        }
        3 => {
            let d = 0.5 * (3.0_f64 / 5.0).sqrt();
            (
                vec![0.5 - d, 0.5, 0.5 + d],
                vec![5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0],
            )
        }
        _ => panic!("unsupported Gauss-Legendre point count {n}"),
    }
}

/// A quadrature rule on a reference cell.
///
/// Reference domains: segment `[0,1]`, square `[0,1]^2`, cube `[0,1]^3`, and
/// the unit right triangle with vertices (0,0), (1,0), (0,1).
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub points: Vec<Vec3>,
    pub weights: Vec<f64>,
    /// Highest total polynomial degree integrated exactly.
    pub degree: usize,
}

impl QuadratureRule {
    fn normalized(points: Vec<Vec3>, weights: Vec<f64>, degree: usize) -> Self {
        let s: f64 = weights.iter().sum();
        let weights = weights.into_iter().map(|w| w / s).collect();
        QuadratureRule { points, weights, degree }
    }

    /// 2-point Gauss rule on the segment [0,1].
    pub fn segment_2() -> Self {
        let (x, w) = gauss_legendre_01(2);
        let points = x.iter().map(|&t| Vec3::new(t, 0.0, 0.0)).collect();
        QuadratureRule::normalized(points, w, 3)
    }

    /// 3x3 tensor Gauss rule on the unit square.
    pub fn rectangle_9() -> Self {
        let (x, w) = gauss_legendre_01(3);
        let mut points = Vec::with_capacity(9);
        let mut weights = Vec::with_capacity(9);
        for (i, &xi) in x.iter().enumerate() {
            for (j, &xj) in x.iter().enumerate() {
                points.push(Vec3::new(xi, xj, 0.0));
                weights.push(w[i] * w[j]);
            }
        }
        QuadratureRule::normalized(points, weights, 5)
    }

    /// 3x3x3 tensor Gauss rule on the unit cube.
    pub fn hexahedron_27() -> Self {
        let (x, w) = gauss_legendre_01(3);
        let mut points = Vec::with_capacity(27);
        let mut weights = Vec::with_capacity(27);
        for (i, &xi) in x.iter().enumerate() {
            for (j, &xj) in x.iter().enumerate() {
                for (k, &xk) in x.iter().enumerate() {
                    points.push(Vec3::new(xi, xj, xk));
                    weights.push(w[i] * w[j] * w[k]);
                }
            }
        }
        QuadratureRule::normalized(points, weights, 5)
    }

    /// 6-point degree-4 rule on the reference triangle.
    pub fn triangle_6() -> Self {
        let a = 0.445_948_490_915_965;
        let wa = 0.223_381_589_678_011;
        let b = 0.091_576_213_509_771;
        let wb = 0.109_951_743_655_322;
        let mut points = Vec::with_capacity(6);
        let mut weights = Vec::with_capacity(6);
        for (c, wc) in [(a, wa), (b, wb)] {
            points.push(Vec3::new(c, c, 0.0));
            points.push(Vec3::new(1.0 - 2.0 * c, c, 0.0));
            points.push(Vec3::new(c, 1.0 - 2.0 * c, 0.0));
            weights.extend_from_slice(&[wc; 3]);
        }
        QuadratureRule::normalized(points, weights, 4)
    }

    /// 12-point degree-6 rule on the reference triangle.
    pub fn triangle_12() -> Self {
        let a1 = 0.063_089_014_491_502;
        let w1 = 0.050_844_906_370_207;
        let a2 = 0.249_286_745_170_910;
        let w2 = 0.116_786_275_726_379;
        let (b1, b2, b3) = (0.636_502_499_121_399, 0.310_352_451_033_785, 0.053_145_049_844_816);
        let w3 = 0.082_851_075_618_374;

        let mut points = Vec::with_capacity(12);
        let mut weights = Vec::with_capacity(12);
        for (c, wc) in [(a1, w1), (a2, w2)] {
            points.push(Vec3::new(c, c, 0.0));
            points.push(Vec3::new(1.0 - 2.0 * c, c, 0.0));
            points.push(Vec3::new(c, 1.0 - 2.0 * c, 0.0));
            weights.extend_from_slice(&[wc; 3]);
        }
        // All six permutations of the asymmetric triple, expressed as (xi, eta)
        // with the third barycentric coordinate implied.
        for (l2, l3) in [(b2, b3), (b3, b2), (b1, b3), (b3, b1), (b1, b2), (b2, b1)] {
            points.push(Vec3::new(l2, l3, 0.0));
            weights.push(w3);
        }
        QuadratureRule::normalized(points, weights, 6)
    }
}

/// Which cell rule to use where a choice exists (triangles only).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleChoice {
    /// 9-pt rectangles, 6-pt triangles, 27-pt hexahedra.
    Default,
    /// As `Default` but 12-pt triangles.
    Gp12Triangle,
}

/// Physical-space quadrature points and normalized weights for one cell.
///
/// 9-pt tensor Gauss on rectangles, 6-pt (or 12-pt) rules on triangles and
/// 27-pt tensor Gauss on hexahedra.
pub fn cell_quadrature(mesh: &Mesh, cell: usize, choice: RuleChoice) -> (Vec<Vec3>, Vec<f64>) {
    match mesh.cell_shape(cell) {
        CellShape::Rectangle { lo, dx, dy } => {
            let rule = QuadratureRule::rectangle_9();
            let points = rule
                .points
                .iter()
                .map(|p| Vec3::new(lo.x + p.x * dx, lo.y + p.y * dy, 0.0))
                .collect();
            (points, rule.weights)
        }
        CellShape::Hexahedron { lo, dx, dy, dz } => {
            let rule = QuadratureRule::hexahedron_27();
            let points = rule
                .points
                .iter()
                .map(|p| Vec3::new(lo.x + p.x * dx, lo.y + p.y * dy, lo.z + p.z * dz))
                .collect();
            (points, rule.weights)
        }
        CellShape::Triangle { v0, v1, v2 } => {
            let rule = match choice {
                RuleChoice::Default => QuadratureRule::triangle_6(),
                RuleChoice::Gp12Triangle => QuadratureRule::triangle_12(),
            };
            let points = rule
                .points
                .iter()
                .map(|p| v0 + (v1 - v0) * p.x + (v2 - v0) * p.y)
                .collect();
            (points, rule.weights)
        }
    }
}
