//! Tangential and circle-valued angle structures.

use std::f64::consts::PI;

use num_bigint::BigInt;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::complex::Triangulation;
use crate::error::{Error, Result};
use crate::exact::{rat, rat_frac, solve_integral, to_f64, QMatrix, Rational};
use crate::nzform::{incidence_matrix, tet_matrix};

/// Congruences are checked to this absolute tolerance.
pub const CONGRUENCE_TOL: f64 = 1e-9;

/// Exact basis of the tangential angle structures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TasBasis {
    #[serde(serialize_with = "crate::exact::serde_rational::vec_vec")]
    pub basis: Vec<Vec<Rational>>,
    pub dim: usize,
}

/// Real arguments over quads, taken mod 2π.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnglePoint {
    pub theta: Vec<f64>,
}

/// Rows: one per tetrahedron (sum of its quads), then one per edge
/// (`i(e, q)`).
pub fn constraint_matrix(tri: &Triangulation) -> QMatrix {
    let mut rows = tet_matrix(tri);
    rows.extend(incidence_matrix(tri));
    QMatrix::from_i64_rows(&rows, tri.num_quads())
}

/// Kernel of the stacked tetrahedron and edge constraints.
pub fn tas_basis(tri: &Triangulation) -> TasBasis {
    let basis = constraint_matrix(tri).kernel();
    TasBasis {
        dim: basis.len(),
        basis,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DimensionCheck {
    pub expected: i64,
    pub actual: usize,
    #[serde(rename = "match")]
    pub matches: bool,
}

/// Compares `dim TAS` with `χ + |T|`.
pub fn dimension_check(tri: &Triangulation) -> DimensionCheck {
    let expected = tri.euler_characteristic() + tri.num_tets() as i64;
    let actual = tas_basis(tri).dim;
    DimensionCheck {
        expected,
        actual,
        matches: expected == actual as i64,
    }
}

/// Representative of `x` mod 2π in `[-π, π)`.
pub fn wrap_pi(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y >= PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Largest deviation from the two congruence families: per-tetrahedron
/// sums against π and per-edge sums against 0, both mod 2π.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CongruenceResidual {
    pub tet: f64,
    pub edge: f64,
}

impl CongruenceResidual {
    pub fn max(&self) -> f64 {
        self.tet.max(self.edge)
    }
}

pub fn congruence_residuals(tri: &Triangulation, theta: &[f64]) -> CongruenceResidual {
    let tet = (0..tri.num_tets())
        .map(|t| wrap_pi(theta[3 * t] + theta[3 * t + 1] + theta[3 * t + 2] - PI).abs())
        .fold(0.0, f64::max);
    let inc = tri.incidence();
    let edge = (0..tri.num_edges())
        .map(|e| {
            let s: f64 = (0..tri.num_quads())
                .map(|q| inc.get(e, q) as f64 * theta[q])
                .sum();
            wrap_pi(s).abs()
        })
        .fold(0.0, f64::max);
    CongruenceResidual { tet, edge }
}

/// The right-hand side in units of π: 1 per tetrahedron, 2 per edge.
fn target_in_pi_units(tri: &Triangulation) -> Vec<Rational> {
    let mut b = vec![rat(1); tri.num_tets()];
    b.extend(std::iter::repeat_n(rat(2), tri.num_edges()));
    b
}

/// Exact solution `φ` (angles in units of π) of `M φ = β + 2k` for some
/// integer vector `k`, trying `k = 0` first.
pub fn sas_init_exact(tri: &Triangulation) -> Result<Vec<Rational>> {
    let m = constraint_matrix(tri);
    let beta = target_in_pi_units(tri);
    if let Some(phi) = m.solve(&beta) {
        return Ok(phi);
    }
    // β + 2k must be orthogonal to the left kernel of M
    let left = m.transpose().kernel();
    let n: Vec<Vec<BigInt>> = left
        .iter()
        .map(|row| row.iter().map(|x| x.to_integer()).collect())
        .collect();
    let rhs: Vec<Rational> = left
        .iter()
        .map(|row| {
            let s: Rational = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
            -s * rat_frac(1, 2)
        })
        .collect();
    let k = solve_integral(&n, beta.len(), &rhs)
        .ok_or_else(|| Error::InitFailure("no integral shift of the edge targets".into()))?;
    let shifted: Vec<Rational> = beta
        .iter()
        .zip(&k)
        .map(|(b, ki)| b + Rational::from_integer(ki * 2))
        .collect();
    m.solve(&shifted)
        .ok_or_else(|| Error::InitFailure("shifted system is inconsistent".into()))
}

/// A point of the circle-valued angle structure space.
pub fn sas_init(tri: &Triangulation) -> Result<AnglePoint> {
    let phi = sas_init_exact(tri)?;
    let theta: Vec<f64> = phi.iter().map(|x| PI * to_f64(x)).collect();
    let res = congruence_residuals(tri, &theta);
    if res.max() >= CONGRUENCE_TOL {
        return Err(Error::InitFailure(format!(
            "initial point misses the congruences by {:e}",
            res.max()
        )));
    }
    Ok(AnglePoint { theta })
}

/// Orthogonal projection onto the tangential angle structures, using an
/// orthonormalised floating-point copy of the exact basis.
#[derive(Debug, Clone)]
pub struct TasProjector {
    onb: Vec<Vec<f64>>,
    dim: usize,
}

impl TasProjector {
    pub fn new(basis: &TasBasis, ambient: usize) -> Self {
        let mut onb: Vec<Vec<f64>> = Vec::new();
        for v in &basis.basis {
            let mut x: Vec<f64> = v.iter().map(to_f64).collect();
            // two passes of modified Gram–Schmidt
            for _ in 0..2 {
                for u in &onb {
                    let c: f64 = x.iter().zip(u).map(|(a, b)| a * b).sum();
                    for (xi, ui) in x.iter_mut().zip(u) {
                        *xi -= c * ui;
                    }
                }
            }
            let n = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            if n > 1e-12 {
                x.iter_mut().for_each(|a| *a /= n);
                onb.push(x);
            }
        }
        TasProjector { onb, dim: ambient }
    }

    pub fn for_triangulation(tri: &Triangulation) -> Self {
        Self::new(&tas_basis(tri), tri.num_quads())
    }

    pub fn project(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for u in &self.onb {
            let c: f64 = g.iter().zip(u).map(|(a, b)| a * b).sum();
            for (o, ui) in out.iter_mut().zip(u) {
                *o += c * ui;
            }
        }
        out
    }

    /// Orthonormal basis vectors.
    pub fn basis(&self) -> &[Vec<f64>] {
        &self.onb
    }

    pub fn rank(&self) -> usize {
        self.onb.len()
    }
}

/// Whether a rational vector satisfies every tangential constraint exactly.
pub fn is_tangential(tri: &Triangulation, v: &[Rational]) -> bool {
    constraint_matrix(tri).mul_vec(v).iter().all(Zero::is_zero)
}
