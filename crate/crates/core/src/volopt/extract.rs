//! Turning critical points of the volume into gluing data: shapes at a
//! smooth critical point, two-quad normal solutions at a nonsmooth one.

use num_complex::Complex64;
use serde::Serialize;

use crate::complex::Triangulation;
use crate::error::{Error, Result};
use crate::haken::{Cluster, Haken, TwoQuadSolution};
use crate::thurston::{residuals, Mode, ResidualReport, ShapeAssignment};

use super::{Classification, VolumeReport};

/// Generalized edge residuals above this make a smooth extraction fail.
pub const EXTRACTION_TOL: f64 = 1e-6;

/// `z(q) = sin θ(q⁺) / sin θ(q⁻) · e^{iθ(q)}`, where `q⁻ → q → q⁺` in the
/// cyclic order of the tetrahedron. With this ratio the three shapes of a
/// tetrahedron satisfy `z(q⁺) = 1/(1 - z(q))` whenever the angles sum to π.
pub fn shapes_from_angles(tri: &Triangulation, theta: &[f64]) -> ShapeAssignment {
    let z = (0..tri.num_quads())
        .map(|q| {
            let ratio = theta[tri.quad_successor(q)].sin() / theta[tri.quad_predecessor(q)].sin();
            Complex64::from_polar(ratio, theta[q])
        })
        .collect();
    ShapeAssignment::new(z)
}

/// Two-quad solutions found for one flat quad.
#[derive(Debug, Clone, Serialize)]
pub struct FlatQuadSolutions {
    pub quad: usize,
    pub solutions: Vec<TwoQuadSolution>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Extraction {
    Smooth {
        shapes: ShapeAssignment,
        strict: ResidualReport,
        generalized: ResidualReport,
    },
    Nonsmooth {
        per_flat_quad: Vec<FlatQuadSolutions>,
        /// Cluster records for tetrahedra with all three quads flat.
        clusters: Vec<Cluster>,
    },
}

pub fn classify_and_extract(tri: &Triangulation, report: &VolumeReport) -> Result<Extraction> {
    if report.point.theta.len() != tri.num_quads() {
        return Err(Error::Precondition(format!(
            "expected {} angles, got {}",
            tri.num_quads(),
            report.point.theta.len()
        )));
    }
    match report.classification {
        Classification::SmoothCritical => {
            let shapes = shapes_from_angles(tri, &report.point.theta);
            let strict = residuals(tri, &shapes, Mode::Strict)?;
            let generalized = residuals(tri, &shapes, Mode::Generalized)?;
            if generalized.max_edge_residual > EXTRACTION_TOL {
                return Err(Error::ExtractionMismatch {
                    residual: generalized.max_edge_residual,
                });
            }
            Ok(Extraction::Smooth {
                shapes,
                strict,
                generalized,
            })
        }
        Classification::NonsmoothCritical => {
            if report.flat_quads.is_empty() {
                return Err(Error::Precondition(
                    "nonsmooth critical point without flat quads".into(),
                ));
            }
            if let Some(&q) = report.flat_quads.iter().find(|&&q| q >= tri.num_quads()) {
                return Err(Error::Precondition(format!("flat quad {q} out of range")));
            }
            let haken = Haken::new(tri);
            let per_flat_quad = report
                .flat_quads
                .iter()
                .map(|&q| FlatQuadSolutions {
                    quad: q,
                    solutions: haken.two_quad_search(q),
                })
                .collect();
            let clusters = if report.flat_tets.is_empty() {
                Vec::new()
            } else {
                haken
                    .cluster_search()
                    .into_iter()
                    .filter(|c| report.flat_tets.contains(&c.tet))
                    .collect()
            };
            Ok(Extraction::Nonsmooth {
                per_flat_quad,
                clusters,
            })
        }
        Classification::NonCritical => Err(Error::Precondition(
            "point is not critical; nothing to extract".into(),
        )),
    }
}
