//! Sliding a nonsmooth maximum along a volume-preserving line until every
//! partially flat tetrahedron is flat.
//!
//! With `W` the flat quads, the direction is `v(q) = Σ_{q'∈W} w(q', q)`:
//! in a tetrahedron with one flat quad it raises the successor and lowers
//! the predecessor of that quad, and it vanishes on flat tetrahedra and on
//! tetrahedra without flat quads. The two moving angles of such a
//! tetrahedron sum to a multiple of π, so `Λ(a) + Λ(b) = 0` along the line
//! and the volume stays put.

use std::f64::consts::PI;

use num_traits::Zero;
use serde::Serialize;

use crate::angles::{constraint_matrix, AnglePoint};
use crate::complex::Triangulation;
use crate::error::{Error, Result};
use crate::exact::{rat, to_f64, Rational};

use super::{partially_flat_not_flat, volume, Classification, VolumeReport};

/// Points sampled along each leg for the volume check.
pub const VOLUME_SAMPLES: usize = 64;
/// Largest allowed volume change along a leg.
pub const VOLUME_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlatteningLeg {
    #[serde(serialize_with = "crate::exact::serde_rational::vec")]
    pub v: Vec<Rational>,
    pub t0: f64,
    pub start: AnglePoint,
    pub end: AnglePoint,
    /// Partially flat, not flat tetrahedra before and after the leg.
    pub n_before: usize,
    pub n_after: usize,
    /// Quads that reached `πZ` at `t0`.
    pub new_flat_quads: Vec<usize>,
    pub max_volume_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlatteningPath {
    pub legs: Vec<FlatteningLeg>,
    pub start: AnglePoint,
    pub end: AnglePoint,
}

/// `Σ_{q'∈flat} w(q', ·)` as an exact vector.
pub fn flattening_direction(tri: &Triangulation, flat: &[usize]) -> Vec<Rational> {
    let mut v = vec![rat(0); tri.num_quads()];
    for &q in flat {
        v[tri.quad_successor(q)] += rat(1);
        v[tri.quad_predecessor(q)] -= rat(1);
    }
    v
}

/// Checks the direction against every tangential constraint, naming the
/// first edge that fails.
fn check_tangential(tri: &Triangulation, v: &[Rational]) -> Result<()> {
    let residual = constraint_matrix(tri).mul_vec(v);
    let n = tri.num_tets();
    if let Some(i) = residual.iter().position(|r| !r.is_zero()) {
        // tetrahedron rows come first and cancel by construction
        return Err(Error::ClaimViolation {
            edge: i.saturating_sub(n),
        });
    }
    Ok(())
}

/// Smallest `t > 0` with `x + t·dv ∈ πZ`.
fn first_hit(x: f64, dv: f64) -> f64 {
    let y = if dv > 0.0 { x } else { -x };
    (PI * (y / PI).floor() + PI - y) / dv.abs()
}

pub fn fg_flatten(tri: &Triangulation, report: &VolumeReport) -> Result<FlatteningPath> {
    let nq = tri.num_quads();
    if report.point.theta.len() != nq {
        return Err(Error::Precondition(format!(
            "expected {nq} angles, got {}",
            report.point.theta.len()
        )));
    }
    if report.classification != Classification::NonsmoothCritical {
        return Err(Error::Precondition(
            "flattening starts from a nonsmooth critical point".into(),
        ));
    }
    let n = tri.num_tets();
    let mut flat: Vec<usize> = report.flat_quads.clone();
    if partially_flat_not_flat(n, &flat).is_empty() {
        return Err(Error::NotApplicable);
    }

    let start = report.point.clone();
    let mut theta = start.theta.clone();
    let mut legs = Vec::new();
    loop {
        let before = partially_flat_not_flat(n, &flat);
        if before.is_empty() {
            break;
        }
        let v = flattening_direction(tri, &flat);
        check_tangential(tri, &v)?;
        let vf: Vec<f64> = v.iter().map(to_f64).collect();

        // closest hit over both directions, ties to positive t
        let mut t0 = f64::INFINITY;
        for q in (0..nq).filter(|q| vf[*q] != 0.0 && !flat.contains(q)) {
            for sign in [1.0, -1.0] {
                let t = sign * first_hit(theta[q], sign * vf[q]);
                if t.abs() < t0.abs() || (t.abs() == t0.abs() && t > t0) {
                    t0 = t;
                }
            }
        }
        if !t0.is_finite() {
            return Err(Error::Precondition(
                "flattening direction moves no quad".into(),
            ));
        }

        let vol0 = volume(&theta);
        let max_volume_deviation = (0..VOLUME_SAMPLES)
            .map(|i| {
                let t = t0 * i as f64 / (VOLUME_SAMPLES - 1) as f64;
                let p: Vec<f64> = theta.iter().zip(&vf).map(|(a, b)| a + t * b).collect();
                (volume(&p) - vol0).abs()
            })
            .fold(0.0, f64::max);

        let mut end: Vec<f64> = theta.iter().zip(&vf).map(|(a, b)| a + t0 * b).collect();
        let tol = 1e-9 * t0.abs().max(1.0);
        let new_flat: Vec<usize> = (0..nq)
            .filter(|q| vf[*q] != 0.0 && !flat.contains(q))
            .filter(|&q| {
                let r = end[q].rem_euclid(PI);
                r.min(PI - r) < tol
            })
            .collect();
        for &q in &new_flat {
            end[q] = (end[q] / PI).round() * PI;
        }
        flat.extend(&new_flat);
        flat.sort_unstable();
        let after = partially_flat_not_flat(n, &flat);
        legs.push(FlatteningLeg {
            v,
            t0,
            start: AnglePoint {
                theta: theta.clone(),
            },
            end: AnglePoint { theta: end.clone() },
            n_before: before.len(),
            n_after: after.len(),
            new_flat_quads: new_flat,
            max_volume_deviation,
        });
        if after.len() >= before.len() {
            return Err(Error::Precondition(
                "leg did not flatten any tetrahedron".into(),
            ));
        }
        theta = end;
    }
    Ok(FlatteningPath {
        legs,
        start,
        end: AnglePoint { theta },
    })
}
