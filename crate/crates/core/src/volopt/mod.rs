//! Volume of circle-valued angle structures and its maximisation.
//!
//! `vol(θ) = Σ_q Λ(θ(q))`. The gradient `-ln|2 sin θ(q)|` blows up where a
//! quad argument reaches `πZ` (a flat quad); the optimizer treats such
//! quads with an active set: once a quad is snapped onto `πZ` it stays
//! there while the remaining coordinates ascend inside the face, and it is
//! released again when some direction leaving the face increases volume.

pub mod extract;
pub mod flatten;
pub mod lobachevsky;

pub use extract::{classify_and_extract, shapes_from_angles, Extraction, FlatQuadSolutions};
pub use flatten::{fg_flatten, flattening_direction, FlatteningLeg, FlatteningPath};

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::angles::{constraint_matrix, tas_basis, wrap_pi, AnglePoint, TasBasis, TasProjector};
use crate::complex::Triangulation;
use crate::exact::{rat, to_f64, QMatrix, Rational};

use lobachevsky::lobachevsky;

/// Distance to `πZ` below which a quad counts as flat.
pub const EPS_FLAT: f64 = 1e-7;
/// `|sin θ|` below which the logarithm is clamped.
pub const NEAR_SINGULAR_SIN: f64 = 1e-300;
/// Tolerance on finite directional derivatives when classifying.
pub const DIRECTIONAL_TOL: f64 = 1e-6;

const ARMIJO_C: f64 = 1e-4;
const MIN_STEP: f64 = 1e-14;
const SNAP_DIST: f64 = 1e-6;
const STALL_SNAP_DIST: f64 = 1e-3;
const MAX_RELEASES: usize = 25;
const ROUNDING_SLACK: f64 = 1e-14;
/// Largest change of a single angle in one step.
const MAX_MOVE: f64 = 1.0;

pub fn volume(theta: &[f64]) -> f64 {
    theta.iter().map(|&t| lobachevsky(t)).sum()
}

/// Distance from `x` to the nearest multiple of π.
pub fn dist_to_pi_z(x: f64) -> f64 {
    let r = x.rem_euclid(PI);
    r.min(PI - r)
}

pub fn flat_quads(theta: &[f64], eps: f64) -> Vec<usize> {
    (0..theta.len()).filter(|&q| dist_to_pi_z(theta[q]) < eps).collect()
}

/// Tetrahedra with all three quads flat, and with at least one.
pub fn flat_tets(num_tets: usize, flat: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut count = vec![0; num_tets];
    for &q in flat {
        count[q / 3] += 1;
    }
    let all = (0..num_tets).filter(|&t| count[t] == 3).collect();
    let some = (0..num_tets).filter(|&t| count[t] > 0).collect();
    (all, some)
}

/// Partially flat tetrahedra that are not flat.
pub fn partially_flat_not_flat(num_tets: usize, flat: &[usize]) -> Vec<usize> {
    let mut count = vec![0; num_tets];
    for &q in flat {
        count[q / 3] += 1;
    }
    (0..num_tets).filter(|&t| count[t] > 0 && count[t] < 3).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolumeAndGrad {
    pub volume: f64,
    /// `-ln|2 sin θ(q)|`, with `|sin|` clamped below at 1e-300.
    pub grad: Vec<f64>,
    pub near_singular: bool,
}

pub fn volume_and_grad(theta: &[f64]) -> VolumeAndGrad {
    let mut near_singular = false;
    let grad = theta
        .iter()
        .map(|&t| {
            let s = t.sin().abs();
            if s < NEAR_SINGULAR_SIN {
                near_singular = true;
            }
            -(2.0 * s.max(NEAR_SINGULAR_SIN)).ln()
        })
        .collect();
    VolumeAndGrad {
        volume: volume(theta),
        grad,
        near_singular,
    }
}

/// One-sided derivative of `t ↦ vol(θ + t u)` at `t = 0⁺`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Directional {
    PlusInfinity,
    MinusInfinity,
    Finite(f64),
}

impl Serialize for Directional {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Directional::PlusInfinity => s.serialize_str("+inf"),
            Directional::MinusInfinity => s.serialize_str("-inf"),
            Directional::Finite(x) => s.serialize_f64(*x),
        }
    }
}

impl Directional {
    pub fn as_f64(self) -> f64 {
        match self {
            Directional::PlusInfinity => f64::INFINITY,
            Directional::MinusInfinity => f64::NEG_INFINITY,
            Directional::Finite(x) => x,
        }
    }
}

/// Near a flat quad `Λ(kπ + x) ≈ x - x ln|2x|`, so the flat quads
/// contribute `-(Σ_flat u) ln t - Σ_flat u ln|2u|`: divergent unless
/// `Σ_flat u = 0`, in which case what remains is
/// `-Σ_flat u ln|u| - Σ_other u ln|2 sin θ|`.
pub fn directional_derivative(theta: &[f64], u: &[f64], eps_flat: f64) -> Directional {
    let scale = u.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);
    let mut flat_sum = 0.0;
    let mut finite = 0.0;
    for (&t, &uq) in theta.iter().zip(u) {
        if dist_to_pi_z(t) < eps_flat {
            flat_sum += uq;
            if uq != 0.0 {
                finite -= uq * uq.abs().ln();
            }
        } else {
            finite -= uq * (2.0 * t.sin().abs()).ln();
        }
    }
    if flat_sum > 1e-12 * scale {
        Directional::PlusInfinity
    } else if flat_sum < -1e-12 * scale {
        Directional::MinusInfinity
    } else {
        Directional::Finite(finite)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    SmoothCritical,
    NonsmoothCritical,
    NonCritical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeReport {
    pub point: AnglePoint,
    pub volume: f64,
    /// Norm of the gradient projected onto the tangent space of the face
    /// on which the flat quads stay flat (all of TAS when none are flat).
    pub grad_norm_in_tas: f64,
    pub flat_quads: Vec<usize>,
    pub flat_tets: Vec<usize>,
    pub partially_flat_tets: Vec<usize>,
    /// Partially flat tetrahedra that are not flat.
    pub partially_flat_not_flat: Vec<usize>,
    pub classification: Classification,
    pub iterations: usize,
    pub restart: usize,
    pub max_iterations_hit: bool,
    pub near_singular: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaximizeConfig {
    pub restarts: usize,
    pub seed: u64,
    /// Stationarity tolerance on the projected gradient.
    pub tol: f64,
    pub max_iterations: usize,
    pub eps_flat: f64,
}

impl Default for MaximizeConfig {
    fn default() -> Self {
        MaximizeConfig {
            restarts: 20,
            seed: 0,
            tol: 1e-9,
            max_iterations: 10_000,
            eps_flat: EPS_FLAT,
        }
    }
}

/// Tangent spaces of the faces `{θ(q) ∈ πZ, q ∈ F}` of the angle space.
struct FaceCache {
    tri_constraints: QMatrix,
    nq: usize,
    cache: HashMap<Vec<usize>, TasProjector>,
}

impl FaceCache {
    fn new(tri: &Triangulation) -> Self {
        FaceCache {
            tri_constraints: constraint_matrix(tri),
            nq: tri.num_quads(),
            cache: HashMap::new(),
        }
    }

    fn projector(&mut self, fixed: &BTreeSet<usize>) -> &TasProjector {
        let key: Vec<usize> = fixed.iter().copied().collect();
        let nq = self.nq;
        let base = &self.tri_constraints;
        self.cache.entry(key.clone()).or_insert_with(|| {
            let mut rows = base.to_rows();
            for &q in &key {
                let mut e = vec![Rational::zero(); nq];
                e[q] = rat(1);
                rows.push(e);
            }
            let basis = QMatrix::from_rows(rows, nq).kernel();
            TasProjector::new(
                &TasBasis {
                    dim: basis.len(),
                    basis,
                },
                nq,
            )
        })
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Smallest correction `δ` in the span of `onb` with
/// `θ(q) + δ(q) ∈ πZ` for every `q` in `targets`.
fn snap_correction(onb: &[Vec<f64>], theta: &[f64], targets: &[usize]) -> Option<Vec<f64>> {
    if onb.is_empty() || targets.is_empty() {
        return None;
    }
    let rhs: Vec<f64> = targets
        .iter()
        .map(|&q| (theta[q] / PI).round() * PI - theta[q])
        .collect();
    let a = DMatrix::from_fn(targets.len(), onb.len(), |i, j| onb[j][targets[i]]);
    let pinv = a.clone().svd(true, true).pseudo_inverse(1e-12).ok()?;
    let c = pinv * DVector::from_vec(rhs.clone());
    let reached = &a * &c;
    if reached
        .iter()
        .zip(&rhs)
        .any(|(x, r)| (x - r).abs() > 1e-12)
    {
        return None;
    }
    let mut delta = vec![0.0; theta.len()];
    for (j, u) in onb.iter().enumerate() {
        for (d, ui) in delta.iter_mut().zip(u) {
            *d += c[j] * ui;
        }
    }
    Some(delta)
}

/// Newton step for `vol` restricted to `θ + span(onb)`, with the slope
/// `⟨g, step⟩`. The Hessian of `vol` is `diag(-cot θ)`. `None` unless the
/// reduced Hessian is negative definite.
fn newton_direction(onb: &[Vec<f64>], theta: &[f64], g: &[f64]) -> Option<(Vec<f64>, f64)> {
    let k = onb.len();
    if k == 0 {
        return None;
    }
    let curv: Vec<f64> = theta.iter().map(|t| t.cos() / t.sin()).collect();
    // negated reduced Hessian
    let h = DMatrix::from_fn(k, k, |i, j| {
        onb[i].iter().zip(&onb[j]).zip(&curv).map(|((a, b), c)| a * b * c).sum::<f64>()
    });
    if !h.iter().all(|x| x.is_finite()) {
        return None;
    }
    let rhs = DVector::from_fn(k, |i, _| onb[i].iter().zip(g).map(|(a, b)| a * b).sum::<f64>());
    let c = h.cholesky()?.solve(&rhs);
    let mut step = vec![0.0; theta.len()];
    for (j, u) in onb.iter().enumerate() {
        for (s, ui) in step.iter_mut().zip(u) {
            *s += c[j] * ui;
        }
    }
    let slope: f64 = step.iter().zip(g).map(|(a, b)| a * b).sum();
    (slope > 0.0 && slope.is_finite()).then_some((step, slope))
}

/// Result of classifying a point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointClass {
    pub classification: Classification,
    pub flat_quads: Vec<usize>,
    pub grad_norm: f64,
    /// A direction of increase (unit) when the point is not critical.
    pub ascent: Option<Vec<f64>>,
}

/// Exact TAS basis vectors, normalised, used as test directions.
pub fn unit_directions(tas: &TasBasis) -> Vec<Vec<f64>> {
    tas.basis
        .iter()
        .map(|b| {
            let v: Vec<f64> = b.iter().map(to_f64).collect();
            let n = norm(&v);
            v.into_iter().map(|x| x / n).collect()
        })
        .collect()
}

/// Quads on which some tangential direction is nonzero. The others keep
/// their argument on all of the angle space.
pub fn movable_quads(tas: &TasBasis) -> Vec<usize> {
    let n = tas.basis.first().map_or(0, Vec::len);
    (0..n)
        .filter(|&q| tas.basis.iter().any(|b| !b[q].is_zero()))
        .collect()
}

/// Optimizer state shared by all restarts.
pub struct VolumeMaximizer<'a> {
    tri: &'a Triangulation,
    tas: TasBasis,
    projector: TasProjector,
    directions: Vec<Vec<f64>>,
    config: MaximizeConfig,
}

/// Volume after each accepted step of one restart.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub restart: usize,
    pub volumes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaximizeOutcome {
    pub report: VolumeReport,
    pub trajectory: Trajectory,
    /// Best volume of every restart, in restart order.
    pub restart_volumes: Vec<f64>,
}

impl<'a> VolumeMaximizer<'a> {
    pub fn new(tri: &'a Triangulation, config: MaximizeConfig) -> Self {
        let tas = tas_basis(tri);
        let projector = TasProjector::new(&tas, tri.num_quads());
        let directions = unit_directions(&tas);
        VolumeMaximizer {
            tri,
            tas,
            projector,
            directions,
            config,
        }
    }

    pub fn tas(&self) -> &TasBasis {
        &self.tas
    }

    pub fn projector(&self) -> &TasProjector {
        &self.projector
    }

    /// Classifies `theta` by the smooth and nonsmooth criticality rules.
    pub fn classify(&self, theta: &[f64]) -> PointClass {
        let eps = self.config.eps_flat;
        let flat = flat_quads(theta, eps);
        let vg = volume_and_grad(theta);
        if flat.is_empty() {
            let d = self.projector.project(&vg.grad);
            let gn = norm(&d);
            let critical = gn < self.config.tol;
            return PointClass {
                classification: if critical {
                    Classification::SmoothCritical
                } else {
                    Classification::NonCritical
                },
                flat_quads: flat,
                grad_norm: gn,
                ascent: (!critical).then(|| d.iter().map(|x| x / gn).collect()),
            };
        }
        let mut faces = FaceCache::new(self.tri);
        let fixed: BTreeSet<usize> = flat.iter().copied().collect();
        let mut g = vg.grad.clone();
        for &q in &flat {
            g[q] = 0.0;
        }
        let gn = norm(&faces.projector(&fixed).project(&g));

        let mut best: Option<(f64, Vec<f64>)> = None;
        for u in &self.directions {
            for sign in [1.0, -1.0] {
                let dir: Vec<f64> = u.iter().map(|x| sign * x).collect();
                let d = directional_derivative(theta, &dir, eps).as_f64();
                if d > DIRECTIONAL_TOL && best.as_ref().is_none_or(|(b, _)| d > *b) {
                    best = Some((d, dir));
                }
            }
        }
        PointClass {
            classification: if best.is_none() {
                Classification::NonsmoothCritical
            } else {
                Classification::NonCritical
            },
            flat_quads: flat,
            grad_norm: gn,
            ascent: best.map(|(_, d)| d),
        }
    }

    /// Start point of restart `index`: restart 0 is `theta0`, the others
    /// add a random tangential vector.
    pub fn start_point(&self, theta0: &[f64], index: usize) -> Vec<f64> {
        if index == 0 {
            return theta0.to_vec();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed.wrapping_add(index as u64));
        let mut theta = theta0.to_vec();
        for u in self.projector.basis() {
            let c: f64 = rng.gen_range(-PI..PI);
            for (t, ui) in theta.iter_mut().zip(u) {
                *t += c * ui;
            }
        }
        theta
    }

    fn report(&self, theta: Vec<f64>, iterations: usize, restart: usize, max_hit: bool) -> VolumeReport {
        let class = self.classify(&theta);
        let n = self.tri.num_tets();
        let (flat_tets, partially) = flat_tets(n, &class.flat_quads);
        let vg = volume_and_grad(&theta);
        VolumeReport {
            volume: vg.volume,
            grad_norm_in_tas: class.grad_norm,
            partially_flat_not_flat: partially_flat_not_flat(n, &class.flat_quads),
            flat_quads: class.flat_quads,
            flat_tets,
            partially_flat_tets: partially,
            classification: class.classification,
            iterations,
            restart,
            max_iterations_hit: max_hit,
            near_singular: vg.near_singular,
            point: AnglePoint { theta },
        }
    }

    /// Projected gradient ascent from one start point.
    pub fn ascend(&self, start: Vec<f64>, restart: usize) -> (VolumeReport, Trajectory) {
        let mut faces = FaceCache::new(self.tri);
        let mut theta = start;
        let mut vol = volume(&theta);
        let mut fixed: BTreeSet<usize> = BTreeSet::new();
        let mut volumes = vec![vol];
        let mut releases = 0;
        let mut iterations = 0;
        let mut max_hit = true;

        while iterations < self.config.max_iterations {
            iterations += 1;
            let mut g = volume_and_grad(&theta).grad;
            for &q in &fixed {
                g[q] = 0.0;
            }
            let d = faces.projector(&fixed).project(&g);
            let gn = norm(&d);

            if gn < self.config.tol {
                if self.try_snap(&mut faces, &mut theta, &mut vol, &mut fixed, self.config.eps_flat.max(SNAP_DIST)) {
                    volumes.push(vol);
                    continue;
                }
                let class = self.classify(&theta);
                match class.ascent {
                    Some(dir) if releases < MAX_RELEASES => {
                        releases += 1;
                        if self.release(&mut theta, &mut vol, &dir) {
                            fixed.clear();
                            volumes.push(vol);
                            continue;
                        }
                        max_hit = false;
                        break;
                    }
                    _ => {
                        max_hit = false;
                        break;
                    }
                }
            }

            let onb = faces.projector(&fixed).basis().to_vec();
            let (step, slope) = match newton_direction(&onb, &theta, &g) {
                Some(n) => n,
                None => (d.clone(), gn * gn),
            };
            // the clamped gradient near πZ is huge; keep steps local
            let longest = step.iter().fold(0.0, |m: f64, x| m.max(x.abs()));
            let mut alpha = if longest > MAX_MOVE { MAX_MOVE / longest } else { 1.0 };
            let full = alpha;
            let mut accepted = false;
            while alpha >= MIN_STEP {
                let trial: Vec<f64> = theta.iter().zip(&step).map(|(t, si)| t + alpha * si).collect();
                if trial == theta {
                    break;
                }
                let v = volume(&trial);
                // close to a maximum the gain drops below rounding; a full
                // step that shrinks the projected gradient is still progress
                let settles = alpha == full
                    && v >= vol - ROUNDING_SLACK * vol.abs().max(1.0)
                    && self.projected_norm(&mut faces, &fixed, &trial) < gn;
                if v >= vol + ARMIJO_C * alpha * slope || settles {
                    theta = trial;
                    vol = v.max(vol);
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if accepted {
                theta.iter_mut().for_each(|t| *t = wrap_pi(*t));
                self.try_snap(&mut faces, &mut theta, &mut vol, &mut fixed, SNAP_DIST);
                volumes.push(vol);
                continue;
            }
            // stalled: the obstruction is usually a quad close to πZ
            if self.try_snap(&mut faces, &mut theta, &mut vol, &mut fixed, STALL_SNAP_DIST) {
                volumes.push(vol);
                continue;
            }
            max_hit = false;
            break;
        }
        (
            self.report(theta, iterations, restart, max_hit),
            Trajectory { restart, volumes },
        )
    }

    fn projected_norm(&self, faces: &mut FaceCache, fixed: &BTreeSet<usize>, theta: &[f64]) -> f64 {
        let mut g = volume_and_grad(theta).grad;
        for &q in fixed {
            g[q] = 0.0;
        }
        norm(&faces.projector(fixed).project(&g))
    }

    /// Moves quads within `dist` of `πZ` onto it, keeping already fixed
    /// quads in place, if that does not lose volume.
    fn try_snap(
        &self,
        faces: &mut FaceCache,
        theta: &mut Vec<f64>,
        vol: &mut f64,
        fixed: &mut BTreeSet<usize>,
        dist: f64,
    ) -> bool {
        let new: Vec<usize> = (0..theta.len())
            .filter(|q| !fixed.contains(q) && dist_to_pi_z(theta[*q]) < dist)
            .collect();
        if new.is_empty() {
            return false;
        }
        let onb = faces.projector(fixed).basis().to_vec();
        let Some(delta) = snap_correction(&onb, theta, &new) else {
            return false;
        };
        let mut trial: Vec<f64> = theta.iter().zip(&delta).map(|(t, d)| t + d).collect();
        for &q in &new {
            trial[q] = (trial[q] / PI).round() * PI;
        }
        let v = volume(&trial);
        if v + 1e-13 < *vol {
            return false;
        }
        *theta = trial;
        *vol = v;
        fixed.extend(new);
        true
    }

    /// Leaves the current face along `dir`, accepting the first step that
    /// increases volume.
    fn release(&self, theta: &mut Vec<f64>, vol: &mut f64, dir: &[f64]) -> bool {
        let mut alpha = 0.1;
        while alpha >= MIN_STEP {
            let trial: Vec<f64> = theta.iter().zip(dir).map(|(t, d)| t + alpha * d).collect();
            let v = volume(&trial);
            if v > *vol {
                *theta = trial;
                *vol = v;
                return true;
            }
            alpha *= 0.5;
        }
        false
    }

    /// Multi-start ascent; the best restart wins, ties to the lowest index.
    pub fn maximize(&self, theta0: &[f64]) -> MaximizeOutcome {
        let runs: Vec<(VolumeReport, Trajectory)> = (0..self.config.restarts.max(1))
            .into_par_iter()
            .map(|i| self.ascend(self.start_point(theta0, i), i))
            .collect();
        let restart_volumes = runs.iter().map(|(r, _)| r.volume).collect();
        let mut best = 0;
        for (i, (r, _)) in runs.iter().enumerate() {
            if r.volume > runs[best].0.volume + 1e-12 {
                best = i;
            }
        }
        let (report, trajectory) = runs.into_iter().nth(best).expect("at least one restart");
        MaximizeOutcome {
            report,
            trajectory,
            restart_volumes,
        }
    }
}

/// Convenience wrapper: maximise from `theta0` with `config`.
pub fn maximize(tri: &Triangulation, theta0: &AnglePoint, config: MaximizeConfig) -> MaximizeOutcome {
    VolumeMaximizer::new(tri, config).maximize(&theta0.theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angles::{congruence_residuals, sas_init};
    use crate::complex::{fixture, FIXTURE_NAMES};

    fn random_smooth_point(tri: &Triangulation, m: &VolumeMaximizer, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let theta0 = sas_init(tri).unwrap().theta;
        let moving = movable_quads(m.tas());
        loop {
            let mut theta = theta0.clone();
            for u in m.projector().basis() {
                let c: f64 = rng.gen_range(-PI..PI);
                for (t, ui) in theta.iter_mut().zip(u) {
                    *t += c * ui;
                }
            }
            if moving.iter().all(|&q| dist_to_pi_z(theta[q]) > 0.05) {
                return theta;
            }
        }
    }

    #[test]
    fn fig8_regular_volume() {
        let theta = vec![PI / 3.0; 6];
        assert!((volume(&theta) - 2.029_883_212_819_307_25).abs() < 1e-13);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for name in FIXTURE_NAMES {
            let t = fixture(name).unwrap();
            let m = VolumeMaximizer::new(&t, MaximizeConfig::default());
            for _ in 0..20 {
                let theta = random_smooth_point(&t, &m, &mut rng);
                let g = volume_and_grad(&theta).grad;
                for u in unit_directions(m.tas()) {
                    let h = 1e-5;
                    let plus: Vec<f64> = theta.iter().zip(&u).map(|(a, b)| a + h * b).collect();
                    let minus: Vec<f64> = theta.iter().zip(&u).map(|(a, b)| a - h * b).collect();
                    let fd = (volume(&plus) - volume(&minus)) / (2.0 * h);
                    let an: f64 = g.iter().zip(&u).map(|(a, b)| a * b).sum();
                    assert!((fd - an).abs() < 1e-6, "{name}: {fd} vs {an}");
                }
            }
        }
    }

    #[test]
    fn divergent_directional_derivative() {
        // θ(0) = 0 and u(0) > 0: the flat sum is positive
        let theta = [0.0, 1.0, PI - 1.0];
        let u = [1.0, -0.5, -0.5];
        assert_eq!(directional_derivative(&theta, &u, EPS_FLAT), Directional::PlusInfinity);
        let neg: Vec<f64> = u.iter().map(|x| -x).collect();
        assert_eq!(directional_derivative(&theta, &neg, EPS_FLAT), Directional::MinusInfinity);
        // one-dimensional check of the limit: Λ(t u)/t grows like -u ln t
        let small = [1e-6, 1e-9];
        let q: Vec<f64> = small.iter().map(|&t| lobachevsky(t) / t).collect();
        assert!(q[1] > q[0]);
    }

    #[test]
    fn finite_directional_derivative_with_balanced_flat_part() {
        let theta = [0.0, 0.0, PI, 0.7, 1.1, PI - 1.8];
        let u = [0.5, -0.5, 0.0, 0.2, -0.1, -0.1];
        let d = directional_derivative(&theta, &u, EPS_FLAT);
        let h = 1e-7;
        let moved: Vec<f64> = theta.iter().zip(&u).map(|(a, b)| a + h * b).collect();
        let fd = (volume(&moved) - volume(&theta)) / h;
        match d {
            Directional::Finite(x) => assert!((x - fd).abs() < 1e-5, "{x} vs {fd}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fig8_maximum() {
        let t = fixture("fig8").unwrap();
        let theta0 = sas_init(&t).unwrap();
        let out = maximize(&t, &theta0, MaximizeConfig::default());
        let r = &out.report;
        assert!((r.volume - 2.029_883_212_819_307_25).abs() < 1e-6, "{r:?}");
        assert_eq!(r.classification, Classification::SmoothCritical);
        for &x in &r.point.theta {
            assert!(dist_to_pi_z(x - PI / 3.0) < 1e-5);
        }
    }

    #[test]
    fn start_at_critical_point_takes_no_productive_step() {
        let t = fixture("fig8").unwrap();
        let m = VolumeMaximizer::new(&t, MaximizeConfig::default());
        let (r, traj) = m.ascend(vec![PI / 3.0; 6], 0);
        assert_eq!(r.classification, Classification::SmoothCritical);
        assert_eq!(traj.volumes.len(), 1);
    }

    #[test]
    fn ascent_is_monotone_and_deterministic() {
        for name in FIXTURE_NAMES {
            let t = fixture(name).unwrap();
            let config = MaximizeConfig {
                restarts: 6,
                seed: 9,
                ..MaximizeConfig::default()
            };
            let m = VolumeMaximizer::new(&t, config);
            let theta0 = sas_init(&t).unwrap().theta;
            for i in 0..6 {
                let start = m.start_point(&theta0, i);
                let (r, traj) = m.ascend(start.clone(), i);
                assert!(r.volume >= volume(&start) - 1e-12, "{name} restart {i}");
                assert!(traj.volumes.windows(2).all(|w| w[1] >= w[0] - 1e-13));
                assert!(congruence_residuals(&t, &r.point.theta).max() < 1e-9);
            }
            let a = m.maximize(&theta0);
            let b = m.maximize(&theta0);
            assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        }
    }
}
