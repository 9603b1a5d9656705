//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spine3::angles::{congruence_residuals, dimension_check, is_tangential, sas_init};
use spine3::complex::FIXTURE_NAMES;
use spine3::exact::QMatrix;
use spine3::haken::{solution_bases, Haken};
use spine3::nzform::selftest;
use spine3::thurston::{residuals, Mode};
use spine3::volopt::lobachevsky::{lobachevsky, lobachevsky_quadrature};
use spine3::volopt::{
    classify_and_extract, fg_flatten, maximize, movable_quads, unit_directions, volume, volume_and_grad,
    Classification, Extraction, MaximizeConfig, VolumeMaximizer, VolumeReport,
};
use spine3::z2taut::{enumerate_taut, verify_quadratic_equiv};
use spine3::{fixture, Error, GluingSpec, Triangulation};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn fixtures() -> Vec<(String, Triangulation)> {
    FIXTURE_NAMES
        .iter()
        .map(|n| (n.to_string(), fixture(n).unwrap()))
        .collect()
}

/// Fixtures plus `count` random orientable specs with at most `max_tets`
/// tetrahedra.
fn corpus(seed: u64, count: usize, max_tets: usize) -> Vec<(String, Triangulation)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = fixtures();
    for i in 0..count {
        let tets = rng.gen_range(1..=max_tets);
        let t = Triangulation::new(GluingSpec::random_orientable(&mut rng, tets)).unwrap();
        out.push((format!("random#{i}({tets} tets)"), t));
    }
    out
}

fn identity_suite() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let specs = corpus(1, 50, 6);
    for (name, t) in &specs {
        let r = selftest(t);
        if !r.all_pass() {
            failures.push(name.clone());
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures.is_empty() && elapsed < Duration::from_secs(30),
        format!("{} triangulations, failures {failures:?}, {elapsed:.2?}", specs.len()),
    )
}

fn duality() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let specs = corpus(1, 50, 6);
    for (name, t) in &specs {
        match solution_bases(t) {
            Ok(b) if b.duality.holds => {}
            _ => failures.push(name.clone()),
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures.is_empty() && elapsed < Duration::from_secs(30),
        format!("{} triangulations, failures {failures:?}, {elapsed:.2?}", specs.len()),
    )
}

fn dimension() -> Outcome {
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    let specs = corpus(1, 50, 6);
    for (name, t) in &specs {
        let d = dimension_check(t);
        let init = sas_init(t);
        match init {
            Ok(p) if d.matches => {
                let r = congruence_residuals(t, &p.theta).max();
                worst = worst.max(r);
                if r >= 1e-9 {
                    failures.push(name.clone());
                }
            }
            _ => failures.push(name.clone()),
        }
    }
    outcome(
        failures.is_empty(),
        format!("{} triangulations, worst residual {worst:e}, failures {failures:?}", specs.len()),
    )
}

/// `Λ(π/3) = (√3/4) Σ_{k≥0} [1/(3k+1)² - 1/(3k+2)²]`, summed directly.
fn lambda_pi_over_3_oracle() -> f64 {
    let mut s = 0.0;
    for k in (0..2_000_000u64).rev() {
        let a = (3 * k + 1) as f64;
        let b = (3 * k + 2) as f64;
        s += 1.0 / (a * a) - 1.0 / (b * b);
    }
    3f64.sqrt() / 4.0 * s
}

fn figure_eight() -> Outcome {
    const FROZEN_REGULAR_VOLUME: f64 = 2.029_883_212_819_307_25;
    let oracle = 6.0 * lambda_pi_over_3_oracle();
    if (oracle - FROZEN_REGULAR_VOLUME).abs() > 1e-12 {
        return outcome(false, format!("oracle {oracle} disagrees with frozen value"));
    }
    let start = Instant::now();
    let t = fixture("fig8").unwrap();
    let config = MaximizeConfig {
        restarts: 20,
        seed: 0,
        ..MaximizeConfig::default()
    };
    let out = maximize(&t, &sas_init(&t).unwrap(), config);
    let vol_err = (out.report.volume - oracle).abs();
    let (residual, shape_err) = match classify_and_extract(&t, &out.report) {
        Ok(Extraction::Smooth { shapes, .. }) => {
            let r = residuals(&t, &shapes, Mode::Strict).unwrap();
            let target = Complex64::from_polar(1.0, PI / 3.0);
            let e = shapes.z.iter().map(|z| (z - target).norm()).fold(0.0, f64::max);
            (r.max_edge_residual.max(r.max_tet_residual), e)
        }
        _ => (f64::INFINITY, f64::INFINITY),
    };
    let elapsed = start.elapsed();
    outcome(
        vol_err <= 1e-6 && residual < 1e-9 && shape_err < 1e-5 && elapsed < Duration::from_secs(60),
        format!(
            "volume {:.10} (error {vol_err:e}), strict residual {residual:e}, max |z - e^(iπ/3)| {shape_err:e}, {elapsed:.2?}",
            out.report.volume
        ),
    )
}

fn gradient() -> Outcome {
    const H: f64 = 1e-5;
    // below this size the relative error is measured against this size
    const SCALE_FLOOR: f64 = 1e-3;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut details = Vec::new();
    for (name, t) in fixtures() {
        let m = VolumeMaximizer::new(&t, MaximizeConfig::default());
        let theta0 = sas_init(&t).unwrap().theta;
        let moving = movable_quads(m.tas());
        let dirs = unit_directions(m.tas());
        let mut points = 0;
        let mut fixture_worst: f64 = 0.0;
        while points < 100 {
            let mut theta = theta0.clone();
            for u in m.projector().basis() {
                let c: f64 = rng.gen_range(-PI..PI);
                theta.iter_mut().zip(u).for_each(|(a, b)| *a += c * b);
            }
            if moving.iter().any(|&q| {
                let r = theta[q].rem_euclid(PI);
                r.min(PI - r) < 0.1
            }) {
                continue;
            }
            points += 1;
            let g = volume_and_grad(&theta).grad;
            let mut test_dirs = dirs.clone();
            let mut u: Vec<f64> = m.projector().project(&(0..theta.len()).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>());
            let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 0.0 {
                u.iter_mut().for_each(|x| *x /= n);
                test_dirs.push(u);
            }
            for u in &test_dirs {
                let plus: Vec<f64> = theta.iter().zip(u).map(|(a, b)| a + H * b).collect();
                let minus: Vec<f64> = theta.iter().zip(u).map(|(a, b)| a - H * b).collect();
                let fd = (volume(&plus) - volume(&minus)) / (2.0 * H);
                let an: f64 = g.iter().zip(u).filter(|(_, b)| **b != 0.0).map(|(a, b)| a * b).sum();
                let rel = (fd - an).abs() / an.abs().max(SCALE_FLOOR);
                fixture_worst = fixture_worst.max(rel);
            }
        }
        worst = worst.max(fixture_worst);
        details.push(format!("{name} {fixture_worst:.1e}"));
    }
    outcome(worst < 1e-5, format!("worst relative error per fixture: {}", details.join(", ")))
}

/// Brute force: quads `q1` such that some normal solution supported on
/// the triangles and `{q, q1}` has nonzero `q` and `q1` coordinates, and
/// whether one exists with `q` alone.
fn two_quad_oracle(t: &Triangulation, q: usize) -> (bool, Vec<usize>) {
    let std = Haken::new(t).standard().clone();
    let nt = 4 * t.num_tets();
    let restricted = |quads: &[usize]| {
        let cols: Vec<usize> = (0..nt).chain(quads.iter().map(|&x| nt + x)).collect();
        let rows: Vec<Vec<_>> = (0..std.nrows())
            .map(|i| cols.iter().map(|&j| std.get(i, j).clone()).collect())
            .collect();
        QMatrix::from_rows(rows, cols.len()).kernel()
    };
    let single = restricted(&[q]).iter().any(|k| !k[nt].is_zero());
    let mut partners = Vec::new();
    for q1 in (0..t.num_quads()).filter(|&x| x != q) {
        let ker = restricted(&[q, q1]);
        // need one kernel vector with both coordinates nonzero; a generic
        // combination has that if each coordinate is nonzero somewhere
        let a = ker.iter().any(|k| !k[nt].is_zero());
        let b = ker.iter().any(|k| !k[nt + 1].is_zero());
        if a && b {
            partners.push(q1);
        }
    }
    (single, partners)
}

fn nonsmooth_reports(t: &Triangulation) -> Vec<VolumeReport> {
    let config = MaximizeConfig {
        restarts: 8,
        ..MaximizeConfig::default()
    };
    let m = VolumeMaximizer::new(t, config);
    let theta0 = sas_init(t).unwrap().theta;
    let mut out = vec![m.maximize(&theta0).report];
    out.extend((0..config.restarts).map(|i| m.ascend(m.start_point(&theta0, i), i).0));
    out.retain(|r| r.classification == Classification::NonsmoothCritical);
    out
}

fn extraction() -> Outcome {
    let mut checked = 0;
    let mut failures = Vec::new();
    for (name, t) in fixtures() {
        let haken = Haken::new(&t);
        for r in nonsmooth_reports(&t) {
            let Ok(Extraction::Nonsmooth { per_flat_quad, .. }) = classify_and_extract(&t, &r) else {
                failures.push(format!("{name}: extraction failed"));
                continue;
            };
            for f in per_flat_quad {
                checked += 1;
                let q = f.quad;
                let (single, partners) = two_quad_oracle(&t, q);
                for s in &f.solutions {
                    let support = s.quad_vector.iter().filter(|x| !x.is_zero()).count();
                    if support > 2 || s.quad_vector[q].is_zero() || !haken.is_solution(&s.vector) {
                        failures.push(format!("{name}: bad solution for quad {q}"));
                    }
                    if s.vector[4 * t.num_tets()..] != s.quad_vector[..] {
                        failures.push(format!("{name}: lift changed quads for {q}"));
                    }
                }
                let found: Vec<Option<usize>> = f.solutions.iter().map(|s| s.partner).collect();
                let expected: Vec<Option<usize>> = if single {
                    vec![None]
                } else {
                    partners.iter().map(|&p| Some(p)).collect()
                };
                if found != expected || found.is_empty() {
                    failures.push(format!("{name}: quad {q} partners {found:?} vs oracle {expected:?}"));
                }
            }
        }
    }
    outcome(
        failures.is_empty() && checked > 0,
        format!("{checked} flat quads checked, failures {failures:?}"),
    )
}

fn flattening() -> Outcome {
    let mut legs = 0;
    let mut runs = 0;
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for (name, t) in corpus(3, 20, 4) {
        for r in nonsmooth_reports(&t) {
            match fg_flatten(&t, &r) {
                Err(Error::NotApplicable) => {}
                Err(e) => failures.push(format!("{name}: {e}")),
                Ok(path) => {
                    runs += 1;
                    for leg in &path.legs {
                        legs += 1;
                        worst = worst.max(leg.max_volume_deviation);
                        if !is_tangential(&t, &leg.v) || leg.n_after >= leg.n_before || leg.max_volume_deviation >= 1e-8 {
                            failures.push(format!("{name}: leg {leg:?}"));
                        }
                    }
                }
            }
        }
    }
    outcome(
        failures.is_empty() && runs > 0,
        format!("{runs} paths, {legs} legs, worst volume deviation {worst:e}, failures {failures:?}"),
    )
}

/// All `3^|T|` choices, filtered by the edge parity condition.
fn z2_oracle(t: &Triangulation) -> Vec<Vec<usize>> {
    let n = t.num_tets();
    let inc = t.incidence();
    let mut out = Vec::new();
    for code in 0..3usize.pow(n as u32) {
        let quads: Vec<usize> = (0..n).map(|i| 3 * i + (code / 3usize.pow(i as u32)) % 3).collect();
        let even = (0..t.num_edges()).all(|e| quads.iter().map(|&q| inc.get(e, q) as usize).sum::<usize>() % 2 == 0);
        if even {
            out.push(quads);
        }
    }
    out.sort();
    out
}

fn z2_taut() -> Outcome {
    let mut failures = Vec::new();
    let specs = corpus(4, 20, 5);
    for (name, t) in &specs {
        let e = enumerate_taut(t, usize::MAX, false);
        let got: Vec<Vec<usize>> = e.structures.iter().map(|f| f.support()).collect();
        let want = z2_oracle(t);
        if got != want || e.count != Some(want.len() as u64) {
            failures.push(name.clone());
        }
    }
    let quadratic = verify_quadratic_equiv();
    outcome(
        failures.is_empty() && quadratic,
        format!("{} triangulations, quadratic formulation {quadratic}, failures {failures:?}", specs.len()),
    )
}

fn lobachevsky_agreement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut agree: f64 = 0.0;
    for i in 0..10_000 {
        // a uniform grid plus random points
        let t = if i < 5_000 {
            -2.0 * PI + 4.0 * PI * i as f64 / 4_999.0
        } else {
            rng.gen_range(-2.0 * PI..=2.0 * PI)
        };
        agree = agree.max((lobachevsky(t) - lobachevsky_quadrature(t)).abs());
    }
    let mut zero = lobachevsky(0.0).abs().max(lobachevsky_quadrature(0.0).abs());
    let mut odd: f64 = 0.0;
    let mut period: f64 = 0.0;
    for _ in 0..1_000 {
        let t: f64 = rng.gen_range(-2.0 * PI..=2.0 * PI);
        odd = odd.max((lobachevsky(-t) + lobachevsky(t)).abs());
        period = period.max((lobachevsky(t + PI) - lobachevsky(t)).abs());
        odd = odd.max((lobachevsky_quadrature(-t) + lobachevsky_quadrature(t)).abs());
        period = period.max((lobachevsky_quadrature(t + PI) - lobachevsky_quadrature(t)).abs());
    }
    for k in -2..=2 {
        zero = zero.max(lobachevsky(k as f64 * PI).abs());
    }
    outcome(
        agree < 1e-10 && zero < 1e-11 && odd < 1e-11 && period < 1e-11,
        format!("series vs quadrature {agree:e}, zeros {zero:e}, oddness {odd:e}, period {period:e}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("pairing identities and exactness", identity_suite),
        ("normal solutions project onto the TAS complement", duality),
        ("TAS dimension and angle initialisation", dimension),
        ("figure-eight volume maximum and shapes", figure_eight),
        ("volume gradient vs finite differences", gradient),
        ("two-quad solutions at nonsmooth maxima", extraction),
        ("flattening paths", flattening),
        ("Z/2-taut enumeration", z2_taut),
        ("Lobachevsky evaluators", lobachevsky_agreement),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {} {name}: {} ({})",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
