use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use spine3::angles::{congruence_residuals, is_tangential, sas_init, tas_basis};
use spine3::exact::{rat, to_f64, Rational};
use spine3::haken::{solution_bases, Haken};
use spine3::nzform::{build_forms, chain_analysis, selftest};
use spine3::thurston::{newton_refine, residuals, Mode, ShapeAssignment};
use spine3::volopt::lobachevsky::lobachevsky;
use spine3::volopt::{fg_flatten, volume, Classification, MaximizeConfig, VolumeMaximizer};
use spine3::z2taut::{check, enumerate_taut};
use spine3::{fixture, Error, GluingSpec, Triangulation};

fn random_tri(seed: u64, tets: usize) -> Triangulation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Triangulation::new(GluingSpec::random_orientable(&mut rng, tets)).unwrap()
}

/// A permutation of `0..n` from a list of swap keys.
fn permutation(n: usize, keys: &[usize]) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for (i, k) in keys.iter().enumerate().take(n) {
        p.swap(i, i + k % (n - i));
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn counts_survive_relabelling(seed in any::<u64>(), tets in 1usize..=5, keys in prop::collection::vec(0usize..8, 5)) {
        let t = random_tri(seed, tets);
        let perm = permutation(tets, &keys);
        let r = t.relabelled(&perm).unwrap();
        prop_assert_eq!(t.num_vertices(), r.num_vertices());
        prop_assert_eq!(t.num_edges(), r.num_edges());
        prop_assert_eq!(t.euler_characteristic(), r.euler_characteristic());
        let mut a = t.edge_degrees();
        let mut b = r.edge_degrees();
        a.sort_unstable();
        b.sort_unstable();
        prop_assert_eq!(a, b);
        prop_assert_eq!(t.num_faces(), 2 * tets);
    }

    #[test]
    fn every_quad_meets_two_edge_slots(seed in any::<u64>(), tets in 1usize..=6) {
        let t = random_tri(seed, tets);
        let inc = t.incidence();
        for q in 0..t.num_quads() {
            let s: u32 = (0..t.num_edges()).map(|e| inc.get(e, q) as u32).sum();
            prop_assert_eq!(s, 2);
        }
    }

    #[test]
    fn pairing_identities_hold(seed in any::<u64>(), tets in 1usize..=5) {
        let t = random_tri(seed, tets);
        let r = selftest(&t);
        prop_assert!(r.all_pass(), "{:?}", r);
        let e = chain_analysis(&t, &build_forms(&t));
        prop_assert_eq!(e.rank_a + e.dim_tas, e.dim_z);
        prop_assert_eq!(e.dim_tas, tas_basis(&t).dim);
    }

    #[test]
    fn normal_solutions_project_into_tas_complement(seed in any::<u64>(), tets in 1usize..=5) {
        let t = random_tri(seed, tets);
        let b = solution_bases(&t).unwrap();
        prop_assert!(b.duality.holds);
        let haken = Haken::new(&t);
        for q in 0..t.num_quads() {
            for s in haken.two_quad_search(q) {
                prop_assert!(haken.is_solution(&s.vector));
                prop_assert!(s.support.len() <= 2);
            }
        }
    }

    #[test]
    fn tangential_moves_keep_congruences(seed in any::<u64>(), tets in 1usize..=6, coeffs in prop::collection::vec(-10.0f64..10.0, 8)) {
        let t = random_tri(seed, tets);
        let theta0 = sas_init(&t).unwrap().theta;
        let tas = tas_basis(&t);
        let mut theta = theta0.clone();
        let mut exact = vec![rat(0); t.num_quads()];
        for (b, c) in tas.basis.iter().zip(&coeffs) {
            for (i, x) in b.iter().enumerate() {
                theta[i] += c * to_f64(x);
                exact[i] += x * Rational::from_integer((*c as i64).into());
            }
        }
        prop_assert!(is_tangential(&t, &exact));
        prop_assert!(congruence_residuals(&t, &theta).max() < 1e-9);
    }

    #[test]
    fn volume_depends_on_angles_mod_pi(seed in any::<u64>(), tets in 1usize..=5, coeffs in prop::collection::vec(-3.0f64..3.0, 8), shifts in prop::collection::vec(-3i64..=3, 8)) {
        let t = random_tri(seed, tets);
        let tas = tas_basis(&t);
        let mut theta = sas_init(&t).unwrap().theta;
        for (b, c) in tas.basis.iter().zip(&coeffs) {
            for (i, x) in b.iter().enumerate() {
                theta[i] += c * to_f64(x);
            }
        }
        // integer tangential vectors move every angle by a multiple of π
        let mut shifted = theta.clone();
        for (b, k) in tas.basis.iter().zip(&shifts) {
            prop_assert!(b.iter().all(|x| x.is_integer()));
            for (i, x) in b.iter().enumerate() {
                shifted[i] += PI * (*k as f64) * to_f64(x);
            }
        }
        prop_assert!((volume(&theta) - volume(&shifted)).abs() < 1e-10);
    }

    #[test]
    fn lobachevsky_is_odd_and_pi_periodic(x in -20.0f64..20.0) {
        prop_assert!((lobachevsky(-x) + lobachevsky(x)).abs() < 1e-11);
        prop_assert!((lobachevsky(x + PI) - lobachevsky(x)).abs() < 1e-11);
    }

    #[test]
    fn taut_enumeration_is_canonical(seed in any::<u64>(), tets in 1usize..=5, keys in prop::collection::vec(0usize..8, 5)) {
        let t = random_tri(seed, tets);
        let perm = permutation(tets, &keys);
        let r = t.relabelled(&perm).unwrap();
        let a = enumerate_taut(&t, usize::MAX, false);
        let b = enumerate_taut(&r, usize::MAX, false);
        prop_assert_eq!(a.count, b.count);
        for f in &a.structures {
            prop_assert!(check(&t, f).valid());
        }
        let mut mapped: Vec<Vec<usize>> = b
            .structures
            .iter()
            .map(|f| {
                let mut chosen: Vec<usize> = (0..tets)
                    .map(|old| {
                        let k = (0..3).find(|&k| f.f[3 * perm[old] + k] == 1).unwrap();
                        3 * old + k
                    })
                    .collect();
                chosen.sort_unstable();
                chosen
            })
            .collect();
        mapped.sort();
        let direct: Vec<Vec<usize>> = a.structures.iter().map(|f| f.support()).collect();
        prop_assert_eq!(direct, mapped);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn flattening_direction_is_tangential(seed in any::<u64>(), tets in 1usize..=4, restart in 0usize..6) {
        let t = random_tri(seed, tets);
        let m = VolumeMaximizer::new(&t, MaximizeConfig { restarts: 6, ..MaximizeConfig::default() });
        let theta0 = sas_init(&t).unwrap().theta;
        let (r, traj) = m.ascend(m.start_point(&theta0, restart), restart);
        prop_assert!(traj.volumes.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        if r.classification == Classification::NonsmoothCritical {
            match fg_flatten(&t, &r) {
                Ok(path) => {
                    for leg in &path.legs {
                        prop_assert!(is_tangential(&t, &leg.v));
                        prop_assert!(leg.n_after < leg.n_before);
                        prop_assert!(leg.max_volume_deviation < 1e-8);
                    }
                }
                Err(Error::NotApplicable) => {}
                Err(e) => prop_assert!(false, "{e}"),
            }
        }
    }

    #[test]
    fn maximize_is_seed_deterministic(seed in any::<u64>(), tets in 1usize..=4, opt_seed in any::<u64>()) {
        let t = random_tri(seed, tets);
        let config = MaximizeConfig { restarts: 4, seed: opt_seed, ..MaximizeConfig::default() };
        let theta0 = sas_init(&t).unwrap();
        let a = spine3::volopt::maximize(&t, &theta0, config);
        let b = spine3::volopt::maximize(&t, &theta0, config);
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        prop_assert!(a.report.volume >= volume(&theta0.theta) - 1e-12);
    }

    #[test]
    fn newton_never_raises_the_edge_residual(angle in -0.15f64..0.15, stretch in 0.9f64..1.1, other in -0.15f64..0.15) {
        let t = fixture("fig8").unwrap();
        let z0 = [
            Complex64::from_polar(stretch, PI / 3.0 + angle),
            Complex64::from_polar(1.0, PI / 3.0 + other),
        ];
        let seed = ShapeAssignment::coherent_from_type0(&t, &z0);
        if residuals(&t, &seed, Mode::Strict).unwrap().max_edge_residual < 0.5 {
            let r = newton_refine(&t, &seed, Mode::Strict).unwrap();
            prop_assert!(r.residual_history.windows(2).all(|w| w[1] <= w[0]));
        }
    }
}
