use ndarray::Array1;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use priste::checker::{
    assemble_conditions, build_check_vectors, check_privacy, project_simplex, CheckerConfig, Decision, FeasibleSet,
};
use priste::event::GridMap;
use priste::lppm::{compute_delta_set, posterior_update, PlanarLaplace};
use priste::markov::{lift_at, prior_probability, EmissionColumn, InitialDistribution};
use priste::oracle::RandomInstance;

fn instance(seed: u64) -> RandomInstance {
    RandomInstance::draw(&mut ChaCha8Rng::seed_from_u64(seed), 6, 7).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lifted_rows_are_stochastic(seed in any::<u64>(), t in 0u32..9) {
        let inst = instance(seed);
        let dense = lift_at(&inst.mobility, &inst.event, t).unwrap().dense();
        for row in dense.rows() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn event_and_complement_partition(seed in any::<u64>()) {
        let inst = instance(seed);
        let p = prior_probability(&inst.pi, &inst.event, &inst.mobility).unwrap();
        prop_assert!((-1e-15..=1.0 + 1e-15).contains(&p));
        let v = build_check_vectors(&inst.event, &inst.mobility, &inst.emissions).unwrap();
        prop_assert!(v.b.iter().zip(v.c.iter()).all(|(b, c)| *b >= -1e-15 && *b <= c * (1.0 + 1e-12) + 1e-300));
    }

    #[test]
    fn projection_lands_on_the_simplex(v in prop::collection::vec(-5.0f64..5.0, 1..12)) {
        let p = project_simplex(Array1::from(v.clone()).view());
        prop_assert!((p.sum() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        let q = project_simplex(p.view());
        prop_assert!((&q - &p).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn uninformative_release_always_holds(seed in any::<u64>(), epsilon in 0.0f64..3.0) {
        let inst = instance(seed);
        let m = inst.pi.m();
        let cols = vec![EmissionColumn::uninformative(m); inst.emissions.len()];
        let v = build_check_vectors(&inst.event, &inst.mobility, &cols).unwrap();
        let report = check_privacy(&assemble_conditions(&v, epsilon), &CheckerConfig::new(epsilon));
        prop_assert_eq!(report.decision, Decision::Holds);
    }

    #[test]
    fn larger_epsilon_never_breaks_a_holding_check(seed in any::<u64>(), e1 in 0.01f64..2.0, extra in 0.0f64..2.0) {
        let inst = instance(seed);
        let v = build_check_vectors(&inst.event, &inst.mobility, &inst.emissions).unwrap();
        let lo = check_privacy(&assemble_conditions(&v, e1), &CheckerConfig::new(e1));
        let e2 = e1 + extra;
        let hi = check_privacy(&assemble_conditions(&v, e2), &CheckerConfig::new(e2));
        if lo.decision == Decision::Holds {
            prop_assert_eq!(hi.decision, Decision::Holds);
        }
    }

    #[test]
    fn box_relaxation_is_conservative(seed in any::<u64>(), epsilon in 0.01f64..2.0) {
        let inst = instance(seed);
        let v = build_check_vectors(&inst.event, &inst.mobility, &inst.emissions).unwrap();
        let conditions = assemble_conditions(&v, epsilon);
        let simplex = check_privacy(&conditions, &CheckerConfig::new(epsilon));
        let mut cfg = CheckerConfig::new(epsilon);
        cfg.feasible_set = FeasibleSet::Box;
        let boxed = check_privacy(&conditions, &cfg);
        if simplex.decision == Decision::Violated {
            prop_assert_eq!(boxed.decision, Decision::Violated);
        }
    }

    #[test]
    fn plm_rows_are_distributions(alpha in 0.01f64..10.0, w in 1usize..6, h in 1usize..6) {
        let plm = PlanarLaplace::new(alpha, GridMap::new(w, h, 0.5).unwrap()).unwrap();
        let e = plm.emission_matrix();
        for row in e.rows() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-12);
        }
        prop_assert!(plm.rate() <= alpha && plm.rate() > 0.0);
    }

    #[test]
    fn delta_set_reaches_its_mass(p in prop::collection::vec(0.0f64..1.0, 1..30), delta in 0.0f64..0.99) {
        let s: f64 = p.iter().sum();
        prop_assume!(s > 0.0);
        let p: Array1<f64> = Array1::from(p) / s;
        let set = compute_delta_set(p.view(), delta).unwrap();
        let mass: f64 = set.cells().iter().map(|&i| p[i]).sum();
        prop_assert!(mass >= 1.0 - delta - 1e-9);
        prop_assert!(!set.is_empty());
    }

    #[test]
    fn posterior_update_is_a_distribution(seed in any::<u64>()) {
        let inst = instance(seed);
        let p = inst.mobility.at(1).unwrap().mul_row(inst.pi.view());
        let post = posterior_update(p.view(), &inst.emissions[0]).unwrap();
        prop_assert!((post.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_prior_is_feasible(seed in any::<u64>()) {
        let inst = instance(seed);
        let m = inst.pi.m();
        let u = InitialDistribution::uniform(m);
        let p = prior_probability(&u, &inst.event, &inst.mobility).unwrap();
        prop_assert!((-1e-15..=1.0 + 1e-12).contains(&p), "{p}");
    }
}
