use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use priste::checker::build_check_vectors;
use priste::markov::{forward_backward_posterior, forward_likelihood, joint_parts, prior_probability};
use priste::oracle::{naive_joint_parts, naive_posterior, naive_prior, RandomInstance, ENUMERATION_CAP};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prior_matches_enumeration(seed in any::<u64>()) {
        let inst = RandomInstance::draw(&mut ChaCha8Rng::seed_from_u64(seed), 4, 7).unwrap();
        let fast = prior_probability(&inst.pi, &inst.event, &inst.mobility).unwrap();
        let slow = naive_prior(&inst.pi, &inst.mobility, &inst.event).unwrap();
        prop_assert!((fast - slow).abs() <= 1e-12, "{fast} vs {slow}");
    }

    #[test]
    fn joint_parts_match_enumeration(seed in any::<u64>()) {
        let inst = RandomInstance::draw(&mut ChaCha8Rng::seed_from_u64(seed), 4, 6).unwrap();
        let parts = joint_parts(&inst.pi, &inst.event, &inst.mobility, &inst.emissions).unwrap();
        let (yes, no) =
            naive_joint_parts(&inst.pi, &inst.mobility, &inst.event, &inst.emissions, ENUMERATION_CAP).unwrap();
        prop_assert!((parts.event_probability() - yes).abs() <= 1e-12);
        prop_assert!((parts.not_event_probability() - no).abs() <= 1e-12);
        let forward = forward_likelihood(&inst.pi, &inst.mobility, &inst.emissions).unwrap();
        prop_assert!((parts.total() - forward).abs() <= 1e-10 * forward);
    }

    #[test]
    fn check_vectors_are_linear_in_the_prior(seed in any::<u64>()) {
        let inst = RandomInstance::draw(&mut ChaCha8Rng::seed_from_u64(seed), 4, 6).unwrap();
        let v = build_check_vectors(&inst.event, &inst.mobility, &inst.emissions).unwrap();
        let pi = inst.pi.view();
        let scale = v.log_scale.exp();
        let parts = joint_parts(&inst.pi, &inst.event, &inst.mobility, &inst.emissions).unwrap();
        let prior = prior_probability(&inst.pi, &inst.event, &inst.mobility).unwrap();
        prop_assert!((pi.dot(&v.a) - prior).abs() <= 1e-12);
        prop_assert!((pi.dot(&v.b) * scale - parts.event_probability()).abs() <= 1e-10 * parts.total());
        prop_assert!((pi.dot(&v.c) * scale - parts.total()).abs() <= 1e-10 * parts.total());
    }
}

#[test]
fn smoothing_posterior_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..50 {
        let inst = RandomInstance::draw(&mut rng, 4, 6).unwrap();
        let fast = forward_backward_posterior(&inst.pi, &inst.mobility, &inst.emissions).unwrap();
        let slow = naive_posterior(&inst.pi, &inst.mobility, &inst.emissions).unwrap();
        assert_eq!(fast.dim(), slow.dim());
        for (a, b) in fast.iter().zip(slow.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }
}
