mod common;

use common::*;
use privrelease_core::{apply_bayes_operator, Belief, ModelSpec, State};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn update_is_normalized_policy_free_and_order_invariant(seed in any::<u64>()) {
        let mut acc = BeliefSuite::default();
        belief_instance(seed, &mut acc);
        prop_assert!(acc.max_norm_err <= NORM_TOL, "normalization drift {}", acc.max_norm_err);
        prop_assert!(acc.max_cancel_err <= CANCEL_TOL, "policy term changed the posterior by {}", acc.max_cancel_err);
        prop_assert!(acc.max_order_err <= ORDER_TOL, "evidence order changed the posterior by {}", acc.max_order_err);
        prop_assert_eq!(acc.point_mass_failures, 0);
    }

    #[test]
    fn marginals_are_distributions(seed in any::<u64>(), n in 2usize..5, m in 2usize..5) {
        let mut r = rng(seed);
        let b = random_belief(&mut r, n, m, true);
        let ms: f64 = b.marginal_secret().iter().sum();
        let mu: f64 = b.marginal_useful().iter().sum();
        prop_assert!((ms - 1.0).abs() < 1e-12);
        prop_assert!((mu - 1.0).abs() < 1e-12);
        prop_assert!(b.max_secret() >= 1.0 / n as f64 - 1e-12);
    }
}

#[test]
fn final_state_absorbs_every_observation() {
    let model = privrelease_core::tiny_model();
    for a in 0..2 {
        for z in 0..3 {
            let next = apply_bayes_operator(&State::Final, a, z, &model, 0.8).unwrap();
            assert_eq!(next, State::Final);
        }
    }
}

#[test]
fn belief_at_threshold_enters_final_without_update() {
    let model = privrelease_core::tiny_model();
    // max_s β(s) = 0.8 exactly: the comparison is inclusive
    let b = Belief::new(2, 2, vec![0.4, 0.4, 0.1, 0.1]).unwrap();
    let next = apply_bayes_operator(&State::Belief(b.clone()), 0, 0, &model, 0.8).unwrap();
    assert_eq!(next, State::Final);
    let below = apply_bayes_operator(&State::Belief(b), 0, 0, &model, 0.81).unwrap();
    assert!(matches!(below, State::Belief(_)));
}

#[test]
fn zero_evidence_is_an_error() {
    let spec = ModelSpec::new(2, 1, 1, 2).unwrap();
    let model = privrelease_core::ObservationModel::from_fn(spec, |_, s, _, z| if s == z { 1.0 } else { 0.0 }).unwrap();
    let b = Belief::point_mass(2, 1, 0, 0);
    let err = b.bayes_update(0, 1, &model).unwrap_err();
    assert!(matches!(err, privrelease_core::Error::ImpossibleObservation { action: 0, observation: 1 }));
}

#[test]
fn suite_covers_a_thousand_instances() {
    let acc = belief_suite(1000);
    assert_eq!(acc.instances, 1000);
    assert!(acc.passed(), "{acc:?}");
}
