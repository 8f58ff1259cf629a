use blackwell_core::blackwell::DEFAULT_TOLERANCE;
use blackwell_core::distracting::*;
use blackwell_core::*;
use proptest::prelude::*;

const CAP: u128 = 100_000;

/// Root of `r_d (1 − γ + γ p) = γ p r_max`, the indifference point at `s_d`.
fn two_state_root(p: f64, r_d: f64, r_max: f64) -> f64 {
    r_d / (r_d + p * (r_max - r_d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn chain_threshold_is_hitting_time_root(h in 1usize..=6, r_d in 0.01f64..0.9) {
        let mdp = generate_chain(h, r_d, 1.0).unwrap();
        let report = find_blackwell(&mdp, DEFAULT_TOLERANCE, CAP).unwrap();
        let hit = min_hitting_times(&mdp, h).unwrap()[0];
        prop_assert!((hit - h as f64).abs() < 1e-9);
        let expected = r_d.powf(1.0 / hit);
        prop_assert!((report.gamma_star - expected).abs() < 1e-8);
        let closed = gamma_star_closed_form(&recognize(&mdp).unwrap()).unwrap();
        prop_assert!((closed - expected).abs() < 1e-12);
    }

    #[test]
    fn two_state_threshold_matches_root(p in 0.01f64..1.0, r_d in 0.05f64..0.9) {
        let mdp = generate_two_state(p, r_d, 1.0).unwrap();
        let report = find_blackwell(&mdp, DEFAULT_TOLERANCE, CAP).unwrap();
        prop_assert!((report.gamma_star - two_state_root(p, r_d, 1.0)).abs() < 1e-8);
        let hit = min_hitting_times(&mdp, 1).unwrap()[0];
        prop_assert!((hit - 1.0 / p).abs() < 1e-6 / p);
    }
}

#[test]
fn two_state_sweep() {
    for p in [1.0, 0.1, 0.02] {
        let mdp = generate_two_state(p, 0.1, 1.0).unwrap();
        let report = find_blackwell(&mdp, DEFAULT_TOLERANCE, CAP).unwrap();
        let root = two_state_root(p, 0.1, 1.0);
        assert!((report.gamma_star - root).abs() < 1e-8, "p = {p}: {} vs {root}", report.gamma_star);
        assert_eq!(report.beta.as_slice(), &[1, 1]);
        let closed = gamma_star_closed_form(&DistractingSpec::two_state(p, 0.1, 1.0)).unwrap();
        assert!((closed - root).abs() < 1e-12);
    }
}

#[test]
fn slow_escape_threshold_and_warning() {
    let mdp = generate_two_state(1.0 / 500.0, 0.1, 1.0).unwrap();
    let report = find_blackwell(&mdp, DEFAULT_TOLERANCE, CAP).unwrap();
    assert!((report.gamma_star - 50.0 / 50.9).abs() < 1e-8);
    assert!(report.warnings.iter().any(|w| w.contains("0.84724541")));
}

#[test]
fn myopic_optimum_collects_distractor() {
    let mdp = generate_chain(3, 0.2, 1.0).unwrap();
    let gamma_star = 0.2f64.powf(1.0 / 3.0);
    let (below, _) = optimal_policy(&mdp, gamma_star - 0.05).unwrap();
    let (above, _) = optimal_policy(&mdp, gamma_star + 0.05).unwrap();
    assert_eq!(below.action(0), 0);
    assert_eq!(above.action(0), 1);
    assert!((gain_bias(&mdp, &below).unwrap().gain[0] - 0.2).abs() < 1e-12);
    assert!((gain_bias(&mdp, &above).unwrap().gain[0] - 1.0).abs() < 1e-12);
}
