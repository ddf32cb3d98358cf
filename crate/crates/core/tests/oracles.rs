use aocsi::{brute_force_optimal_period, relative_value_iteration, solve_threshold, RewardCurve};
use proptest::prelude::*;

fn curve() -> impl Strategy<Value = RewardCurve> {
    prop::collection::vec(0.0f64..10.0, 1..30)
        .prop_map(|v| RewardCurve::new(v).unwrap().zero_padded(150))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn threshold_brute_force_and_value_iteration_agree(curve in curve()) {
        let sol = solve_threshold(&curve, 1e-12, 64).unwrap();
        let (_, avg) = brute_force_optimal_period(&curve, 80).unwrap();
        let mdp = relative_value_iteration(&curve, 80, 1e-10).unwrap();
        prop_assert!((sol.beta - avg).abs() <= 1e-9);
        prop_assert!((sol.beta - mdp.gain).abs() <= 1e-9);
        prop_assert_eq!(sol.period, sol.hitting_age);
        // Optimal cycle averages can tie across periods; any tie must hit beta.
        let sums: f64 = curve.values()[..sol.period - 1].iter().sum();
        prop_assert!((sums / sol.period as f64 - avg).abs() <= 1e-9);
    }

    #[test]
    fn beta_never_exceeds_the_best_single_reward(curve in curve()) {
        let sol = solve_threshold(&curve, 1e-12, 64).unwrap();
        prop_assert!(sol.beta >= 0.0);
        prop_assert!(sol.beta <= curve.max() + 1e-12);
    }
}
