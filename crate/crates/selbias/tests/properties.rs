//! Randomized invariants over the public API.

use proptest::prelude::*;

use selbias::{
    isotonic::isotonic_nonincreasing, premium_mc, Family, IncrementModel, ScoreMatrix, SeedSpec,
};

/// Dyadic rationals in [-4, 4]: centering subtractions are exact on these,
/// so bit-level identities are testable without fp slack.
fn dyadic() -> impl Strategy<Value = f64> {
    (-32i32..=32).prop_map(|i| i as f64 / 8.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn premium_is_translation_invariant_bitwise(
        u in prop::collection::vec(dyadic(), 2..5),
        shift in dyadic(),
        family in prop::sample::select(Family::ALL.to_vec()),
        seed in 0u64..1000,
    ) {
        let model = IncrementModel::iid(family, u.len(), 1.0).unwrap();
        let shifted: Vec<f64> = u.iter().map(|x| x + shift).collect();
        let a = premium_mc(&u, &model, 2_000, SeedSpec::new(seed)).unwrap();
        let b = premium_mc(&shifted, &model, 2_000, SeedSpec::new(seed)).unwrap();
        prop_assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn tie_state_dominates_under_common_draws(
        u in prop::collection::vec(dyadic(), 2..5),
        family in prop::sample::select(Family::ALL.to_vec()),
        seed in 0u64..1000,
    ) {
        let model = IncrementModel::iid(family, u.len(), 1.0).unwrap();
        let tie = vec![0.0; u.len()];
        let at_u = premium_mc(&u, &model, 2_000, SeedSpec::new(seed)).unwrap();
        let at_tie = premium_mc(&tie, &model, 2_000, SeedSpec::new(seed)).unwrap();
        prop_assert!(at_u.value <= at_tie.value);
    }

    #[test]
    fn isotonic_fit_is_monotone_and_idempotent(
        values in prop::collection::vec(-10.0f64..10.0, 1..40),
    ) {
        let weights = vec![1.0; values.len()];
        let fit = isotonic_nonincreasing(&values, &weights);
        for pair in fit.windows(2) {
            prop_assert!(pair[0] >= pair[1] - 1e-9);
        }
        let refit = isotonic_nonincreasing(&fit, &weights);
        for (a, b) in fit.iter().zip(&refit) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
        // pooling preserves the total
        let sum: f64 = values.iter().sum();
        let fit_sum: f64 = fit.iter().sum();
        prop_assert!((sum - fit_sum).abs() <= 1e-6 * (1.0 + sum.abs()));
    }

    #[test]
    fn score_matrix_csv_round_trips(
        rows in prop::collection::vec(
            prop::collection::vec(-1e12f64..1e12, 3),
            1..12,
        ),
    ) {
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        let names = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let m = ScoreMatrix::new(names, data, rows.len(), 3).unwrap();
        let back = ScoreMatrix::parse_csv(&m.to_csv()).unwrap();
        prop_assert_eq!(m, back);
    }
}
