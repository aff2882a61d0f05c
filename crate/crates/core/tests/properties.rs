use orient_core::orientation::score_sentence;
use orient_core::{fit_orientation, score_corpus, Role};
use orient_testkit::fixtures::{random_corpus, small_config, FixtureShape};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn fitted_stats_are_consistent(seed in 0u64..100_000, dims in 2usize..7) {
        let corpus = random_corpus(&FixtureShape::default(), seed);
        let model = fit_orientation(&corpus, &small_config(dims)).unwrap();
        for s in &model.stats {
            prop_assert!((0.0..=2.0).contains(&s.fwd_range) && (0.0..=2.0).contains(&s.bwd_range));
            prop_assert_eq!(s.orientation, s.bwd_range - s.fwd_range);
            prop_assert!(s.n_replies >= 2 && s.n_preds >= 2);
        }
        let scores = score_corpus(&corpus, &model, Role::Agent, false).unwrap();
        prop_assert!(scores.coverage.scored <= scores.coverage.sentences);
        for row in &scores.rows {
            if let (Some(lo), Some(hi)) = (row.omega_min, row.omega_max) {
                prop_assert!(lo <= hi);
            }
        }
    }

    #[test]
    fn sentence_score_is_a_weighted_mean(seed in 0u64..100_000, picks in prop::collection::vec(0usize..12, 1..8)) {
        let corpus = random_corpus(&FixtureShape::default(), seed);
        let model = fit_orientation(&corpus, &small_config(4)).unwrap();
        let phrasings: Vec<String> = picks.iter().map(|i| format!("a{i}")).collect();
        let inside: Vec<f64> = phrasings.iter().filter_map(|p| model.stats_for(p)).map(|s| s.orientation).collect();
        match score_sentence(&phrasings, &model) {
            None => prop_assert!(inside.is_empty()),
            Some(v) => {
                let lo = inside.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = inside.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }
    }
}
