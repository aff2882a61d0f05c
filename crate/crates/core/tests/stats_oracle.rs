use orient_core::stats::{cohens_d, mann_whitney_u, wilcoxon_signed_rank};
use orient_testkit::{exact, harness};
use proptest::prelude::*;

fn small_values(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0i32..6).prop_map(f64::from), 1..=max_len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn mann_whitney_matches_enumeration(a in small_values(10), b in small_values(10)) {
        let got = mann_whitney_u(&a, &b).unwrap();
        let (u, p) = exact::mann_whitney(&a, &b);
        prop_assert!((got.statistic - u).abs() < 1e-9);
        prop_assert!((got.p_value - p).abs() <= 0.02, "{} vs {}", got.p_value, p);
    }

    #[test]
    fn wilcoxon_matches_enumeration(d in prop::collection::vec((-4i32..5).prop_map(f64::from), 1..=10)) {
        let got = wilcoxon_signed_rank(&d).unwrap();
        let (w, p) = exact::wilcoxon(&d);
        prop_assert!((got.statistic - w).abs() < 1e-9);
        prop_assert!((got.p_value - p).abs() <= 0.02, "{} vs {}", got.p_value, p);
    }
}

#[test]
fn single_nonzero_difference() {
    let r = wilcoxon_signed_rank(&[0.0, 0.0, 2.5]).unwrap();
    assert_eq!((r.statistic, r.p_value), (1.0, 1.0));
}

#[test]
fn cohens_d_textbook() {
    let a = [2.0, 4.0, 6.0, 8.0];
    let b = [1.0, 2.0, 3.0];
    // Sample variances 20/3 and 1; pooled (3·20/3 + 2·1) / 5 = 4.4.
    let expected = (5.0 - 2.0) / 4.4f64.sqrt();
    assert!((cohens_d(&a, &b).unwrap() - expected).abs() < 1e-12);
}

#[test]
fn bootstrap_coverage_near_nominal() {
    let c = harness::bootstrap_coverage(1000, 20, 1000, 0.95, 1);
    assert!((c - 0.95).abs() <= 0.05, "coverage {c}");
}
