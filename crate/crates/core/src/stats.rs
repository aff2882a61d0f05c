//! Rank tests, bootstrap intervals and effect sizes.
//!
//! Rank tests use the exact permutation distribution (with midranks for
//! ties) for small samples and a tie-corrected normal approximation with
//! continuity correction above [`EXACT_MAX_N`] observations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest total sample size tested with the exact distribution.
pub const EXACT_MAX_N: usize = 40;

const REL_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub exact: bool,
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample variance with an `n − 1` denominator.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() as f64 - 1.0)
}

/// Midranks (1-based) of `values` and the sizes of the tie groups.
pub fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

fn two_sided_normal(deviation: f64, sd: f64) -> f64 {
    if sd <= 0.0 {
        return 1.0;
    }
    let z = (deviation.abs() - 0.5).max(0.0) / sd;
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * normal.sf(z)).min(1.0)
}

/// `P(|X − μ| ≥ |observed − μ|)` for a distribution over doubled integer
/// statistics given as counts.
fn two_sided_exact(counts: &[f64], observed2: usize, mu2: f64) -> f64 {
    let total: f64 = counts.iter().sum();
    let dev = (observed2 as f64 - mu2).abs();
    let tail: f64 = counts
        .iter()
        .enumerate()
        .filter(|&(s, &c)| c > 0.0 && (s as f64 - mu2).abs() >= dev - REL_EPS)
        .map(|(_, c)| c)
        .sum();
    (tail / total).min(1.0)
}

/// Mann-Whitney U for `a` against `b`: `U = R_a − n_a(n_a+1)/2` with a
/// two-sided p-value.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Stats("Mann-Whitney U needs two non-empty samples".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Stats("Mann-Whitney U input is not finite".into()));
    }
    let (na, nb) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let ra: f64 = ranks[..na].iter().sum();
    let u = ra - (na * (na + 1)) as f64 / 2.0;
    let mu = (na * nb) as f64 / 2.0;
    let n = na + nb;
    if ties.len() == 1 {
        return Ok(TestResult {
            statistic: u,
            p_value: 1.0,
            exact: n <= EXACT_MAX_N,
        });
    }
    if n <= EXACT_MAX_N {
        // Distribution of the doubled rank sum of a random size-na subset.
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let max_sum: usize = doubled.iter().sum();
        let mut dp = vec![vec![0.0f64; max_sum + 1]; na + 1];
        dp[0][0] = 1.0;
        for &r in &doubled {
            for j in (1..=na).rev() {
                let (lo, hi) = dp.split_at_mut(j);
                let prev = &lo[j - 1];
                let cur = &mut hi[0];
                for s in (r..=max_sum).rev() {
                    if prev[s - r] > 0.0 {
                        cur[s] += prev[s - r];
                    }
                }
            }
        }
        let observed2 = (2.0 * ra).round() as usize;
        let mu2 = (na * (n + 1)) as f64;
        return Ok(TestResult {
            statistic: u,
            p_value: two_sided_exact(&dp[na], observed2, mu2),
            exact: true,
        });
    }
    let nf = n as f64;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (nf * (nf - 1.0));
    let var = (na * nb) as f64 / 12.0 * ((nf + 1.0) - tie_term);
    Ok(TestResult {
        statistic: u,
        p_value: two_sided_normal(u - mu, var.max(0.0).sqrt()),
        exact: false,
    })
}

/// Wilcoxon signed-rank test on paired differences. Zeros are dropped;
/// the statistic is the positive rank sum `W+`.
pub fn wilcoxon_signed_rank(diffs: &[f64]) -> Result<TestResult> {
    if diffs.iter().any(|v| !v.is_finite()) {
        return Err(Error::Stats("Wilcoxon input is not finite".into()));
    }
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let n = nonzero.len();
    if n == 0 {
        return Ok(TestResult {
            statistic: 0.0,
            p_value: 1.0,
            exact: true,
        });
    }
    let abs: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = midranks(&abs);
    let w: f64 = ranks
        .iter()
        .zip(&nonzero)
        .filter(|(_, d)| **d > 0.0)
        .map(|(r, _)| r)
        .sum();
    let mu = (n * (n + 1)) as f64 / 4.0;
    if n <= EXACT_MAX_N {
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let max_sum: usize = doubled.iter().sum();
        let mut dp = vec![0.0f64; max_sum + 1];
        dp[0] = 1.0;
        for &r in &doubled {
            for s in (r..=max_sum).rev() {
                dp[s] += dp[s - r];
            }
        }
        let observed2 = (2.0 * w).round() as usize;
        return Ok(TestResult {
            statistic: w,
            p_value: two_sided_exact(&dp, observed2, 2.0 * mu),
            exact: true,
        });
    }
    let nf = n as f64;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
    Ok(TestResult {
        statistic: w,
        p_value: two_sided_normal(w - mu, var.max(0.0).sqrt()),
        exact: false,
    })
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Percentile bootstrap interval for the mean. Resample `r` draws from its
/// own ChaCha stream, so the result does not depend on thread scheduling.
pub fn bootstrap_ci(values: &[f64], n_resamples: usize, level: f64, seed: u64) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Stats("bootstrap of an empty sample".into()));
    }
    if n_resamples == 0 {
        return Err(Error::Stats("bootstrap needs at least one resample".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Stats(format!("confidence level {level} is outside (0, 1)")));
    }
    let n = values.len();
    let mut means: Vec<f64> = (0..n_resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let total: f64 = (0..n).map(|_| values[rng.random_range(0..n)]).sum();
            total / n as f64
        })
        .collect();
    means.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Ok((quantile_sorted(&means, alpha), quantile_sorted(&means, 1.0 - alpha)))
}

/// Mean difference `a − b` over the pooled standard deviation.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Stats("Cohen's d needs at least two values per sample".into()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = (((na - 1.0) * variance(a) + (nb - 1.0) * variance(b)) / (na + nb - 2.0)).sqrt();
    if !(pooled > 0.0) {
        return Err(Error::Stats("Cohen's d with zero pooled variance".into()));
    }
    Ok((mean(a) - mean(b)) / pooled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mwu_separated() {
        let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn mwu_identical_samples() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let r = mann_whitney_u(&a, &a).unwrap();
        assert_eq!(r.statistic, 8.0);
        assert!(r.p_value > 0.9);
        let r = mann_whitney_u(&[2.0; 3], &[2.0; 5]).unwrap();
        assert_eq!((r.statistic, r.p_value), (7.5, 1.0));
    }

    #[test]
    fn mwu_large_sample_uses_normal() {
        let a: Vec<f64> = (0..30).map(f64::from).collect();
        let b: Vec<f64> = (0..30).map(|i| f64::from(i) + 0.5).collect();
        let r = mann_whitney_u(&a, &b).unwrap();
        assert!(!r.exact);
        assert!(r.p_value > 0.8);
    }

    #[test]
    fn wilcoxon_cases() {
        let r = wilcoxon_signed_rank(&[1.0; 10]).unwrap();
        assert_eq!(r.statistic, 55.0);
        assert!(r.p_value < 0.01);
        let alt: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!(wilcoxon_signed_rank(&alt).unwrap().p_value > 0.5);
        assert_eq!(wilcoxon_signed_rank(&[0.0, 2.5, 0.0]).unwrap().p_value, 1.0);
        let z = wilcoxon_signed_rank(&[0.0; 4]).unwrap();
        assert_eq!((z.statistic, z.p_value), (0.0, 1.0));
    }

    #[test]
    fn bootstrap_cases() {
        assert_eq!(bootstrap_ci(&[3.5; 7], 200, 0.95, 1).unwrap(), (3.5, 3.5));
        let v: Vec<f64> = (0..400).map(|i| f64::from(i % 2)).collect();
        let (lo, hi) = bootstrap_ci(&v, 1000, 0.95, 9).unwrap();
        assert!(lo < 0.5 && 0.5 < hi);
        assert_eq!(
            bootstrap_ci(&v, 300, 0.9, 4).unwrap(),
            bootstrap_ci(&v, 300, 0.9, 4).unwrap()
        );
        assert!(bootstrap_ci(&[], 10, 0.95, 0).is_err());
    }

    #[test]
    fn cohens_d_cases() {
        assert_eq!(cohens_d(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        let d = cohens_d(&[1.0, -1.0, 1.0, -1.0], &[0.0, 2.0, 0.0, 2.0]).unwrap();
        let sd = (4.0f64 / 3.0).sqrt();
        assert!((d + 1.0 / sd).abs() < 1e-12);
        assert!(cohens_d(&[1.0, 1.0], &[1.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn mwu_statistics_complement(
            a in prop::collection::vec(0u8..6, 1..15),
            b in prop::collection::vec(0u8..6, 1..15),
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let ab = mann_whitney_u(&a, &b).unwrap();
            let ba = mann_whitney_u(&b, &a).unwrap();
            prop_assert!((ab.statistic + ba.statistic - (a.len() * b.len()) as f64).abs() < 1e-9);
            prop_assert!((ab.p_value - ba.p_value).abs() < 1e-9);
            prop_assert!(ab.p_value > 0.0 && ab.p_value <= 1.0);
        }
    }
}
