//! Exact two-sided p-values by full enumeration.

fn midranks(values: &[f64]) -> Vec<f64> {
    let mut ranks = vec![0.0; values.len()];
    for (i, &x) in values.iter().enumerate() {
        let below = values.iter().filter(|&&y| y < x).count();
        let equal = values.iter().filter(|&&y| y == x).count();
        ranks[i] = below as f64 + (equal as f64 + 1.0) / 2.0;
    }
    ranks
}

/// Mann-Whitney U of `a` and its permutation p-value over every split of
/// the pooled sample.
pub fn mann_whitney(a: &[f64], b: &[f64]) -> (f64, f64) {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let n = pooled.len();
    let na = a.len();
    let u_of = |rank_sum: f64| rank_sum - (na * (na + 1)) as f64 / 2.0;
    let observed = u_of(ranks[..na].iter().sum());
    let mu = (na * b.len()) as f64 / 2.0;
    let (mut hits, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != na {
            continue;
        }
        let sum: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| ranks[i]).sum();
        total += 1;
        if (u_of(sum) - mu).abs() >= (observed - mu).abs() - 1e-9 {
            hits += 1;
        }
    }
    (observed, hits as f64 / total as f64)
}

/// Signed-rank `W+` and its p-value over every sign assignment, zeros
/// dropped.
pub fn wilcoxon(diffs: &[f64]) -> (f64, f64) {
    let nz: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    if nz.is_empty() {
        return (0.0, 1.0);
    }
    let ranks = midranks(&nz.iter().map(|d| d.abs()).collect::<Vec<_>>());
    let n = nz.len();
    let observed: f64 = (0..n).filter(|&i| nz[i] > 0.0).map(|i| ranks[i]).sum();
    let mu = (n * (n + 1)) as f64 / 4.0;
    let mut hits = 0u64;
    for mask in 0u32..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| ranks[i]).sum();
        if (w - mu).abs() >= (observed - mu).abs() - 1e-9 {
            hits += 1;
        }
    }
    (observed, hits as f64 / (1u64 << n) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cases() {
        assert_eq!(mann_whitney(&[1.0, 2.0], &[3.0, 4.0]), (0.0, 1.0 / 3.0));
        let (w, p) = wilcoxon(&[1.0; 5]);
        assert_eq!((w, p), (15.0, 2.0 / 32.0));
    }
}
