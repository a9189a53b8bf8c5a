//! Order-fixed summation, mean/stderr, and bootstrap percentile intervals.

use rand::Rng;

/// Pairwise summation in index order. Result depends only on the slice contents.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 16;
    if xs.len() <= LEAF {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Standard error of the mean (sample standard deviation / sqrt(n)).
pub fn stderr(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    (pairwise_sum(&sq) / (n - 1) as f64).sqrt() / (n as f64).sqrt()
}

/// Empirical quantile with linear interpolation on sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Percentile bootstrap interval for `statistic` over resampled index sets.
///
/// `statistic` receives the resampled indices into the caller's data, so paired
/// statistics (ratios of means across policies) resample problems jointly.
pub fn bootstrap_ci<R, F>(n: usize, resamples: usize, level: f64, rng: &mut R, mut statistic: F) -> (f64, f64)
where
    R: Rng + ?Sized,
    F: FnMut(&[usize]) -> f64,
{
    if n == 0 || resamples == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut idx = vec![0usize; n];
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for slot in idx.iter_mut() {
            *slot = rng.random_range(0..n);
        }
        stats.push(statistic(&idx));
    }
    stats.sort_by(|a, b| a.total_cmp(b));
    let alpha = (1.0 - level) / 2.0;
    (quantile(&stats, alpha), quantile(&stats, 1.0 - alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn pairwise_matches_naive_on_small_input() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 4950.0);
        assert_eq!(mean(&[1.0, 3.0]), 2.0);
        assert!((stderr(&[1.0, 3.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_data_has_degenerate_interval() {
        let xs = vec![2.5; 50];
        let mut rng = seed::stream(0, "t", 0);
        let (lo, hi) = bootstrap_ci(xs.len(), 200, 0.95, &mut rng, |ix| {
            ix.iter().map(|&i| xs[i]).sum::<f64>() / ix.len() as f64
        });
        assert_eq!((lo, hi), (2.5, 2.5));
    }
}
