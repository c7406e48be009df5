//! Small statistical helpers shared by the experiment suites.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Sample mean and standard error of the mean (Welford, single pass).
pub fn mean_se(vals: &[f64]) -> (f64, f64) {
    assert!(!vals.is_empty());
    let mut mean = 0.0;
    let mut m2 = 0.0;
    let mut k = 0.0;
    for &v in vals {
        k += 1.0;
        let d = v - mean;
        mean += d / k;
        m2 += d * (v - mean);
    }
    if vals.len() < 2 {
        return (mean, 0.0);
    }
    let var = m2 / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Sample variance (unbiased).
pub fn variance(vals: &[f64]) -> f64 {
    let (_, se) = mean_se(vals);
    se * se * vals.len() as f64
}

pub fn normal_cdf(z: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().cdf(z)
}

/// Kolmogorov-Smirnov sup distance between the empirical law of `sample` and
/// the continuous cdf `f`. Sorts a copy of the sample.
pub fn ks_distance<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    assert!(!sample.is_empty());
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in s.iter().enumerate() {
        let c = cdf(v);
        d = d.max((c - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - c).abs());
    }
    d
}

/// Pearson chi-square test of uniformity over equal-width bins on [lo, hi].
/// Returns (statistic, p_value) with `bins - 1` degrees of freedom. Samples
/// outside the range are clamped into the edge bins.
pub fn chi_square_uniform(sample: &[f64], lo: f64, hi: f64, bins: usize) -> (f64, f64) {
    assert!(bins >= 2 && hi > lo && !sample.is_empty());
    let mut counts = vec![0u64; bins];
    let scale = bins as f64 / (hi - lo);
    for &v in sample {
        let k = (((v - lo) * scale).floor() as i64).clamp(0, bins as i64 - 1);
        counts[k as usize] += 1;
    }
    let expected = sample.len() as f64 / bins as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    let dist = ChiSquared::new((bins - 1) as f64).unwrap();
    (stat, 1.0 - dist.cdf(stat))
}

/// Composite Simpson weights for `n_intervals` (even, >= 2) equal intervals
/// of width `h`: the classic h/3 * [1, 4, 2, ..., 2, 4, 1] vector of length
/// `n_intervals + 1`.
pub fn simpson_weights(n_intervals: usize, h: f64) -> Vec<f64> {
    assert!(n_intervals >= 2 && n_intervals % 2 == 0);
    let mut w = vec![0.0; n_intervals + 1];
    w[0] = h / 3.0;
    w[n_intervals] = h / 3.0;
    for (k, slot) in w.iter_mut().enumerate().skip(1).take(n_intervals - 1) {
        *slot = if k % 2 == 1 { 4.0 * h / 3.0 } else { 2.0 * h / 3.0 };
    }
    w
}
