//! Small statistics helpers shared by the estimators and the tests.

/// Kolmogorov–Smirnov distance between the empirical law of `xs` and `cdf`.
pub fn ks_distance<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> f64 {
    let mut sorted: Vec<f64> = xs.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Standard error of the mean.
pub fn std_error(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Standard error of the mean of a correlated series, from `batches`
/// non-overlapping batch means.
pub fn batch_means_se(xs: &[f64], batches: usize) -> f64 {
    let size = xs.len() / batches;
    let means: Vec<f64> = (0..batches).map(|b| mean(&xs[b * size..(b + 1) * size])).collect();
    std_error(&means)
}

/// Standard error of a binomial proportion.
pub fn binomial_se(p: f64, trials: usize) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// Least-squares slope and intercept of `ys` against `xs`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let mx = mean(xs);
    let my = mean(ys);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Bin index of `x` among `bins` equal cells of `[lo, hi]`; values outside
/// fall in bin `bins` (overflow).
#[inline]
pub fn bin_index(x: f64, lo: f64, hi: f64, bins: usize) -> usize {
    if !(x >= lo && x <= hi) {
        return bins;
    }
    (((x - lo) / (hi - lo) * bins as f64) as usize).min(bins - 1)
}

/// Half the L1 distance between the binned empirical laws of `a` and `b`.
pub fn binned_tv_1d(a: &[f64], b: &[f64], lo: f64, hi: f64, bins: usize) -> f64 {
    let mut ca = vec![0.0; bins + 1];
    let mut cb = vec![0.0; bins + 1];
    for &x in a {
        ca[bin_index(x, lo, hi, bins)] += 1.0 / a.len() as f64;
    }
    for &x in b {
        cb[bin_index(x, lo, hi, bins)] += 1.0 / b.len() as f64;
    }
    0.5 * ca.iter().zip(&cb).map(|(p, q)| (p - q).abs()).sum::<f64>()
}

/// Two-sided 97.5% normal quantile.
pub const Z95: f64 = 1.959963984540054;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_of_perfect_grid_is_half_step() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        let d = ks_distance(&xs, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.005).abs() < 1e-12);
    }

    #[test]
    fn ks_detects_shift() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0 + 0.2).collect();
        assert!(ks_distance(&xs, |x| x.clamp(0.0, 1.0)) > 0.19);
    }

    #[test]
    fn moments_and_fit() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert!((variance(&xs) - 5.0 / 3.0).abs() < 1e-15);
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.5 * x).collect();
        let (s, b) = linear_fit(&xs, &ys);
        assert!((s + 0.5).abs() < 1e-14 && (b - 3.0).abs() < 1e-14);
        assert_eq!(binomial_se(1.0, 10), 0.0);
    }
}
