//! Small statistics helpers used by the estimators and checks.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Sample mean and standard error of the mean.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub count: usize,
}

/// Mean and `sd / sqrt(n)` with the unbiased sample variance. The sum runs
/// in slice order so results do not depend on how the values were produced.
pub fn mean_se(xs: &[f64]) -> MeanSe {
    let n = xs.len();
    if n == 0 {
        return MeanSe::default();
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let se = if n > 1 {
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    MeanSe { mean, se, count: n }
}

/// Linear-interpolated quantile of finite values; `None` when empty.
pub fn quantile(xs: &[f64], q: f64) -> Option<f64> {
    let mut v: Vec<f64> = xs.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

pub fn median(xs: &[f64]) -> Option<f64> {
    quantile(xs, 0.5)
}

/// Total-variation distance between two distributions over the same keys.
pub fn total_variation<'a, I>(pairs: I) -> f64
where
    I: IntoIterator<Item = (&'a f64, &'a f64)>,
{
    0.5 * pairs.into_iter().map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Pearson chi-square goodness of fit; returns `(statistic, p_value)`.
/// Bins are merged left to right until each has expected count >= 5.
pub fn chi_square_gof(observed: &[u64], expected_probs: &[f64]) -> (f64, f64) {
    let total: u64 = observed.iter().sum();
    let n = total as f64;
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&ob, &p) in observed.iter().zip(expected_probs) {
        o += ob as f64;
        e += p * n;
        if e >= 5.0 {
            bins.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => bins.push((o, e)),
        }
    }
    let stat: f64 = bins.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let df = bins.len().saturating_sub(1).max(1) as f64;
    let p = 1.0 - ChiSquared::new(df).expect("df > 0").cdf(stat);
    (stat, p)
}

/// Ordinary least squares `y = a + b x`; returns `(slope, slope_se)`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let se = if x.len() > 2 {
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, se)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_se() {
        let m = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_se(&[7.0]).se, 0.0);
    }

    #[test]
    fn quantiles() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(quantile(&[0.0, 10.0], 0.95), Some(9.5));
        assert_eq!(median(&[f64::INFINITY]), None);
    }

    #[test]
    fn chi_square_accepts_exact_counts() {
        let (stat, p) = chi_square_gof(&[250, 250, 500], &[0.25, 0.25, 0.5]);
        assert_eq!(stat, 0.0);
        assert!((p - 1.0).abs() < 1e-12);
        let (_, p) = chi_square_gof(&[400, 100, 500], &[0.25, 0.25, 0.5]);
        assert!(p < 1e-10);
    }

    #[test]
    fn exact_power_law_slope() {
        let x: Vec<f64> = [1e3f64, 1e4, 1e5].iter().map(|v| v.ln()).collect();
        let y: Vec<f64> = [1e3f64, 1e4, 1e5].iter().map(|n| (3.0 / n.sqrt()).ln()).collect();
        let (b, se) = ols_slope(&x, &y);
        assert!((b + 0.5).abs() < 1e-9);
        assert!(se < 1e-9);
    }
}
