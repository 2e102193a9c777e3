use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Moments and order statistics of one sample.
///
/// Variance uses the n−1 denominator. Skewness and kurtosis are the
/// bias-adjusted sample estimators (kurtosis in excess form) and are `None`
/// when fewer than 3 (resp. 4) observations are available or the sample is constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub n: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
    pub min: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of an ascending slice, `q` in [0, 1].
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sorted_copy(sample: &[f64]) -> Vec<f64> {
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
}

pub fn quantile(sample: &[f64], q: f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(CoreError::EmptySample);
    }
    Ok(quantile_sorted(&sorted_copy(sample), q))
}

pub fn median(sample: &[f64]) -> Result<f64> {
    quantile(sample, 0.5)
}

pub fn mean(sample: &[f64]) -> f64 {
    sample.iter().sum::<f64>() / sample.len() as f64
}

pub fn descriptive_stats(sample: &[f64]) -> Result<DescriptiveStats> {
    let n = sample.len();
    if n == 0 {
        return Err(CoreError::EmptySample);
    }
    let nf = n as f64;
    let mean = mean(sample);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in sample {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    let std_dev = if n > 1 {
        (m2 * nf / (nf - 1.0)).sqrt()
    } else {
        0.0
    };
    let variance_is_zero = m2 <= (mean.abs() * 1e-12).powi(2);

    let skewness = (n >= 3 && !variance_is_zero).then(|| {
        let g1 = m3 / m2.powf(1.5);
        (nf * (nf - 1.0)).sqrt() / (nf - 2.0) * g1
    });
    let kurtosis = (n >= 4 && !variance_is_zero).then(|| {
        let g2 = m4 / (m2 * m2) - 3.0;
        (nf - 1.0) / ((nf - 2.0) * (nf - 3.0)) * ((nf + 1.0) * g2 + 6.0)
    });

    let sorted = sorted_copy(sample);
    Ok(DescriptiveStats {
        n,
        mean,
        std_dev,
        skewness,
        kurtosis,
        min: sorted[0],
        p25: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        p75: quantile_sorted(&sorted, 0.75),
        max: sorted[n - 1],
    })
}
