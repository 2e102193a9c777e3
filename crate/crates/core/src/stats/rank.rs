use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{CoreError, Result};
use crate::stats::descriptive::{quantile_sorted, sorted_copy};

/// Midranks (1-based); tied values share the average of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let midrank = (start + end + 1) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = midrank;
        }
        start = end;
    }
    ranks
}

pub(crate) fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
}

fn is_constant(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[0] == w[1])
}

/// Spearman's rank correlation with a two-sided p-value from the t approximation.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    if x.len() != y.len() {
        return Err(CoreError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(CoreError::InsufficientData { needed: 3, got: n });
    }
    if is_constant(x) || is_constant(y) {
        return Err(CoreError::DegenerateInput(
            "rank correlation of a constant vector".into(),
        ));
    }
    let rho = pearson(&average_ranks(x), &average_ranks(y));
    Ok(CorrelationResult {
        rho,
        p_value: correlation_p_value(rho, n),
        n,
    })
}

/// Two-sided p-value of a correlation via t = r·sqrt((n−2)/(1−r²)).
pub fn correlation_p_value(rho: f64, n: usize) -> f64 {
    let df = n as f64 - 2.0;
    let denom = 1.0 - rho * rho;
    if denom <= 0.0 {
        return 0.0;
    }
    let t = rho * (df / denom).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianSplit {
    pub low: Vec<usize>,
    pub high: Vec<usize>,
    pub cutpoint: f64,
}

/// Splits at the 50th percentile; scores at or below the cutpoint are "low".
pub fn median_split(scores: &[f64]) -> Result<MedianSplit> {
    if scores.len() < 2 {
        return Err(CoreError::EmptySample);
    }
    let cutpoint = quantile_sorted(&sorted_copy(scores), 0.5);
    let (low, high): (Vec<usize>, Vec<usize>) =
        (0..scores.len()).partition(|&i| scores[i] <= cutpoint);
    Ok(MedianSplit {
        low,
        high,
        cutpoint,
    })
}

/// Sorted order of one variable with its tie blocks, used to rank bootstrap
/// resamples in linear time from multiplicity counts.
pub(crate) struct RankIndex {
    order: Vec<usize>,
    /// First sorted position of each tie block.
    block_starts: Vec<usize>,
}

impl RankIndex {
    pub(crate) fn new(values: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let mut block_starts = Vec::new();
        for (pos, &idx) in order.iter().enumerate() {
            if pos == 0 || values[order[pos - 1]] != values[idx] {
                block_starts.push(pos);
            }
        }
        Self {
            order,
            block_starts,
        }
    }

    /// Midrank of every original observation within a resample where
    /// observation i appears `counts[i]` times. Entries with zero count are
    /// left at 0.
    pub(crate) fn resample_ranks(&self, counts: &[u32], ranks: &mut [f64]) {
        let mut seen = 0u64;
        for (b, &start) in self.block_starts.iter().enumerate() {
            let end = self
                .block_starts
                .get(b + 1)
                .copied()
                .unwrap_or(self.order.len());
            let members = &self.order[start..end];
            let m: u64 = members.iter().map(|&i| u64::from(counts[i])).sum();
            if m == 0 {
                continue;
            }
            let midrank = seen as f64 + (m as f64 + 1.0) / 2.0;
            for &i in members {
                ranks[i] = midrank;
            }
            seen += m;
        }
    }
}
