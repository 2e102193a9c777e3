//! Lifespan quartiles and pairwise quartile comparisons with Bonferroni correction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::stats::descriptive::{descriptive_stats, quantile_sorted, sorted_copy};
use crate::stats::ranksum::{compare_two_groups, GroupComparisonResult};

pub const QUARTILE_LABELS: [&str; 4] = ["Q1", "Q2", "Q3", "Q4"];

/// The six unordered quartile pairs in table order.
pub const QUARTILE_PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Empirical 25/50/75 percentiles, required to be strictly increasing.
pub fn quartile_cutpoints(values: &[f64]) -> Result<[f64; 3]> {
    if values.is_empty() {
        return Err(CoreError::EmptySample);
    }
    let sorted = sorted_copy(values);
    let cuts = [
        quantile_sorted(&sorted, 0.25),
        quantile_sorted(&sorted, 0.5),
        quantile_sorted(&sorted, 0.75),
    ];
    if !(cuts[0] < cuts[1] && cuts[1] < cuts[2]) {
        return Err(CoreError::DegeneratePartition(cuts.to_vec()));
    }
    Ok(cuts)
}

/// Quartile of a value; a value equal to a cutpoint belongs to the lower quartile.
pub fn quartile_index(value: f64, cutpoints: &[f64; 3]) -> usize {
    cutpoints.iter().take_while(|&&c| value > c).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuartilePartition {
    pub cutpoints: [f64; 3],
    pub groups: [Vec<usize>; 4],
    pub max_observed: f64,
}

impl QuartilePartition {
    pub fn sizes(&self) -> [usize; 4] {
        [0, 1, 2, 3].map(|q| self.groups[q].len())
    }

    pub fn len(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Values of one quartile, picked from a column aligned with the partitioned records.
    pub fn select(&self, quartile: usize, values: &[f64]) -> Vec<f64> {
        self.groups[quartile].iter().map(|&i| values[i]).collect()
    }
}

pub fn partition_lifespan_quartiles(lifespan_days: &[u64]) -> Result<QuartilePartition> {
    let n = lifespan_days.len();
    if n < 8 {
        return Err(CoreError::InsufficientData { needed: 8, got: n });
    }
    if let Some(index) = lifespan_days.iter().position(|&d| d == 0) {
        return Err(CoreError::NonPositiveValue { index, value: 0.0 });
    }
    let days: Vec<f64> = lifespan_days.iter().map(|&d| d as f64).collect();
    let cutpoints = quartile_cutpoints(&days)?;
    let mut groups: [Vec<usize>; 4] = Default::default();
    for (i, &d) in days.iter().enumerate() {
        groups[quartile_index(d, &cutpoints)].push(i);
    }
    Ok(QuartilePartition {
        cutpoints,
        groups,
        max_observed: days.iter().copied().fold(f64::MIN, f64::max),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuartileSummary {
    pub quartile: String,
    pub n: usize,
    pub median: f64,
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
}

fn check_aligned(values: &[f64], partition: &QuartilePartition) -> Result<()> {
    let needed = partition
        .groups
        .iter()
        .flatten()
        .max()
        .map_or(0, |&m| m + 1);
    if values.len() < needed {
        return Err(CoreError::LengthMismatch(needed, values.len()));
    }
    for (q, group) in partition.groups.iter().enumerate() {
        if group.is_empty() {
            return Err(CoreError::EmptyGroup(QUARTILE_LABELS[q].into()));
        }
    }
    Ok(())
}

pub fn quartile_summary(
    values: &[f64],
    partition: &QuartilePartition,
) -> Result<Vec<QuartileSummary>> {
    check_aligned(values, partition)?;
    (0..4)
        .map(|q| {
            let stats = descriptive_stats(&partition.select(q, values))?;
            Ok(QuartileSummary {
                quartile: QUARTILE_LABELS[q].into(),
                n: stats.n,
                median: stats.median,
                skewness: stats.skewness,
                kurtosis: stats.kurtosis,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCell {
    pub metric: String,
    pub group_a: String,
    pub group_b: String,
    pub result: GroupComparisonResult,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparisonTable {
    pub alpha: f64,
    pub test_count: usize,
    pub corrected_alpha: f64,
    pub cells: Vec<ComparisonCell>,
}

impl PairwiseComparisonTable {
    /// Comparison of `a` against `b`; reversed pairs are derived from the stored cell.
    pub fn cell(&self, metric: &str, a: &str, b: &str) -> Option<GroupComparisonResult> {
        self.cells.iter().find_map(|c| {
            if c.metric != metric {
                None
            } else if c.group_a == a && c.group_b == b {
                Some(c.result)
            } else if c.group_a == b && c.group_b == a {
                let r = c.result;
                Some(GroupComparisonResult {
                    u_statistic: (r.n_a * r.n_b) as f64 - r.u_statistic,
                    p_value: r.p_value,
                    cliffs_delta: -r.cliffs_delta,
                    n_a: r.n_b,
                    n_b: r.n_a,
                })
            } else {
                None
            }
        })
    }
}

/// Mann–Whitney U, p and Cliff's delta for every quartile pair of every metric.
/// The Bonferroni divisor defaults to metrics × 6 pairs.
pub fn compare_groups(
    metrics: &[(String, Vec<f64>)],
    partition: &QuartilePartition,
    alpha: f64,
    divisor: Option<usize>,
) -> Result<PairwiseComparisonTable> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CoreError::InvalidArgument(format!(
            "alpha {alpha} outside (0, 1)"
        )));
    }
    if divisor == Some(0) {
        return Err(CoreError::InvalidArgument(
            "Bonferroni divisor must be positive".into(),
        ));
    }
    for (_, values) in metrics {
        check_aligned(values, partition)?;
    }
    let test_count = divisor.unwrap_or(metrics.len() * QUARTILE_PAIRS.len());
    let corrected_alpha = alpha / test_count as f64;

    let per_metric: Vec<Vec<ComparisonCell>> = metrics
        .par_iter()
        .map(|(name, values)| {
            let groups: Vec<Vec<f64>> = (0..4).map(|q| partition.select(q, values)).collect();
            QUARTILE_PAIRS
                .iter()
                .map(|&(a, b)| {
                    let result = compare_two_groups(&groups[a], &groups[b])?;
                    Ok(ComparisonCell {
                        metric: name.clone(),
                        group_a: QUARTILE_LABELS[a].into(),
                        group_b: QUARTILE_LABELS[b].into(),
                        significant: result.p_value < corrected_alpha,
                        result,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    Ok(PairwiseComparisonTable {
        alpha,
        test_count,
        corrected_alpha,
        cells: per_metric.into_iter().flatten().collect(),
    })
}
