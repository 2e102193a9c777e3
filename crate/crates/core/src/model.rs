//! Repository records, active lifespan, per-month normalization and the
//! dataset exclusion filters.

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Average month length used to turn lifespan days into months.
pub const DAYS_PER_MONTH: f64 = 30.44;

/// Recency window for the "no commits in the last six months" rule.
pub const RECENCY_WINDOW_DAYS: i64 = 183;

/// Raw attributes of one repository as collected from the source dataset or API.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepositoryRecord {
    pub owner: String,
    pub name: String,
    pub created_at: DateTime<Utc>,
    pub last_commit: DateTime<Utc>,
    pub is_fork: bool,
    pub license_id: String,
    pub commits: u64,
    pub contributors: u64,
    pub watchers: u64,
    pub stargazers: u64,
    pub forks: u64,
    pub total_issues: u64,
    pub open_issues: u64,
    pub total_pull_requests: u64,
    pub open_pull_requests: u64,
    pub merged_pull_requests: u64,
    pub resolved_issues: u64,
    pub issue_comments: u64,
    pub pr_comments: u64,
    pub branches: u64,
    pub releases: u64,
    pub last_release: Option<DateTime<Utc>>,
}

impl RepositoryRecord {
    pub fn full_name(&self) -> String {
        format!("{}/{}", self.owner, self.name)
    }

    /// Checks the count relations every well-formed record must satisfy.
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (
                "open_issues",
                self.open_issues,
                "total_issues",
                self.total_issues,
            ),
            (
                "resolved_issues",
                self.resolved_issues,
                "total_issues",
                self.total_issues,
            ),
            (
                "open_pull_requests",
                self.open_pull_requests,
                "total_pull_requests",
                self.total_pull_requests,
            ),
            (
                "merged_pull_requests",
                self.merged_pull_requests,
                "total_pull_requests",
                self.total_pull_requests,
            ),
        ];
        for (part_name, part, total_name, total) in checks {
            if part > total {
                return Err(CoreError::InconsistentCounts(format!(
                    "{}: {part_name}={part} exceeds {total_name}={total}",
                    self.full_name()
                )));
            }
        }
        Ok(())
    }

    pub fn active_lifespan(&self) -> Result<ActiveLifespan> {
        compute_active_lifespan(self.created_at, self.last_commit)
    }

    /// Days from creation to the last release, if the repository has one.
    pub fn release_age_days(&self) -> Option<i64> {
        self.last_release
            .map(|release| (release - self.created_at).num_days())
    }
}

/// Whole calendar days between creation and last commit, and the same span in months.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActiveLifespan {
    pub days: u64,
    pub months: f64,
}

impl ActiveLifespan {
    pub fn from_days(days: u64) -> Result<Self> {
        if days == 0 {
            return Err(CoreError::ZeroLifespan);
        }
        Ok(Self {
            days,
            months: days as f64 / DAYS_PER_MONTH,
        })
    }
}

/// Partial days are truncated.
pub fn compute_active_lifespan(
    created_at: DateTime<Utc>,
    last_commit: DateTime<Utc>,
) -> Result<ActiveLifespan> {
    if last_commit < created_at {
        return Err(CoreError::InvalidOrder {
            created_at,
            last_commit,
        });
    }
    let days = (last_commit - created_at).num_days();
    ActiveLifespan::from_days(days as u64)
}

pub fn normalize_per_month(raw_count: u64, lifespan: &ActiveLifespan) -> Result<f64> {
    if lifespan.days == 0 {
        return Err(CoreError::ZeroLifespan);
    }
    Ok(raw_count as f64 / lifespan.months)
}

pub fn compute_ratio(successes: u64, total: u64) -> Result<f64> {
    if total == 0 {
        return Err(CoreError::ZeroTotal);
    }
    if successes > total {
        return Err(CoreError::InconsistentCounts(format!(
            "ratio numerator {successes} exceeds total {total}"
        )));
    }
    Ok(successes as f64 / total as f64)
}

/// Names of the per-month and ratio attributes, in report order.
pub const METRIC_NAMES: [&str; 15] = [
    "CPM", "WT/m", "CNT/m", "TI/m", "OI/m", "TPR/m", "OPR/m", "IC/m", "PRC/m", "PRAR", "IRR",
    "FK/m", "STR/m", "BPM", "RPM",
];

/// The thirteen engagement attributes screened for factor analysis.
pub const ENGAGEMENT_ATTRIBUTES: [&str; 13] = [
    "CPM", "WT/m", "CNT/m", "TI/m", "OI/m", "TPR/m", "OPR/m", "IC/m", "PRC/m", "PRAR", "IRR",
    "FK/m", "STR/m",
];

/// Per-month rates and ratio metrics for one repository.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub cpm: f64,
    pub wt_m: f64,
    pub cnt_m: f64,
    pub ti_m: f64,
    pub oi_m: f64,
    pub tpr_m: f64,
    pub opr_m: f64,
    pub ic_m: f64,
    pub prc_m: f64,
    pub fk_m: f64,
    pub str_m: f64,
    pub bpm: f64,
    pub rpm: f64,
    pub prar: f64,
    pub irr: f64,
}

impl MetricVector {
    pub fn from_record(record: &RepositoryRecord) -> Result<Self> {
        let lifespan = record.active_lifespan()?;
        let rate = |count: u64| normalize_per_month(count, &lifespan);
        Ok(Self {
            cpm: rate(record.commits)?,
            wt_m: rate(record.watchers)?,
            cnt_m: rate(record.contributors)?,
            ti_m: rate(record.total_issues)?,
            oi_m: rate(record.open_issues)?,
            tpr_m: rate(record.total_pull_requests)?,
            opr_m: rate(record.open_pull_requests)?,
            ic_m: rate(record.issue_comments)?,
            prc_m: rate(record.pr_comments)?,
            fk_m: rate(record.forks)?,
            str_m: rate(record.stargazers)?,
            bpm: rate(record.branches)?,
            rpm: rate(record.releases)?,
            prar: compute_ratio(record.merged_pull_requests, record.total_pull_requests)?,
            irr: compute_ratio(record.resolved_issues, record.total_issues)?,
        })
    }

    /// Looks a metric up by its short name (see [`METRIC_NAMES`]); `RR` aliases `IRR`.
    pub fn get(&self, name: &str) -> Option<f64> {
        let value = match name {
            "CPM" => self.cpm,
            "WT/m" => self.wt_m,
            "CNT/m" => self.cnt_m,
            "TI/m" => self.ti_m,
            "OI/m" => self.oi_m,
            "TPR/m" => self.tpr_m,
            "OPR/m" => self.opr_m,
            "IC/m" => self.ic_m,
            "PRC/m" => self.prc_m,
            "PRAR" => self.prar,
            "IRR" | "RR" => self.irr,
            "FK/m" => self.fk_m,
            "STR/m" => self.str_m,
            "BPM" => self.bpm,
            "RPM" => self.rpm,
            _ => return None,
        };
        Some(value)
    }
}

/// Extracts one named metric column from a slice of metric vectors.
pub fn metric_column(metrics: &[MetricVector], name: &str) -> Result<Vec<f64>> {
    metrics
        .iter()
        .map(|m| {
            m.get(name)
                .ok_or_else(|| CoreError::UnknownMetric(name.to_string()))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionCriterion {
    /// Commit activity within the recency window before the reference date.
    RecentlyActive,
    Fork,
    FewerThanThreeContributors,
    NoIssues,
    NoPullRequests,
    ZeroLifespan,
}

impl ExclusionCriterion {
    pub const ALL: [ExclusionCriterion; 6] = [
        ExclusionCriterion::RecentlyActive,
        ExclusionCriterion::Fork,
        ExclusionCriterion::FewerThanThreeContributors,
        ExclusionCriterion::NoIssues,
        ExclusionCriterion::NoPullRequests,
        ExclusionCriterion::ZeroLifespan,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub input_count: usize,
    pub per_criterion_counts: BTreeMap<ExclusionCriterion, usize>,
    pub retained_count: usize,
    pub reference_date: DateTime<Utc>,
}

/// Every exclusion criterion the record matches; empty means retained.
pub fn exclusion_reasons(
    record: &RepositoryRecord,
    reference_date: DateTime<Utc>,
) -> Vec<ExclusionCriterion> {
    let mut reasons = Vec::new();
    let cutoff = reference_date - Duration::days(RECENCY_WINDOW_DAYS);
    if record.last_commit > cutoff {
        reasons.push(ExclusionCriterion::RecentlyActive);
    }
    if record.is_fork {
        reasons.push(ExclusionCriterion::Fork);
    }
    if record.contributors < 3 {
        reasons.push(ExclusionCriterion::FewerThanThreeContributors);
    }
    if record.total_issues == 0 {
        reasons.push(ExclusionCriterion::NoIssues);
    }
    if record.total_pull_requests == 0 {
        reasons.push(ExclusionCriterion::NoPullRequests);
    }
    if record.active_lifespan().is_err() {
        reasons.push(ExclusionCriterion::ZeroLifespan);
    }
    reasons
}

pub fn apply_exclusion_filters(
    records: &[RepositoryRecord],
    reference_date: DateTime<Utc>,
) -> (Vec<RepositoryRecord>, FilterReport) {
    let mut per_criterion_counts: BTreeMap<ExclusionCriterion, usize> =
        ExclusionCriterion::ALL.iter().map(|c| (*c, 0)).collect();
    let mut retained = Vec::new();
    for record in records {
        let reasons = exclusion_reasons(record, reference_date);
        if reasons.is_empty() {
            retained.push(record.clone());
        }
        for reason in reasons {
            *per_criterion_counts.entry(reason).or_default() += 1;
        }
    }
    let report = FilterReport {
        input_count: records.len(),
        per_criterion_counts,
        retained_count: retained.len(),
        reference_date,
    };
    (retained, report)
}
