//! Report document assembled by the pipeline.

use std::collections::BTreeMap;
use std::path::PathBuf;

use ce_core::distfit::{DistributionFit, DistributionKind, PlotRow};
use ce_core::efa::{
    AdequacyReport, CrossValReport, FactorModel, ParallelAnalysis, SelectionOutcome,
};
use ce_core::lifespan::{PairwiseComparisonTable, QuartileSummary};
use ce_core::regress::RegressionFit;
use ce_core::stats::{BootstrapMode, BootstrapResult, CorrelationResult, DescriptiveStats};
use ce_core::FilterReport;
use ce_ingest::ParseReport;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::config::AnalysisConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    pub stats: DescriptiveStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionFitRow {
    pub metric: String,
    pub lognormal: Option<DistributionFit>,
    pub exponential: Option<DistributionFit>,
    pub pareto: Option<DistributionFit>,
    /// Fits that could not be computed, with the reason.
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub metric: String,
    pub kind: DistributionKind,
    pub rows: Vec<PlotRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdequacySection {
    /// All screened attributes, before any removal.
    pub initial: AdequacyReport,
    pub selection: SelectionOutcome,
    pub retained: AdequacyReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorCountSource {
    ParallelAnalysis,
    Override,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSection {
    pub parallel_analysis: ParallelAnalysis,
    pub factor_count: usize,
    pub factor_count_source: FactorCountSource,
    pub model: FactorModel,
    /// Factor indices carrying the active and passive engagement scores.
    pub aes_factor: Option<usize>,
    pub pes_factor: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSection {
    pub aes: DescriptiveStats,
    pub pes: DescriptiveStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub score: String,
    pub metric: String,
    pub overall: CorrelationResult,
    pub low: CorrelationResult,
    pub high: CorrelationResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSection {
    /// Median of the active engagement score; scores at or below it are "low".
    pub cutpoint: f64,
    pub n_low: usize,
    pub n_high: usize,
    pub rows: Vec<CorrelationRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapRow {
    pub score: String,
    pub metric: String,
    pub rho_low: f64,
    pub rho_high: f64,
    /// High-group metric values against low-group metric values, truncated to
    /// the shorter group, each resampled independently.
    pub literal: BootstrapResult,
    /// ρ(high) − ρ(low) with joint (score, metric) resampling inside each group.
    pub paired_difference: BootstrapResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSection {
    /// Mode whose result answers the significance question by default.
    pub primary_mode: BootstrapMode,
    pub rows: Vec<BootstrapRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercentEffect {
    pub term: String,
    pub effect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    /// Dynamics metric whose logarithm is the response.
    pub response: String,
    /// Offset added before the logarithm, if zeros forced one.
    pub offset: Option<f64>,
    pub fit: RegressionFit,
    pub percent_effects: Vec<PercentEffect>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogOffset {
    pub metric: String,
    pub offset: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeInteractionSection {
    /// Release-age cutpoints in days.
    pub cutpoints: [f64; 3],
    pub group_sizes: [usize; 4],
    pub excluded_without_release: usize,
    pub predictor_offsets: Vec<LogOffset>,
    pub models: Vec<RegressionModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricQuartiles {
    pub metric: String,
    pub quartiles: Vec<QuartileSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifespanSection {
    /// Active-lifespan cutpoints in days.
    pub cutpoints: [f64; 3],
    pub group_sizes: [usize; 4],
    pub max_observed: f64,
    pub summaries: Vec<MetricQuartiles>,
    pub comparisons: PairwiseComparisonTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Skipped,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageNote {
    pub stage: String,
    pub status: StageStatus,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config: AnalysisConfig,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub rng: String,
    /// Seed handed to each randomized step.
    pub stage_seeds: BTreeMap<String, u64>,
    pub reference_date: DateTime<Utc>,
    pub dataset: Option<DatasetInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub provenance: Provenance,
    pub parse: Option<ParseReport>,
    pub filter: FilterReport,
    pub descriptive: Vec<MetricSummary>,
    pub dynamics: Vec<MetricSummary>,
    pub distribution_fits: Option<Vec<DistributionFitRow>>,
    pub plot_data: Option<Vec<PlotSeries>>,
    pub adequacy: Option<AdequacySection>,
    pub factor_model: Option<FactorSection>,
    pub scores: Option<ScoreSection>,
    pub cross_validation: Option<CrossValReport>,
    pub correlations: Option<CorrelationSection>,
    pub bootstrap: Option<BootstrapSection>,
    pub regression: Option<Vec<RegressionModel>>,
    pub age_interaction: Option<AgeInteractionSection>,
    pub lifespan: Option<LifespanSection>,
    pub notes: Vec<StageNote>,
}

impl AnalysisReport {
    pub fn has_failures(&self) -> bool {
        self.notes.iter().any(|n| n.status == StageStatus::Failed)
    }
}
