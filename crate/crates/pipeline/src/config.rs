//! Analysis configuration, read from TOML and overridable from the command line.

use std::path::{Path, PathBuf};

use ce_core::regress::ZeroPolicy;
use ce_core::stats::BootstrapMode;
use ce_ingest::ColumnMapping;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::PipelineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub dataset: Option<PathBuf>,
    /// `owner/name` entries for live ingestion.
    pub repositories: Vec<String>,
    pub column_mapping: ColumnMapping,
    /// Recency cutoff anchor; unset means today at 00:00 UTC.
    pub reference_date: Option<DateTime<Utc>>,
    pub msa_threshold: f64,
    pub vif_threshold: f64,
    /// Overrides the parallel-analysis suggestion.
    pub factor_count: Option<usize>,
    pub parallel_simulations: usize,
    pub split_ratio: f64,
    pub bootstrap_iterations: usize,
    pub bootstrap_mode: BootstrapMode,
    pub alpha: f64,
    /// Overrides the computed test count (metrics × quartile pairs).
    pub bonferroni_divisor: Option<usize>,
    pub zero_policy: ZeroPolicy,
    pub seed: Option<u64>,
    pub distfit: bool,
    pub age_interaction: bool,
    /// Emit per-observation CDF/QQ rows for every fitted distribution.
    pub plot_data: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            repositories: Vec::new(),
            column_mapping: ColumnMapping::default(),
            reference_date: None,
            msa_threshold: 0.5,
            vif_threshold: 5.0,
            factor_count: None,
            parallel_simulations: 100,
            split_ratio: 0.7,
            bootstrap_iterations: 10_000,
            bootstrap_mode: BootstrapMode::Literal,
            alpha: 0.05,
            bonferroni_divisor: None,
            zero_policy: ZeroPolicy::Offset,
            seed: None,
            distfit: true,
            age_interaction: true,
            plot_data: false,
        }
    }
}

impl AnalysisConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text)
            .map_err(|e| PipelineError::Usage(format!("invalid configuration: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Usage(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let fail = |m: String| Err(PipelineError::Usage(m));
        if !(self.msa_threshold > 0.0 && self.msa_threshold < 1.0) {
            return fail(format!(
                "msa_threshold {} outside (0, 1)",
                self.msa_threshold
            ));
        }
        if !(self.vif_threshold >= 1.0) {
            return fail(format!("vif_threshold {} below 1", self.vif_threshold));
        }
        if self.factor_count == Some(0) {
            return fail("factor_count must be positive".into());
        }
        if self.parallel_simulations < ce_core::efa::MIN_SIMULATIONS {
            return fail(format!(
                "parallel_simulations must be at least {}",
                ce_core::efa::MIN_SIMULATIONS
            ));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return fail(format!("split_ratio {} outside (0, 1)", self.split_ratio));
        }
        if self.bootstrap_iterations < ce_core::stats::bootstrap::MIN_ITERATIONS {
            return fail(format!(
                "bootstrap_iterations must be at least {}",
                ce_core::stats::bootstrap::MIN_ITERATIONS
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail(format!("alpha {} outside (0, 1)", self.alpha));
        }
        if self.bonferroni_divisor == Some(0) {
            return fail("bonferroni_divisor must be positive".into());
        }
        Ok(())
    }

    /// The seed, required by every randomized stage.
    pub fn require_seed(&self) -> Result<u64, PipelineError> {
        self.seed.ok_or_else(|| {
            PipelineError::Usage("a seed is required (config `seed` or --seed)".into())
        })
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("configuration serializes");
        hex::encode(Sha256::digest(json))
    }
}
