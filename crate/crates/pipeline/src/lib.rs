//! Engagement-analysis pipeline: configuration, stage orchestration and report output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod emit;
mod error;
mod report;
mod run;

pub use config::AnalysisConfig;
pub use emit::{
    emit_report, read_report, write_metrics, write_scores, ReportFormat, PROVENANCE_FILE,
    REPORT_FILE,
};
pub use error::PipelineError;
pub use report::*;
pub use run::{run_pipeline, run_stages, PipelineOutput, Stage, StagePlan};
