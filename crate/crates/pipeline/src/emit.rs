//! Writes an [`AnalysisReport`] as one JSON document or as a bundle of CSV tables.

use std::fs;
use std::path::{Path, PathBuf};

use ce_core::distfit::{DistributionFit, DistributionKind};
use ce_core::efa::{AdequacyReport, SplitFit};
use ce_core::model::ExclusionCriterion;
use ce_core::stats::BootstrapResult;
use ce_core::{MetricVector, RepositoryRecord};
use serde::{Deserialize, Serialize};

use crate::error::PipelineError;
use crate::report::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
}

pub const REPORT_FILE: &str = "report.json";
pub const PROVENANCE_FILE: &str = "provenance.json";

fn io_error(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Io(format!("{}: {e}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_error(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_error(path, e))
}

fn num(x: f64) -> String {
    x.to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Accumulates rows for one CSV file.
struct Table {
    name: &'static str,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &'static str, header: &[&str]) -> Self {
        Self {
            name,
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn row(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len(), "{}", self.name);
        self.rows.push(row);
    }

    fn write(&self, dir: &Path) -> Result<PathBuf, PipelineError> {
        let path = dir.join(format!("{}.csv", self.name));
        let mut writer = csv::Writer::from_path(&path).map_err(|e| io_error(&path, e))?;
        writer
            .write_record(&self.header)
            .map_err(|e| io_error(&path, e))?;
        for row in &self.rows {
            writer.write_record(row).map_err(|e| io_error(&path, e))?;
        }
        writer.flush().map_err(|e| io_error(&path, e))?;
        Ok(path)
    }
}

fn criterion_name(c: ExclusionCriterion) -> String {
    serde_json::to_value(c)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn kind_name(kind: DistributionKind) -> &'static str {
    match kind {
        DistributionKind::Lognormal => "lognormal",
        DistributionKind::Exponential => "exponential",
        DistributionKind::Pareto => "pareto",
    }
}

fn filter_table(report: &AnalysisReport) -> Table {
    let mut t = Table::new("filter", &["item", "count"]);
    let f = &report.filter;
    t.row(vec!["input".into(), f.input_count.to_string()]);
    for (criterion, count) in &f.per_criterion_counts {
        t.row(vec![criterion_name(*criterion), count.to_string()]);
    }
    t.row(vec!["retained".into(), f.retained_count.to_string()]);
    t
}

fn descriptive_table(name: &'static str, rows: &[MetricSummary]) -> Table {
    let mut t = Table::new(
        name,
        &[
            "metric", "n", "mean", "std_dev", "skewness", "kurtosis", "min", "p25", "median",
            "p75", "max",
        ],
    );
    for r in rows {
        let s = &r.stats;
        t.row(vec![
            r.metric.clone(),
            s.n.to_string(),
            num(s.mean),
            num(s.std_dev),
            opt(s.skewness),
            opt(s.kurtosis),
            num(s.min),
            num(s.p25),
            num(s.median),
            num(s.p75),
            num(s.max),
        ]);
    }
    t
}

fn fit_tables(rows: &[DistributionFitRow]) -> Table {
    let mut t = Table::new(
        "distribution_fits",
        &[
            "metric",
            "distribution",
            "shape",
            "loc",
            "scale",
            "pareto_constant",
            "ks_statistic",
            "n",
            "note",
        ],
    );
    for r in rows {
        for fit in [&r.lognormal, &r.exponential, &r.pareto]
            .into_iter()
            .flatten()
        {
            let DistributionFit {
                kind,
                shape,
                loc,
                scale,
                pareto_constant,
                ks_statistic,
                n,
                degenerate,
            } = fit;
            t.row(vec![
                r.metric.clone(),
                kind_name(*kind).into(),
                num(*shape),
                num(*loc),
                num(*scale),
                opt(*pareto_constant),
                num(*ks_statistic),
                n.to_string(),
                degenerate.clone().unwrap_or_default(),
            ]);
        }
        for error in &r.errors {
            let (kind, message) = error.split_once(": ").unwrap_or(("", error));
            let mut row = vec![r.metric.clone(), kind.into()];
            row.extend(std::iter::repeat_n(String::new(), 6));
            row.push(message.into());
            t.row(row);
        }
    }
    t
}

fn plot_table(series: &[PlotSeries]) -> Table {
    let mut t = Table::new(
        "plot_data",
        &[
            "metric",
            "distribution",
            "x",
            "ecdf",
            "fitted_cdf",
            "qq_theoretical",
        ],
    );
    for s in series {
        for r in &s.rows {
            t.row(vec![
                s.metric.clone(),
                kind_name(s.kind).into(),
                num(r.x),
                num(r.ecdf),
                num(r.fitted_cdf),
                num(r.qq_theoretical),
            ]);
        }
    }
    t
}

fn adequacy_tables(a: &AdequacySection) -> Vec<Table> {
    let mut attributes = Table::new("adequacy", &["attribute", "msa", "vif", "retained"]);
    for attr in &a.initial.attributes {
        attributes.row(vec![
            attr.name.clone(),
            opt(attr.msa),
            num(attr.vif),
            a.selection.retained.contains(&attr.name).to_string(),
        ]);
    }
    let mut summary = Table::new(
        "adequacy_summary",
        &[
            "attribute_set",
            "attributes",
            "overall_kmo",
            "bartlett_chi2",
            "bartlett_df",
            "bartlett_p",
            "n",
        ],
    );
    let mut summarize = |label: &str, r: &AdequacyReport| {
        summary.row(vec![
            label.into(),
            r.attributes.len().to_string(),
            opt(r.overall_kmo),
            num(r.bartlett_chi2),
            r.bartlett_df.to_string(),
            num(r.bartlett_p),
            r.n.to_string(),
        ]);
    };
    summarize("initial", &a.initial);
    summarize("retained", &a.retained);
    let mut removals = Table::new(
        "attribute_removals",
        &["round", "attribute", "reason", "value"],
    );
    for r in &a.selection.removals {
        let reason = serde_json::to_value(r.reason)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        removals.row(vec![
            r.round.to_string(),
            r.attribute.clone(),
            reason,
            opt(r.value),
        ]);
    }
    vec![attributes, summary, removals]
}

fn factor_tables(f: &FactorSection) -> Vec<Table> {
    let m = &f.model;
    let mut header = vec!["attribute".to_string()];
    header.extend(m.factor_labels.iter().map(|l| format!("unrotated_{l}")));
    header.extend(m.factor_labels.iter().map(|l| format!("rotated_{l}")));
    header.extend(["h2", "u2", "com"].map(String::from));
    let mut loadings = Table {
        name: "factor_loadings",
        header,
        rows: Vec::new(),
    };
    for (i, attribute) in m.attributes.iter().enumerate() {
        let mut row = vec![attribute.clone()];
        row.extend((0..m.k).map(|j| num(m.unrotated_loadings[(i, j)])));
        row.extend((0..m.k).map(|j| num(m.rotated_loadings[(i, j)])));
        row.extend([
            num(m.communalities[i]),
            num(m.uniquenesses[i]),
            num(m.complexity[i]),
        ]);
        loadings.row(row);
    }

    let mut factors = Table::new(
        "factor_summary",
        &[
            "factor",
            "score",
            "ss_loadings",
            "proportion_var",
            "cumulative_var",
        ],
    );
    for j in 0..m.k {
        let score = if Some(j) == f.aes_factor {
            "AES"
        } else if Some(j) == f.pes_factor {
            "PES"
        } else {
            ""
        };
        factors.row(vec![
            m.factor_labels[j].clone(),
            score.into(),
            num(m.ss_loadings[j]),
            num(m.proportion_var[j]),
            num(m.cumulative_var[j]),
        ]);
    }

    let mut fit = Table::new("factor_fit", &["statistic", "value"]);
    let source = match f.factor_count_source {
        FactorCountSource::ParallelAnalysis => "parallel_analysis",
        FactorCountSource::Override => "override",
    };
    for (name, value) in [
        ("factor_count", f.factor_count.to_string()),
        ("factor_count_source", source.to_string()),
        (
            "suggested_factors",
            f.parallel_analysis.suggested_factors.to_string(),
        ),
        ("n", m.n.to_string()),
        ("objective", num(m.fit.objective)),
        ("chi_square", num(m.fit.chi_square)),
        ("df", m.fit.df.to_string()),
        ("null_chi_square", num(m.fit.null_chi_square)),
        ("null_df", m.fit.null_df.to_string()),
        ("tli", num(m.fit.tli)),
        ("rmsea", num(m.fit.rmsea)),
        ("srmr", num(m.fit.srmr)),
        ("cfi", num(m.fit.cfi)),
        ("iterations", m.iterations.to_string()),
        ("heywood", m.heywood.join(";")),
    ] {
        fit.row(vec![name.into(), value]);
    }

    let mut parallel = Table::new(
        "parallel_analysis",
        &["eigenvalue", "observed", "simulated_mean"],
    );
    let pa = &f.parallel_analysis;
    for (i, (o, s)) in pa.observed.iter().zip(&pa.simulated_mean).enumerate() {
        parallel.row(vec![(i + 1).to_string(), num(*o), num(*s)]);
    }
    vec![loadings, factors, fit, parallel]
}

fn cross_validation_tables(cv: &ce_core::efa::CrossValReport, labels: &[String]) -> Vec<Table> {
    let mut fit = Table::new(
        "cross_validation",
        &["split", "n", "tli", "rmsea", "srmr", "cfi"],
    );
    let mut loadings = Table::new(
        "cross_validation_loadings",
        &["split", "attribute", "factor", "loading"],
    );
    for (name, split) in [("train", &cv.train), ("test", &cv.test)] {
        let SplitFit {
            n,
            loadings: l,
            tli,
            rmsea,
            srmr,
            cfi,
        } = split;
        fit.row(vec![
            name.into(),
            n.to_string(),
            num(*tli),
            num(*rmsea),
            num(*srmr),
            num(*cfi),
        ]);
        for (i, attribute) in cv.attributes.iter().enumerate() {
            for j in 0..l.ncols() {
                let label = labels
                    .get(j)
                    .cloned()
                    .unwrap_or_else(|| format!("F{}", j + 1));
                loadings.row(vec![name.into(), attribute.clone(), label, num(l[(i, j)])]);
            }
        }
    }
    vec![fit, loadings]
}

fn score_table(s: &ScoreSection) -> Table {
    descriptive_table(
        "score_descriptive",
        &[
            MetricSummary {
                metric: "AES".into(),
                stats: s.aes.clone(),
            },
            MetricSummary {
                metric: "PES".into(),
                stats: s.pes.clone(),
            },
        ],
    )
}

fn correlation_table(c: &CorrelationSection) -> Table {
    let mut t = Table::new(
        "correlations",
        &[
            "score",
            "metric",
            "rho",
            "p_value",
            "n",
            "rho_low",
            "p_low",
            "n_low",
            "rho_high",
            "p_high",
            "n_high",
            "aes_cutpoint",
        ],
    );
    for r in &c.rows {
        t.row(vec![
            r.score.clone(),
            r.metric.clone(),
            num(r.overall.rho),
            num(r.overall.p_value),
            r.overall.n.to_string(),
            num(r.low.rho),
            num(r.low.p_value),
            r.low.n.to_string(),
            num(r.high.rho),
            num(r.high.p_value),
            r.high.n.to_string(),
            num(c.cutpoint),
        ]);
    }
    t
}

fn bootstrap_table(b: &BootstrapSection) -> Table {
    let mut t = Table::new(
        "bootstrap",
        &[
            "score",
            "metric",
            "mode",
            "primary",
            "rho_low",
            "rho_high",
            "observed",
            "z",
            "p_value",
            "se_bootstrap",
            "mean_statistic",
            "median_statistic",
            "iterations",
            "skipped_resamples",
            "seed",
        ],
    );
    for r in &b.rows {
        for result in [&r.literal, &r.paired_difference] {
            let BootstrapResult {
                mode,
                observed,
                z,
                p_value,
                iterations,
                se_bootstrap,
                mean_statistic,
                median_statistic,
                skipped_resamples,
                seed,
                ..
            } = result;
            let mode_name = serde_json::to_value(mode)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default();
            t.row(vec![
                r.score.clone(),
                r.metric.clone(),
                mode_name,
                (*mode == b.primary_mode).to_string(),
                num(r.rho_low),
                num(r.rho_high),
                num(*observed),
                num(*z),
                num(*p_value),
                num(*se_bootstrap),
                num(*mean_statistic),
                num(*median_statistic),
                iterations.to_string(),
                skipped_resamples.to_string(),
                seed.to_string(),
            ]);
        }
    }
    t
}

fn regression_tables(
    name: &'static str,
    fit_name: &'static str,
    models: &[RegressionModel],
) -> Vec<Table> {
    let mut terms = Table::new(
        name,
        &[
            "response",
            "term",
            "coefficient",
            "std_error",
            "t_value",
            "p_value",
            "percent_effect",
        ],
    );
    let mut fits = Table::new(
        fit_name,
        &[
            "response",
            "n",
            "r_squared",
            "adjusted_r_squared",
            "df_residual",
            "log_offset",
        ],
    );
    for m in models {
        for term in &m.fit.terms {
            let effect = m
                .percent_effects
                .iter()
                .find(|e| e.term == term.name)
                .map(|e| e.effect);
            terms.row(vec![
                m.response.clone(),
                term.name.clone(),
                num(term.coefficient),
                num(term.std_error),
                num(term.t_value),
                num(term.p_value),
                opt(effect),
            ]);
        }
        fits.row(vec![
            m.response.clone(),
            m.fit.n.to_string(),
            num(m.fit.r_squared),
            num(m.fit.adjusted_r_squared),
            m.fit.df_residual.to_string(),
            opt(m.offset),
        ]);
    }
    vec![terms, fits]
}

/// Group bounds from three cutpoints: (−∞, c1], (c1, c2], (c2, c3], (c3, max].
fn group_table(
    name: &'static str,
    labels: &[&str; 4],
    cutpoints: &[f64; 3],
    sizes: &[usize; 4],
    max: Option<f64>,
) -> Table {
    let mut t = Table::new(name, &["group", "lower_exclusive", "upper_inclusive", "n"]);
    for q in 0..4 {
        let lower = if q == 0 {
            String::new()
        } else {
            num(cutpoints[q - 1])
        };
        let upper = if q == 3 { opt(max) } else { num(cutpoints[q]) };
        t.row(vec![labels[q].into(), lower, upper, sizes[q].to_string()]);
    }
    t
}

fn age_tables(a: &AgeInteractionSection) -> Vec<Table> {
    let mut tables = regression_tables("age_interaction", "age_interaction_fit", &a.models);
    tables.push(group_table(
        "age_groups",
        &ce_core::regress::AGE_GROUP_LABELS,
        &a.cutpoints,
        &a.group_sizes,
        None,
    ));
    let mut offsets = Table::new(
        "age_interaction_offsets",
        &["metric", "log_offset", "excluded_without_release"],
    );
    for o in &a.predictor_offsets {
        offsets.row(vec![
            o.metric.clone(),
            opt(o.offset),
            a.excluded_without_release.to_string(),
        ]);
    }
    tables.push(offsets);
    tables
}

fn lifespan_tables(l: &LifespanSection) -> Vec<Table> {
    let mut quartiles = Table::new(
        "lifespan_quartiles",
        &["metric", "quartile", "n", "median", "skewness", "kurtosis"],
    );
    for m in &l.summaries {
        for q in &m.quartiles {
            quartiles.row(vec![
                m.metric.clone(),
                q.quartile.clone(),
                q.n.to_string(),
                num(q.median),
                opt(q.skewness),
                opt(q.kurtosis),
            ]);
        }
    }
    let c = &l.comparisons;
    let mut comparisons = Table::new(
        "lifespan_comparisons",
        &[
            "metric",
            "group_a",
            "group_b",
            "u_statistic",
            "p_value",
            "cliffs_delta",
            "n_a",
            "n_b",
            "significant",
            "corrected_alpha",
            "test_count",
        ],
    );
    for cell in &c.cells {
        comparisons.row(vec![
            cell.metric.clone(),
            cell.group_a.clone(),
            cell.group_b.clone(),
            num(cell.result.u_statistic),
            num(cell.result.p_value),
            num(cell.result.cliffs_delta),
            cell.result.n_a.to_string(),
            cell.result.n_b.to_string(),
            cell.significant.to_string(),
            num(c.corrected_alpha),
            c.test_count.to_string(),
        ]);
    }
    let groups = group_table(
        "lifespan_groups",
        &ce_core::lifespan::QUARTILE_LABELS,
        &l.cutpoints,
        &l.group_sizes,
        Some(l.max_observed),
    );
    vec![quartiles, comparisons, groups]
}

fn notes_table(notes: &[StageNote]) -> Table {
    let mut t = Table::new("notes", &["stage", "status", "message"]);
    for n in notes {
        let status = match n.status {
            StageStatus::Skipped => "skipped",
            StageStatus::Failed => "failed",
        };
        t.row(vec![n.stage.clone(), status.into(), n.message.clone()]);
    }
    t
}

fn csv_tables(report: &AnalysisReport) -> Vec<Table> {
    let mut tables = vec![filter_table(report)];
    if let Some(parse) = &report.parse {
        let mut t = Table::new("parse_rejections", &["row", "reason"]);
        for r in &parse.rejections {
            t.row(vec![r.row.to_string(), r.reason.clone()]);
        }
        tables.push(t);
    }
    if !report.descriptive.is_empty() {
        tables.push(descriptive_table("descriptive", &report.descriptive));
        tables.push(descriptive_table("dynamics_descriptive", &report.dynamics));
    }
    if let Some(fits) = &report.distribution_fits {
        tables.push(fit_tables(fits));
    }
    if let Some(plots) = &report.plot_data {
        tables.push(plot_table(plots));
    }
    if let Some(a) = &report.adequacy {
        tables.extend(adequacy_tables(a));
    }
    if let Some(f) = &report.factor_model {
        tables.extend(factor_tables(f));
    }
    if let Some(cv) = &report.cross_validation {
        let labels = report
            .factor_model
            .as_ref()
            .map(|f| f.model.factor_labels.clone())
            .unwrap_or_default();
        tables.extend(cross_validation_tables(cv, &labels));
    }
    if let Some(s) = &report.scores {
        tables.push(score_table(s));
    }
    if let Some(c) = &report.correlations {
        tables.push(correlation_table(c));
    }
    if let Some(b) = &report.bootstrap {
        tables.push(bootstrap_table(b));
    }
    if let Some(models) = &report.regression {
        tables.extend(regression_tables("regression", "regression_fit", models));
    }
    if let Some(a) = &report.age_interaction {
        tables.extend(age_tables(a));
    }
    if let Some(l) = &report.lifespan {
        tables.extend(lifespan_tables(l));
    }
    tables.push(notes_table(&report.notes));
    tables
}

/// Writes the report into `dir` and returns the created files in name order.
/// `provenance.json` accompanies both formats.
pub fn emit_report(
    report: &AnalysisReport,
    format: ReportFormat,
    dir: &Path,
) -> Result<Vec<PathBuf>, PipelineError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let mut written = Vec::new();
    match format {
        ReportFormat::Json => {
            let path = dir.join(REPORT_FILE);
            write_json(&path, report)?;
            written.push(path);
        }
        ReportFormat::Csv => {
            for table in csv_tables(report) {
                written.push(table.write(dir)?);
            }
        }
    }
    let provenance = dir.join(PROVENANCE_FILE);
    write_json(&provenance, &report.provenance)?;
    written.push(provenance);
    written.sort();
    Ok(written)
}

pub fn read_report(path: &Path) -> Result<AnalysisReport, PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Data {
        stage: "report",
        message: format!("{}: {e}", path.display()),
    })
}

/// Per-repository metric vectors, one row per retained record.
pub fn write_metrics(
    path: &Path,
    records: &[RepositoryRecord],
    metrics: &[MetricVector],
) -> Result<(), PipelineError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    let mut header = vec!["repository".to_string()];
    header.extend(ce_core::model::METRIC_NAMES.iter().map(|m| m.to_string()));
    writer
        .write_record(&header)
        .map_err(|e| io_error(path, e))?;
    for (record, m) in records.iter().zip(metrics) {
        let mut row = vec![record.full_name()];
        row.extend(
            ce_core::model::METRIC_NAMES
                .iter()
                .map(|name| num(m.get(name).expect("known metric"))),
        );
        writer.write_record(&row).map_err(|e| io_error(path, e))?;
    }
    writer.flush().map_err(|e| io_error(path, e))
}

/// Per-repository engagement scores.
pub fn write_scores(
    path: &Path,
    records: &[RepositoryRecord],
    aes: &[f64],
    pes: &[f64],
) -> Result<(), PipelineError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    writer
        .write_record(["repository", "AES", "PES"])
        .map_err(|e| io_error(path, e))?;
    for ((record, a), p) in records.iter().zip(aes).zip(pes) {
        writer
            .write_record([record.full_name(), num(*a), num(*p)])
            .map_err(|e| io_error(path, e))?;
    }
    writer.flush().map_err(|e| io_error(path, e))
}
