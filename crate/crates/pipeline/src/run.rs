//! Stage scheduling: load → filter → metrics → analysis stages.
//!
//! Loading, filtering and metric computation abort the run on failure. Every
//! later stage records a note instead, and stages depending on it are skipped.

use std::collections::{BTreeMap, BTreeSet};

use ce_core::distfit::{emit_distribution_plotdata, fit_exponential, fit_lognormal, fit_pareto};
use ce_core::efa::{
    adequacy, correlation_matrix, cross_validate, engagement_factors, factor_scores, fit_efa,
    parallel_analysis, select_attributes, AttributeTable, EngagementScores,
};
use ce_core::lifespan::{compare_groups, partition_lifespan_quartiles, quartile_summary};
use ce_core::model::{apply_exclusion_filters, metric_column, ENGAGEMENT_ATTRIBUTES, METRIC_NAMES};
use ce_core::regress::{
    assign_age_groups, build_interaction_design, log_transform, ols_fit, percent_effect, Design,
};
use ce_core::rng::{stage_seed, RNG_ALGORITHM};
use ce_core::stats::{
    bootstrap_rho_difference, bootstrap_rho_literal, descriptive_stats, median_split, spearman_rho,
    PairedSample,
};
use ce_core::{CoreError, MetricVector, RepositoryRecord};
use ce_ingest::{read_dataset, ParseReport};
use chrono::{DateTime, Utc};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::AnalysisConfig;
use crate::error::PipelineError;
use crate::report::*;

/// Response metrics of the dynamics models.
pub const DYNAMICS_METRICS: [&str; 3] = ["CPM", "BPM", "RPM"];
/// Predictors of the age-interaction model, with their short term labels.
pub const INTERACTION_PREDICTORS: [(&str, &str); 4] = [
    ("TI/m", "TI"),
    ("IC/m", "IC"),
    ("WT/m", "WT"),
    ("STR/m", "STR"),
];
/// Metrics compared across lifespan quartiles.
pub const LIFESPAN_METRICS: [&str; 7] = ["TI/m", "IC/m", "WT/m", "STR/m", "CPM", "BPM", "RPM"];
pub const SCORES: [&str; 2] = ["AES", "PES"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Metrics,
    Distfit,
    Adequacy,
    Efa,
    CrossValidation,
    Scores,
    Correlations,
    Bootstrap,
    Regression,
    AgeInteraction,
    Lifespan,
}

impl Stage {
    pub const ALL: [Stage; 11] = [
        Stage::Metrics,
        Stage::Distfit,
        Stage::Adequacy,
        Stage::Efa,
        Stage::CrossValidation,
        Stage::Scores,
        Stage::Correlations,
        Stage::Bootstrap,
        Stage::Regression,
        Stage::AgeInteraction,
        Stage::Lifespan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Metrics => "metrics",
            Stage::Distfit => "distfit",
            Stage::Adequacy => "adequacy",
            Stage::Efa => "efa",
            Stage::CrossValidation => "cross_validation",
            Stage::Scores => "scores",
            Stage::Correlations => "correlations",
            Stage::Bootstrap => "bootstrap",
            Stage::Regression => "regression",
            Stage::AgeInteraction => "age_interaction",
            Stage::Lifespan => "lifespan",
        }
    }

    fn dependencies(self) -> &'static [Stage] {
        match self {
            Stage::Metrics => &[],
            Stage::Distfit | Stage::Adequacy | Stage::AgeInteraction | Stage::Lifespan => {
                &[Stage::Metrics]
            }
            Stage::Efa => &[Stage::Adequacy],
            Stage::CrossValidation | Stage::Scores => &[Stage::Efa],
            Stage::Correlations | Stage::Regression => &[Stage::Scores],
            Stage::Bootstrap => &[Stage::Correlations],
        }
    }

    fn randomized(self) -> bool {
        matches!(self, Stage::Efa | Stage::CrossValidation | Stage::Bootstrap)
    }
}

/// The set of stages to run, closed under dependencies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StagePlan(BTreeSet<Stage>);

impl StagePlan {
    pub fn all() -> Self {
        Self::only(&Stage::ALL)
    }

    /// Load and filter only.
    pub fn none() -> Self {
        Self(BTreeSet::new())
    }

    pub fn only(stages: &[Stage]) -> Self {
        let mut set = BTreeSet::new();
        let mut pending: Vec<Stage> = stages.to_vec();
        while let Some(stage) = pending.pop() {
            if set.insert(stage) {
                pending.extend_from_slice(stage.dependencies());
            }
        }
        Self(set)
    }

    pub fn contains(&self, stage: Stage) -> bool {
        self.0.contains(&stage)
    }

    fn randomized(&self) -> bool {
        self.0.iter().any(|s| s.randomized())
    }
}

/// Report plus the per-repository data behind it.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: AnalysisReport,
    /// Records that passed the exclusion filters, in input order.
    pub records: Vec<RepositoryRecord>,
    pub metrics: Vec<MetricVector>,
    pub scores: Option<EngagementScores>,
}

pub fn run_pipeline(config: &AnalysisConfig) -> Result<AnalysisReport, PipelineError> {
    run_stages(config, &StagePlan::all()).map(|output| output.report)
}

fn default_reference_date() -> DateTime<Utc> {
    Utc::now()
        .date_naive()
        .and_hms_opt(0, 0, 0)
        .expect("midnight")
        .and_utc()
}

fn load(
    config: &AnalysisConfig,
) -> Result<(Vec<RepositoryRecord>, ParseReport, DatasetInfo), PipelineError> {
    let path = config.dataset.as_deref().ok_or_else(|| {
        PipelineError::Usage("no dataset given (config `dataset` or --dataset)".into())
    })?;
    let bytes = std::fs::read(path).map_err(|e| PipelineError::Data {
        stage: "load",
        message: format!("{}: {e}", path.display()),
    })?;
    let (records, parse) = read_dataset(bytes.as_slice(), &config.column_mapping).map_err(|e| {
        PipelineError::Data {
            stage: "load",
            message: e.to_string(),
        }
    })?;
    let info = DatasetInfo {
        path: path.to_path_buf(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    };
    Ok((records, parse, info))
}

/// Outcome bookkeeping shared by the analysis stages.
struct Ledger<'a> {
    plan: &'a StagePlan,
    notes: Vec<StageNote>,
    completed: BTreeSet<Stage>,
}

impl Ledger<'_> {
    fn note(&mut self, stage: Stage, status: StageStatus, message: String) {
        match status {
            StageStatus::Skipped => log::warn!("{} skipped: {message}", stage.name()),
            StageStatus::Failed => log::error!("{} failed: {message}", stage.name()),
        }
        self.notes.push(StageNote {
            stage: stage.name().into(),
            status,
            message,
        });
    }

    /// Runs `f` if the stage is planned and its dependencies completed.
    fn run<T>(&mut self, stage: Stage, f: impl FnOnce() -> Result<T, CoreError>) -> Option<T> {
        if !self.plan.contains(stage) {
            return None;
        }
        if let Some(missing) = stage
            .dependencies()
            .iter()
            .find(|d| !self.completed.contains(d))
        {
            self.note(
                stage,
                StageStatus::Skipped,
                format!("requires {}", missing.name()),
            );
            return None;
        }
        log::info!("stage {}", stage.name());
        match f() {
            Ok(value) => {
                self.completed.insert(stage);
                Some(value)
            }
            Err(CoreError::NoReleases) => {
                self.note(
                    stage,
                    StageStatus::Skipped,
                    CoreError::NoReleases.to_string(),
                );
                None
            }
            Err(e) => {
                self.note(stage, StageStatus::Failed, e.to_string());
                None
            }
        }
    }

    fn disable(&mut self, stage: Stage) {
        if self.plan.contains(stage) {
            self.note(
                stage,
                StageStatus::Skipped,
                "disabled by configuration".into(),
            );
        }
    }
}

fn column(metrics: &[MetricVector], name: &str) -> Vec<f64> {
    metric_column(metrics, name).expect("known metric name")
}

fn subset(values: &[f64], rows: &[usize]) -> Vec<f64> {
    rows.iter().map(|&i| values[i]).collect()
}

fn summarize(metrics: &[MetricVector], names: &[&str]) -> Result<Vec<MetricSummary>, CoreError> {
    names
        .iter()
        .map(|name| {
            Ok(MetricSummary {
                metric: name.to_string(),
                stats: descriptive_stats(&column(metrics, name))?,
            })
        })
        .collect()
}

fn fit_distributions(
    metrics: &[MetricVector],
    plot: bool,
) -> (Vec<DistributionFitRow>, Vec<PlotSeries>) {
    let per_metric: Vec<(DistributionFitRow, Vec<PlotSeries>)> = METRIC_NAMES
        .par_iter()
        .map(|name| {
            let sample = column(metrics, name);
            let mut errors = Vec::new();
            let mut keep = |kind: &str, fit: Result<_, CoreError>| match fit {
                Ok(fit) => Some(fit),
                Err(e) => {
                    errors.push(format!("{kind}: {e}"));
                    None
                }
            };
            let lognormal = keep("lognormal", fit_lognormal(&sample));
            let exponential = keep("exponential", fit_exponential(&sample));
            let pareto = keep("pareto", fit_pareto(&sample));
            let series = if plot {
                [&lognormal, &exponential, &pareto]
                    .into_iter()
                    .flatten()
                    .filter_map(|fit| {
                        emit_distribution_plotdata(&sample, fit)
                            .ok()
                            .map(|rows| PlotSeries {
                                metric: name.to_string(),
                                kind: fit.kind,
                                rows,
                            })
                    })
                    .collect()
            } else {
                Vec::new()
            };
            let row = DistributionFitRow {
                metric: name.to_string(),
                lognormal,
                exponential,
                pareto,
                errors,
            };
            (row, series)
        })
        .collect();
    let mut rows = Vec::new();
    let mut plots = Vec::new();
    for (row, series) in per_metric {
        rows.push(row);
        plots.extend(series);
    }
    (rows, plots)
}

fn engagement_table(metrics: &[MetricVector]) -> Result<AttributeTable, CoreError> {
    let columns: Vec<(String, Vec<f64>)> = ENGAGEMENT_ATTRIBUTES
        .iter()
        .map(|name| (name.to_string(), column(metrics, name)))
        .collect();
    AttributeTable::from_columns(&columns)
}

fn regression_model(
    response: &str,
    values: &[f64],
    design: &Design,
    config: &AnalysisConfig,
) -> Result<RegressionModel, CoreError> {
    let transformed = log_transform(values, config.zero_policy)?;
    let mut fit = ols_fit(design, &transformed.values)?;
    // Residuals are not part of the serialized report.
    fit.residuals = Vec::new();
    let percent_effects = fit
        .terms
        .iter()
        .filter(|t| t.name != "Intercept")
        .map(|t| PercentEffect {
            term: t.name.clone(),
            effect: percent_effect(t.coefficient),
        })
        .collect();
    Ok(RegressionModel {
        response: response.to_string(),
        offset: transformed.offset,
        fit,
        percent_effects,
    })
}

fn dynamics_models(
    metrics: &[MetricVector],
    rows: Option<&[usize]>,
    design: &Design,
    config: &AnalysisConfig,
) -> Result<Vec<RegressionModel>, CoreError> {
    DYNAMICS_METRICS
        .par_iter()
        .map(|name| {
            let values = column(metrics, name);
            let values = rows.map_or(values.clone(), |r| subset(&values, r));
            regression_model(name, &values, design, config)
        })
        .collect()
}

/// Runs the planned stages. Load, filter and metric failures abort; analysis
/// failures become report notes.
pub fn run_stages(
    config: &AnalysisConfig,
    plan: &StagePlan,
) -> Result<PipelineOutput, PipelineError> {
    config.validate()?;
    let seed = if plan.randomized() {
        Some(config.require_seed()?)
    } else {
        config.seed
    };
    let reference_date = config.reference_date.unwrap_or_else(default_reference_date);

    let (loaded, parse, dataset) = load(config)?;
    log::info!(
        "loaded {} records ({} rejected)",
        loaded.len(),
        parse.rows_rejected
    );
    let (records, filter) = apply_exclusion_filters(&loaded, reference_date);
    log::info!(
        "{} of {} records pass the exclusion filters",
        filter.retained_count,
        filter.input_count
    );

    let mut ledger = Ledger {
        plan,
        notes: Vec::new(),
        completed: BTreeSet::new(),
    };
    let mut stage_seeds = BTreeMap::new();
    let mut seed_for = |label: &str| {
        let s = stage_seed(seed.expect("seed checked for randomized plans"), label);
        stage_seeds.insert(label.to_string(), s);
        s
    };

    let mut metrics = Vec::new();
    let mut descriptive = Vec::new();
    let mut dynamics = Vec::new();
    if plan.contains(Stage::Metrics) {
        if records.is_empty() {
            return Err(PipelineError::Data {
                stage: "filter",
                message: "no repositories pass the exclusion filters".into(),
            });
        }
        metrics = records
            .par_iter()
            .map(MetricVector::from_record)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| PipelineError::Data {
                stage: "metrics",
                message: e.to_string(),
            })?;
        descriptive = summarize(&metrics, &METRIC_NAMES).map_err(|e| PipelineError::Data {
            stage: "metrics",
            message: e.to_string(),
        })?;
        dynamics = descriptive
            .iter()
            .filter(|s| DYNAMICS_METRICS.contains(&s.metric.as_str()))
            .cloned()
            .collect();
        ledger.completed.insert(Stage::Metrics);
    }

    let mut distribution_fits = None;
    let mut plot_data = None;
    if config.distfit {
        if let Some((rows, plots)) = ledger.run(Stage::Distfit, || {
            Ok(fit_distributions(&metrics, config.plot_data))
        }) {
            distribution_fits = Some(rows);
            plot_data = config.plot_data.then_some(plots);
        }
    } else {
        ledger.disable(Stage::Distfit);
    }

    let screened = ledger.run(Stage::Adequacy, || {
        let table = engagement_table(&metrics)?;
        let n = table.nrows();
        let initial = adequacy(&correlation_matrix(&table)?, n)?;
        let selection = select_attributes(&table, config.msa_threshold, config.vif_threshold)?;
        let retained_table = table.select(&selection.retained)?;
        let retained = adequacy(&correlation_matrix(&retained_table)?, n)?;
        Ok((
            AdequacySection {
                initial,
                selection,
                retained,
            },
            retained_table,
        ))
    });
    let (adequacy_section, table) = match screened {
        Some((section, table)) => (Some(section), Some(table)),
        None => (None, None),
    };

    let parallel_seed = plan
        .contains(Stage::Efa)
        .then(|| seed_for("parallel_analysis"));
    let factor_section = ledger.run(Stage::Efa, || {
        let table = table.as_ref().expect("adequacy completed");
        let pa = parallel_analysis(
            table,
            config.parallel_simulations,
            parallel_seed.expect("planned"),
        )?;
        let (k, source) = match config.factor_count {
            Some(k) => (k, FactorCountSource::Override),
            None => (pa.suggested_factors, FactorCountSource::ParallelAnalysis),
        };
        if k == 0 {
            return Err(CoreError::InvalidFactorCount(
                "parallel analysis retains no factors".into(),
            ));
        }
        let model = fit_efa(&correlation_matrix(table)?, k, table.nrows())?;
        let (pes_factor, aes_factor) = match engagement_factors(&model) {
            Ok((p, a)) => (Some(p), Some(a)),
            Err(_) => (None, None),
        };
        Ok(FactorSection {
            parallel_analysis: pa,
            factor_count: k,
            factor_count_source: source,
            model,
            aes_factor,
            pes_factor,
        })
    });

    let split_seed = plan
        .contains(Stage::CrossValidation)
        .then(|| seed_for("cross_validation"));
    let cross_validation = ledger.run(Stage::CrossValidation, || {
        let model = &factor_section.as_ref().expect("efa completed").model;
        cross_validate(
            table.as_ref().expect("adequacy completed"),
            model,
            config.split_ratio,
            split_seed.expect("planned"),
        )
    });

    let scores = ledger.run(Stage::Scores, || {
        let model = &factor_section.as_ref().expect("efa completed").model;
        factor_scores(table.as_ref().expect("adequacy completed"), model)
    });
    let score_section = scores
        .as_ref()
        .map(|s| -> Result<ScoreSection, CoreError> {
            Ok(ScoreSection {
                aes: descriptive_stats(&s.aes)?,
                pes: descriptive_stats(&s.pes)?,
            })
        })
        .transpose()
        .unwrap_or(None);
    let score_columns = |s: &EngagementScores| [s.aes.clone(), s.pes.clone()];

    let split = ledger.run(Stage::Correlations, || {
        let s = scores.as_ref().expect("scores completed");
        let split = median_split(&s.aes)?;
        let mut rows = Vec::new();
        for (label, values) in SCORES.iter().zip(score_columns(s)) {
            for metric in DYNAMICS_METRICS {
                let m = column(&metrics, metric);
                rows.push(CorrelationRow {
                    score: label.to_string(),
                    metric: metric.to_string(),
                    overall: spearman_rho(&values, &m)?,
                    low: spearman_rho(&subset(&values, &split.low), &subset(&m, &split.low))?,
                    high: spearman_rho(&subset(&values, &split.high), &subset(&m, &split.high))?,
                });
            }
        }
        let section = CorrelationSection {
            cutpoint: split.cutpoint,
            n_low: split.low.len(),
            n_high: split.high.len(),
            rows,
        };
        Ok((section, split))
    });
    let (correlations, split) = match split {
        Some((section, split)) => (Some(section), Some(split)),
        None => (None, None),
    };

    let bootstrap_seeds: Vec<u64> = if plan.contains(Stage::Bootstrap) {
        SCORES
            .iter()
            .flat_map(|s| {
                DYNAMICS_METRICS
                    .iter()
                    .map(move |m| format!("bootstrap/{s}/{m}"))
            })
            .map(|label| seed_for(&label))
            .collect()
    } else {
        Vec::new()
    };
    let bootstrap = ledger.run(Stage::Bootstrap, || {
        let s = scores.as_ref().expect("scores completed");
        let split = split.as_ref().expect("correlations completed");
        let correlations = correlations.as_ref().expect("correlations completed");
        let mut rows = Vec::new();
        let mut seeds = bootstrap_seeds.iter();
        for (label, values) in SCORES.iter().zip(score_columns(s)) {
            for metric in DYNAMICS_METRICS {
                let seed = *seeds.next().expect("one seed per cell");
                let m = column(&metrics, metric);
                let (high_m, low_m) = (subset(&m, &split.high), subset(&m, &split.low));
                let len = high_m.len().min(low_m.len());
                let literal = bootstrap_rho_literal(
                    &high_m[..len],
                    &low_m[..len],
                    config.bootstrap_iterations,
                    seed,
                )?;
                let (high_s, low_s) = (subset(&values, &split.high), subset(&values, &split.low));
                let paired_difference = bootstrap_rho_difference(
                    PairedSample {
                        x: &high_s,
                        y: &high_m,
                    },
                    PairedSample {
                        x: &low_s,
                        y: &low_m,
                    },
                    config.bootstrap_iterations,
                    seed,
                )?;
                let cell = correlations
                    .rows
                    .iter()
                    .find(|r| r.score == *label && r.metric == metric)
                    .expect("correlation cell");
                rows.push(BootstrapRow {
                    score: label.to_string(),
                    metric: metric.to_string(),
                    rho_low: cell.low.rho,
                    rho_high: cell.high.rho,
                    literal,
                    paired_difference,
                });
            }
        }
        Ok(BootstrapSection {
            primary_mode: config.bootstrap_mode,
            rows,
        })
    });

    let regression = ledger.run(Stage::Regression, || {
        let s = scores.as_ref().expect("scores completed");
        let design = Design::with_intercept(&[("AES", &s.aes), ("PES", &s.pes)])?;
        dynamics_models(&metrics, None, &design, config)
    });

    let age_interaction = if config.age_interaction {
        ledger.run(Stage::AgeInteraction, || {
            let ages: Vec<Option<i64>> = records
                .iter()
                .map(RepositoryRecord::release_age_days)
                .collect();
            let assignment = assign_age_groups(&ages)?;
            if assignment.excluded_without_release > 0 {
                log::info!(
                    "{} records without a release excluded from the age analysis",
                    assignment.excluded_without_release
                );
            }
            let rows = assignment.assigned();
            let groups: Vec<usize> = assignment.groups.iter().flatten().copied().collect();
            let mut logged = Vec::new();
            let mut predictor_offsets = Vec::new();
            for (metric, _) in INTERACTION_PREDICTORS {
                let t = log_transform(
                    &subset(&column(&metrics, metric), &rows),
                    config.zero_policy,
                )?;
                predictor_offsets.push(LogOffset {
                    metric: metric.to_string(),
                    offset: t.offset,
                });
                logged.push(t.values);
            }
            let predictors: [(&str, &[f64]); 4] =
                std::array::from_fn(|k| (INTERACTION_PREDICTORS[k].1, logged[k].as_slice()));
            let design = build_interaction_design(&predictors, &groups)?;
            Ok(AgeInteractionSection {
                cutpoints: assignment.cutpoints,
                group_sizes: assignment.group_sizes(),
                excluded_without_release: assignment.excluded_without_release,
                predictor_offsets,
                models: dynamics_models(&metrics, Some(&rows), &design, config)?,
            })
        })
    } else {
        ledger.disable(Stage::AgeInteraction);
        None
    };

    let lifespan = ledger.run(Stage::Lifespan, || {
        let days: Vec<u64> = records
            .iter()
            .map(|r| r.active_lifespan().map(|l| l.days))
            .collect::<Result<_, _>>()?;
        let partition = partition_lifespan_quartiles(&days)?;
        let columns: Vec<(String, Vec<f64>)> = LIFESPAN_METRICS
            .iter()
            .map(|m| (m.to_string(), column(&metrics, m)))
            .collect();
        let summaries = columns
            .iter()
            .map(|(metric, values)| {
                Ok(MetricQuartiles {
                    metric: metric.clone(),
                    quartiles: quartile_summary(values, &partition)?,
                })
            })
            .collect::<Result<Vec<_>, CoreError>>()?;
        let comparisons = compare_groups(
            &columns,
            &partition,
            config.alpha,
            config.bonferroni_divisor,
        )?;
        Ok(LifespanSection {
            cutpoints: partition.cutpoints,
            group_sizes: partition.sizes(),
            max_observed: partition.max_observed,
            summaries,
            comparisons,
        })
    });

    let report = AnalysisReport {
        provenance: Provenance {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: config.clone(),
            config_hash: config.hash(),
            seed,
            rng: RNG_ALGORITHM.into(),
            stage_seeds,
            reference_date,
            dataset: Some(dataset),
        },
        parse: Some(parse),
        filter,
        descriptive,
        dynamics,
        distribution_fits,
        plot_data,
        adequacy: adequacy_section,
        factor_model: factor_section,
        scores: score_section,
        cross_validation,
        correlations,
        bootstrap,
        regression,
        age_interaction,
        lifespan,
        notes: ledger.notes,
    };
    Ok(PipelineOutput {
        report,
        records,
        metrics,
        scores,
    })
}
