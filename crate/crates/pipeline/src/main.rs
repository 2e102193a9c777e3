use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use ce_core::regress::ZeroPolicy;
use ce_core::stats::BootstrapMode;
use ce_ingest::{
    fetch_repository, write_dataset, ApiSession, RateLimitPolicy, RecordingTransport,
    ReplayTransport, Token, Transport, UreqTransport,
};
use ce_pipeline::{
    emit_report, read_report, run_stages, write_metrics, write_scores, AnalysisConfig,
    PipelineError, PipelineOutput, ReportFormat, Stage, StagePlan,
};
use chrono::{DateTime, NaiveDate, Utc};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "ce-analytics",
    version,
    about = "Engagement and dynamics analysis of open-source repositories"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Repository dataset CSV.
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: ReportFormat,
}

#[derive(Args, Default)]
struct StageArgs {
    /// Recency anchor (YYYY-MM-DD or RFC 3339); default today.
    #[arg(long, value_parser = parse_date)]
    reference_date: Option<DateTime<Utc>>,
    #[arg(long)]
    msa_threshold: Option<f64>,
    #[arg(long)]
    vif_threshold: Option<f64>,
    /// Number of factors, overriding parallel analysis.
    #[arg(long)]
    factor_count: Option<usize>,
    #[arg(long)]
    parallel_simulations: Option<usize>,
    #[arg(long)]
    split_ratio: Option<f64>,
    #[arg(long)]
    bootstrap_iterations: Option<usize>,
    /// literal | paired_difference
    #[arg(long, value_parser = parse_enum::<BootstrapMode>)]
    bootstrap_mode: Option<BootstrapMode>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    bonferroni_divisor: Option<usize>,
    /// strict | offset
    #[arg(long, value_parser = parse_enum::<ZeroPolicy>)]
    zero_policy: Option<ZeroPolicy>,
    /// Skip distribution fitting.
    #[arg(long)]
    no_distfit: bool,
    /// Skip the release-age interaction models.
    #[arg(long)]
    no_age_interaction: bool,
    /// Emit per-observation CDF/QQ rows.
    #[arg(long)]
    plot_data: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Fetch repository records from the GitHub API into a dataset CSV.
    Ingest(IngestArgs),
    /// Apply the exclusion filters and write the retained records.
    Filter(StageArgs),
    /// Compute per-month metrics.
    Metrics(StageArgs),
    /// Fit lognormal, exponential and Pareto distributions.
    Distfit(StageArgs),
    /// Attribute screening, factor extraction and cross-validation.
    Efa(StageArgs),
    /// Compute engagement scores.
    Score(StageArgs),
    /// Correlations, bootstrap comparison and regression models.
    Dynamics(StageArgs),
    /// Lifespan quartile comparisons.
    Lifespan(StageArgs),
    /// Full pipeline.
    Run(StageArgs),
    /// Re-emit an existing JSON report in the requested format.
    Report {
        /// A report.json written by an earlier run.
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Args)]
struct IngestArgs {
    /// Repositories as owner/name; adds to the configuration list.
    #[arg(long = "repo")]
    repos: Vec<String>,
    /// File with one owner/name per line.
    #[arg(long)]
    repo_file: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    max_concurrent: usize,
    /// Sleep until the rate limit resets instead of failing.
    #[arg(long)]
    wait_on_rate_limit: bool,
    /// Save all API exchanges to this cassette file.
    #[arg(long, conflicts_with = "replay")]
    record: Option<PathBuf>,
    /// Serve API responses from a recorded cassette.
    #[arg(long)]
    replay: Option<PathBuf>,
}

fn parse_date(s: &str) -> Result<DateTime<Utc>, String> {
    if let Ok(date) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(date.and_hms_opt(0, 0, 0).expect("midnight").and_utc());
    }
    DateTime::parse_from_rfc3339(s)
        .map(|d| d.with_timezone(&Utc))
        .map_err(|e| e.to_string())
}

fn parse_enum<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn build_config(global: &GlobalArgs, stage: &StageArgs) -> Result<AnalysisConfig, PipelineError> {
    let mut config = match &global.config {
        Some(path) => AnalysisConfig::load(path)?,
        None => AnalysisConfig::default(),
    };
    if global.dataset.is_some() {
        config.dataset.clone_from(&global.dataset);
    }
    if global.seed.is_some() {
        config.seed = global.seed;
    }
    if stage.reference_date.is_some() {
        config.reference_date = stage.reference_date;
    }
    if stage.factor_count.is_some() {
        config.factor_count = stage.factor_count;
    }
    if stage.bonferroni_divisor.is_some() {
        config.bonferroni_divisor = stage.bonferroni_divisor;
    }
    macro_rules! set {
        ($($field:ident),*) => {$(
            if let Some(v) = stage.$field {
                config.$field = v;
            }
        )*};
    }
    set!(
        msa_threshold,
        vif_threshold,
        parallel_simulations,
        split_ratio,
        bootstrap_iterations,
        bootstrap_mode,
        alpha,
        zero_policy
    );
    config.distfit &= !stage.no_distfit;
    config.age_interaction &= !stage.no_age_interaction;
    config.plot_data |= stage.plot_data;
    config.validate()?;
    Ok(config)
}

fn finish(output: &PipelineOutput, global: &GlobalArgs) -> Result<(), PipelineError> {
    for path in emit_report(&output.report, global.format, &global.out)? {
        log::info!("wrote {}", path.display());
    }
    if output.report.has_failures() {
        let failed: Vec<&str> = output
            .report
            .notes
            .iter()
            .filter(|n| n.status == ce_pipeline::StageStatus::Failed)
            .map(|n| n.stage.as_str())
            .collect();
        return Err(PipelineError::Stage {
            stage: failed.join(", "),
            message: "see the report notes".into(),
        });
    }
    Ok(())
}

fn run_plan(
    global: &GlobalArgs,
    stage: &StageArgs,
    stages: &[Stage],
) -> Result<PipelineOutput, PipelineError> {
    let config = build_config(global, stage)?;
    let plan = if stages.is_empty() {
        StagePlan::none()
    } else {
        StagePlan::only(stages)
    };
    run_stages(&config, &plan)
}

fn io(path: &Path) -> impl Fn(ce_ingest::IngestError) -> PipelineError + '_ {
    move |e| PipelineError::Io(format!("{}: {e}", path.display()))
}

fn read_repo_list(
    args: &IngestArgs,
    config: &AnalysisConfig,
) -> Result<Vec<(String, String)>, PipelineError> {
    let mut names = config.repositories.clone();
    names.extend(args.repos.iter().cloned());
    if let Some(path) = &args.repo_file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Usage(format!("{}: {e}", path.display())))?;
        names.extend(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(String::from),
        );
    }
    if names.is_empty() {
        return Err(PipelineError::Usage(
            "no repositories given (--repo, --repo-file or config `repositories`)".into(),
        ));
    }
    names
        .iter()
        .map(|n| match n.split_once('/') {
            Some((owner, name)) if !owner.is_empty() && !name.is_empty() && !name.contains('/') => {
                Ok((owner.to_string(), name.to_string()))
            }
            _ => Err(PipelineError::Usage(format!(
                "repository `{n}` is not owner/name"
            ))),
        })
        .collect()
}

fn ingest(global: &GlobalArgs, args: &IngestArgs) -> Result<(), PipelineError> {
    let config = build_config(global, &StageArgs::default())?;
    let repos = read_repo_list(args, &config)?;
    let recorder = args.record.as_ref().map(|path| {
        Arc::new(RecordingTransport::new(
            UreqTransport::default(),
            path.clone(),
        ))
    });
    let transport: Arc<dyn Transport> = match (&args.replay, &recorder) {
        (Some(path), _) => Arc::new(ReplayTransport::from_file(path).map_err(io(path))?),
        (None, Some(recorder)) => recorder.clone(),
        (None, None) => Arc::new(UreqTransport::default()),
    };
    let token = if args.replay.is_some() {
        None
    } else {
        Token::from_env()
    };
    if token.is_none() && args.replay.is_none() {
        log::warn!("no API token set; unauthenticated rate limits apply");
    }
    let policy = if args.wait_on_rate_limit {
        RateLimitPolicy::Wait
    } else {
        RateLimitPolicy::Fail
    };
    let session = ApiSession::new(transport, token, args.max_concurrent.max(1))
        .with_rate_limit_policy(policy);

    let mut records = Vec::with_capacity(repos.len());
    let mut failures = 0;
    for (owner, name) in &repos {
        match fetch_repository(&session, owner, name) {
            Ok(record) => records.push(record),
            Err(e) => {
                failures += 1;
                log::error!("{owner}/{name}: {e}");
            }
        }
    }
    if let (Some(recorder), Some(path)) = (&recorder, &args.record) {
        recorder.save().map_err(io(path))?;
    }
    std::fs::create_dir_all(&global.out)?;
    let path = global.out.join("dataset.csv");
    let file = std::fs::File::create(&path)
        .map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
    write_dataset(std::io::BufWriter::new(file), &records).map_err(io(&path))?;
    log::info!("wrote {} records to {}", records.len(), path.display());
    if failures > 0 {
        return Err(PipelineError::Data {
            stage: "ingest",
            message: format!(
                "{failures} of {} repositories could not be fetched",
                repos.len()
            ),
        });
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<(), PipelineError> {
    let global = &cli.global;
    let output = match &cli.command {
        Command::Ingest(args) => return ingest(global, args),
        Command::Report { input } => {
            let report = read_report(input)?;
            for path in emit_report(&report, global.format, &global.out)? {
                log::info!("wrote {}", path.display());
            }
            return Ok(());
        }
        Command::Filter(stage) => {
            let output = run_plan(global, stage, &[])?;
            std::fs::create_dir_all(&global.out)?;
            let path = global.out.join("filtered.csv");
            let file = std::fs::File::create(&path)
                .map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
            write_dataset(std::io::BufWriter::new(file), &output.records).map_err(io(&path))?;
            output
        }
        Command::Metrics(stage) => {
            let output = run_plan(global, stage, &[Stage::Metrics])?;
            std::fs::create_dir_all(&global.out)?;
            write_metrics(
                &global.out.join("metrics.csv"),
                &output.records,
                &output.metrics,
            )?;
            output
        }
        Command::Distfit(stage) => run_plan(global, stage, &[Stage::Distfit])?,
        Command::Efa(stage) => run_plan(
            global,
            stage,
            &[Stage::Adequacy, Stage::Efa, Stage::CrossValidation],
        )?,
        Command::Score(stage) => {
            let output = run_plan(global, stage, &[Stage::Scores])?;
            if let Some(scores) = &output.scores {
                std::fs::create_dir_all(&global.out)?;
                write_scores(
                    &global.out.join("scores.csv"),
                    &output.records,
                    &scores.aes,
                    &scores.pes,
                )?;
            }
            output
        }
        Command::Dynamics(stage) => run_plan(
            global,
            stage,
            &[
                Stage::Correlations,
                Stage::Bootstrap,
                Stage::Regression,
                Stage::AgeInteraction,
            ],
        )?,
        Command::Lifespan(stage) => run_plan(global, stage, &[Stage::Lifespan])?,
        Command::Run(stage) => run_plan(global, stage, &Stage::ALL)?,
    };
    finish(&output, global)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info,ureq=warn"))
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
