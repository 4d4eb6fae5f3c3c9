//! `evidence`: batch driver for ingest, extraction, scoring and reports.
//!
//! Exit codes: 0 success, 1 input or configuration error, 2 the
//! partial-failure threshold was exceeded.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use evidence_core::config::PipelineConfig;
use evidence_core::model::{Mode, Task};
use evidence_core::pipeline::{self, PipelineError};

#[derive(Parser, Debug)]
#[command(name = "evidence", version, about = "Turn fact-check articles into evidence units and evaluate them")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Plain-text `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key (repeatable); wins over the file.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Directory holding articles.jsonl.
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    /// Directory for all outputs.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for all parallel stages (0 = one per core).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Log verbosity (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    #[value(name = "A")]
    A,
    #[value(name = "B")]
    B,
    #[value(name = "C")]
    C,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::A => Mode::A,
            ModeArg::B => Mode::B,
            ModeArg::C => Mode::C,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TaskArg {
    Dfs,
    Retrieval,
    Verification,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Dfs => Task::Dfs,
            TaskArg::Retrieval => Task::Retrieval,
            TaskArg::Verification => Task::Verification,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LabelsArg {
    Binary,
    Five,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Segment articles, flag verdict sentences and qualify anchors.
    Ingest,
    /// Produce premises for one mode.
    Extract {
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Generation backend (none, stub, remote).
        #[arg(long)]
        backend: Option<String>,
    },
    /// Score one task for one mode and write runs/<id>.jsonl.
    Score {
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long, value_enum)]
        labels: Option<LabelsArg>,
        #[arg(long)]
        k1: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
        /// Entailment backend (constant, lexical, remote).
        #[arg(long)]
        entailment: Option<String>,
        /// Generation backend used for verification (none, stub, remote).
        #[arg(long)]
        backend: Option<String>,
    },
    /// Print aggregate tables for one or more runs.
    Report {
        #[arg(long = "run", required = true)]
        runs: Vec<String>,
        /// Emit aggregate records as JSON lines instead of tables.
        #[arg(long)]
        json: bool,
    },
}

enum Failure {
    Input(String),
    Threshold(String),
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<evidence_core::config::ConfigError> for Failure {
    fn from(e: evidence_core::config::ConfigError) -> Self {
        Failure::Input(e.to_string())
    }
}

fn resolve_config(cli: &Cli) -> Result<PipelineConfig, Failure> {
    let g = &cli.global;
    let mut cfg = match &g.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let mut overrides: Vec<(String, String)> = Vec::new();
    if let Some(p) = &g.corpus {
        overrides.push(("corpus_dir".into(), p.display().to_string()));
    }
    if let Some(p) = &g.out {
        overrides.push(("output_dir".into(), p.display().to_string()));
    }
    if let Some(w) = g.workers {
        overrides.push(("workers".into(), w.to_string()));
    }
    match &cli.command {
        Command::Extract { backend: Some(b), .. } => overrides.push(("generation.backend".into(), b.clone())),
        Command::Score {
            labels,
            k1,
            b,
            entailment,
            backend,
            ..
        } => {
            if let Some(l) = labels {
                let v = match l {
                    LabelsArg::Binary => "binary",
                    LabelsArg::Five => "five",
                };
                overrides.push(("verification.labels".into(), v.into()));
            }
            if let Some(k1) = k1 {
                overrides.push(("retrieval.k1".into(), k1.to_string()));
            }
            if let Some(b) = b {
                overrides.push(("retrieval.b".into(), b.to_string()));
            }
            if let Some(e) = entailment {
                overrides.push(("entailment.backend".into(), e.clone()));
            }
            if let Some(g) = backend {
                overrides.push(("generation.backend".into(), g.clone()));
            }
        }
        _ => {}
    }
    for kv in &g.set {
        cfg.apply_override(kv)?;
    }
    for (k, v) in overrides {
        cfg.set(&k, &v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli, cfg: &PipelineConfig) -> Result<(), Failure> {
    match &cli.command {
        Command::Ingest => {
            let stats = pipeline::run_ingest(cfg)?;
            println!("{}", serde_json::to_string_pretty(&stats).expect("stats serialize"));
            Ok(())
        }
        Command::Extract { mode, .. } => {
            let summary = pipeline::run_extract(cfg, (*mode).into(), None)?;
            println!("{}", serde_json::to_string(&summary).expect("summary serializes"));
            if summary.threshold_exceeded {
                return Err(Failure::Threshold(format!(
                    "{} of {} articles failed in mode {} (limit {})",
                    summary.articles_failed,
                    summary.articles_total,
                    summary.mode,
                    cfg.get("extract.max_failure_rate")
                )));
            }
            Ok(())
        }
        Command::Score { task, mode, .. } => {
            let outcome = pipeline::run_score(cfg, (*task).into(), (*mode).into(), None)?;
            print!("{}", pipeline::render_report(std::slice::from_ref(&outcome.run))?);
            println!("run {} written to {}", outcome.run.run_id, outcome.path.display());
            if outcome.threshold_exceeded {
                return Err(Failure::Threshold(format!(
                    "too many items failed to score in run {}",
                    outcome.run.run_id
                )));
            }
            Ok(())
        }
        Command::Report { runs, json } => {
            let out = cfg.output_dir();
            let loaded = runs
                .iter()
                .map(|id| pipeline::read_run(&out, id))
                .collect::<Result<Vec<_>, _>>()?;
            let table = pipeline::render_report(&loaded)?;
            if *json {
                for run in &loaded {
                    let record = serde_json::json!({
                        "run_id": run.run_id,
                        "task": run.task,
                        "mode": run.mode,
                        "labels": run.labels,
                        "config_digest": run.config_digest,
                        "aggregates": run.aggregates,
                    });
                    println!("{record}");
                }
            } else {
                print!("{table}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new().parse_filters(&cli.global.log_level).init();

    let cfg = match resolve_config(&cli) {
        Ok(cfg) => cfg,
        Err(Failure::Input(msg) | Failure::Threshold(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    let workers = cfg.workers().unwrap_or(0);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| execute(&cli, &cfg)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Threshold(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
