mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use flowsurv::data::DataError;
use flowsurv::model::{Imputation, ModelError, Scenario};
use flowsurv::parallel::Execution;

use commands::{EvalInputs, Incompatible};
use config::{ConfigError, RunConfig};

/// Synthetic multimodal survival cohorts, flow-based missing-modality
/// recovery and low-rank transformer survival models.
#[derive(Parser)]
#[command(name = "flowsurv", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configuration seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `paths.out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// TOML run configuration supplying defaults for the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Model checkpoint; overrides `paths.checkpoint`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Dataset file; overrides `paths.dataset`.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Restrict to one fold's records.
    #[arg(long)]
    fold: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic cohort as a `.survjsonl` file.
    Generate(ConfigArgs),
    /// Cross-validate on the dataset: per-fold checkpoints and a summary.
    Train {
        #[command(flatten)]
        args: ConfigArgs,
        /// Scenario for the held-out fold reports.
        #[arg(long, value_parser = parse_scenario)]
        scenario: Option<Scenario>,
    },
    /// Metrics report, Kaplan-Meier curves and log-rank test for a checkpoint.
    Evaluate {
        #[command(flatten)]
        args: EvalArgs,
        #[arg(long, value_parser = parse_scenario)]
        scenario: Option<Scenario>,
    },
    /// Compare flow recovery with zero imputation for a checkpoint.
    ImputeReport {
        #[command(flatten)]
        args: EvalArgs,
    },
    /// Dense vs low-rank attention FLOP counts as CSV.
    Flops {
        /// Number of tokens.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        t: u64,
        /// Model width.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        d: u64,
        /// Attention rank.
        #[arg(long = "d-r", value_parser = clap::value_parser!(u64).range(1..))]
        d_r: u64,
        /// Also write `flops.csv` here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    s.parse()
}

/// Resolves evaluation inputs from the flags, falling back to the config.
fn eval_inputs(args: &EvalArgs) -> anyhow::Result<(EvalInputs, Option<RunConfig>)> {
    let cfg = match &args.config {
        Some(path) => Some(RunConfig::load(path, args.seed, args.out.as_deref())?),
        None => None,
    };
    let checkpoint = args
        .checkpoint
        .clone()
        .or_else(|| cfg.as_ref().and_then(|c| c.checkpoint.clone()))
        .ok_or_else(|| ConfigError("no checkpoint: pass --checkpoint or set `paths.checkpoint`".into()))?;
    let dataset = args
        .dataset
        .clone()
        .or_else(|| cfg.as_ref().map(|c| c.dataset.clone()))
        .ok_or_else(|| ConfigError("no dataset: pass --dataset or set `paths.dataset`".into()))?;
    let out_dir = args
        .out
        .clone()
        .or_else(|| cfg.as_ref().map(|c| c.out_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("."));
    let inputs = EvalInputs {
        checkpoint,
        dataset,
        fold: args.fold.or_else(|| cfg.as_ref().and_then(|c| c.fold)),
        imputation: cfg.as_ref().map_or(Imputation::Flow, |c| c.imputation),
        execution: cfg.as_ref().map_or(Execution::Parallel, |c| c.execution),
        out_dir,
    };
    Ok((inputs, cfg))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate(args) => {
            let cfg = RunConfig::load(&args.config, args.seed, args.out.as_deref())?;
            let s = commands::generate(&cfg)?;
            println!(
                "wrote {} records to {} (censored fraction {:.3})",
                s.records,
                s.path.display(),
                s.censored_fraction
            );
        }
        Command::Train { args, scenario } => {
            let mut cfg = RunConfig::load(&args.config, args.seed, args.out.as_deref())?;
            if let Some(s) = scenario {
                cfg.scenario = s;
            }
            let s = commands::train(&cfg)?;
            for f in &s.folds {
                let c = f.c_index.map_or("undefined".to_string(), |c| format!("{c:.4}"));
                println!("fold {}: C-index {c} (best epoch {} of {})", f.fold, f.best_epoch, f.epochs_run);
            }
            println!("{} C-index {} over {} folds", s.scenario.as_str(), s.c_index, s.folds.len());
            println!("wrote {}", cfg.out_dir.join("summary.json").display());
        }
        Command::Evaluate { args, scenario } => {
            let (inputs, cfg) = eval_inputs(&args)?;
            let scenario = scenario.or(cfg.map(|c| c.scenario)).unwrap_or(Scenario::Complete);
            let out = commands::evaluate_cmd(&inputs, scenario)?;
            let c = out.report.c_index.map_or("undefined".to_string(), |c| format!("{c:.4}"));
            println!("{} C-index {c} over {} pairs", scenario.as_str(), out.report.n_pairs);
            println!("median-split log-rank chi2 {:.3}, p {:.3e}", out.log_rank.chi2, out.log_rank.p);
            for f in &out.files {
                println!("wrote {}", f.display());
            }
        }
        Command::ImputeReport { args } => {
            let (inputs, _) = eval_inputs(&args)?;
            let report = commands::impute_report(&inputs)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Flops { t, d, d_r, out } => {
            let (csv, ratio) = commands::flops(t, d, d_r);
            print!("{csv}");
            eprintln!("low_rank/dense ratio {ratio:.4}");
            if let Some(dir) = out {
                commands::write_flops(&dir, &csv).context("writing flops.csv")?;
            }
        }
    }
    Ok(())
}

/// 2 configuration, 3 numerical failure, 4 model/data incompatibility, 1 other.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return 2;
        }
        if cause.is::<Incompatible>() {
            return 4;
        }
        if let Some(e) = cause.downcast_ref::<ModelError>() {
            match e {
                ModelError::Config(_) => return 2,
                ModelError::Numerical { .. } => return 3,
                ModelError::DimMismatch { .. } => return 4,
                _ => {}
            }
        }
        if let Some(DataError::Config(_) | DataError::InfeasibleCensoring { .. }) = cause.downcast_ref::<DataError>() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
