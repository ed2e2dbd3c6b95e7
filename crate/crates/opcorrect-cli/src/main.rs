//! Batch driver for the coefficient-field inversion pipeline.
//!
//! A run is configured by a flat `key = value` file and produces artifacts
//! in its output directory: synthetic truth and data, training snapshots,
//! reduced bases, a trained surrogate, Markov chains for the model /
//! surrogate / corrected-surrogate likelihoods, posterior means, and cost
//! and error-bound reports. Re-running a completed stage with an unchanged
//! configuration is a no-op unless `--force` is given. The environment
//! variable `OPCORRECT_SEED` overrides every configured seed.

mod config;
mod context;
mod meta;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use meta::RunDir;
use stages::MapKind;

#[derive(Parser)]
#[command(name = "opcorrect", version, about = "Residual-corrected neural operator pipeline for Bayesian coefficient inversion")]
struct Cli {
    /// Path to the run configuration (flat `key = value` text).
    #[arg(long, global = true, default_value = "opcorrect.cfg")]
    config: PathBuf,

    /// Worker threads for chains and sample generation.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Re-run stages even when their artifacts are up to date.
    #[arg(long, global = true)]
    force: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic truth parameter field.
    GenTruth,
    /// Solve the forward problem at the truth and write noisy observations.
    GenData,
    /// Generate prior samples and their forward solutions for training.
    GenTraining,
    /// Compute the derivative-informed input basis and the POD output basis.
    ComputeBases,
    /// Train the reduced-coordinate network on the snapshots.
    Train,
    /// Evaluate raw and corrected generalization accuracy on a test set.
    EvalAccuracy,
    /// Run pCN chains with the chosen likelihood state map.
    Mcmc {
        #[arg(long, value_enum)]
        map: MapKind,
    },
    /// Average the coefficient field over post-burn-in samples.
    PosteriorMean {
        #[arg(long, value_enum)]
        map: MapKind,
    },
    /// Emit cost or error-bound reports.
    Report {
        #[command(subcommand)]
        kind: ReportKind,
    },
    /// Rasterize a stored field to PGM.
    Render {
        /// Input `FEFIELD v1` file.
        #[arg(long)]
        field: PathBuf,
        /// Output PGM path (a `.txt` sidecar records the value range).
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum ReportKind {
    /// Observed and asymptotic speedups from the chain counters.
    Speedup,
    /// Error-bound constants and the importance-sampling KL estimate.
    Bound,
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    stages::ensure_thread_pool(cli.jobs)?;

    // render needs no configuration or run directory
    if let Command::Render { field, out } = &cli.command {
        return stages::render(field, out);
    }

    let cfg = RunConfig::load(&cli.config)?;
    let run = RunDir::create(&cfg.output_dir, &cfg.config_hash(), &cfg.resolved_text())?;

    match cli.command {
        Command::GenTruth => stages::gen_truth(&cfg, &run, cli.force),
        Command::GenData => stages::gen_data(&cfg, &run, cli.force),
        Command::GenTraining => stages::gen_training(&cfg, &run, cli.force),
        Command::ComputeBases => stages::compute_bases(&cfg, &run, cli.force),
        Command::Train => stages::train(&cfg, &run, cli.force),
        Command::EvalAccuracy => stages::eval_accuracy(&cfg, &run, cli.force),
        Command::Mcmc { map } => stages::mcmc(&cfg, &run, map, cli.force),
        Command::PosteriorMean { map } => stages::posterior_mean_cmd(&cfg, &run, map, cli.force),
        Command::Report { kind } => match kind {
            ReportKind::Speedup => stages::report_speedup(&cfg, &run),
            ReportKind::Bound => stages::report_bound(&cfg, &run),
        },
        Command::Render { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
