//! Command-line front end; `run` is the whole program behind `main`.

mod commands;
mod io;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "csph", version, about = "Bivariate common-shock phase-type models")]
struct Cli {
    /// Worker threads (default: available parallelism). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw an exact sample from a model.
    Simulate(SimulateArgs),
    /// Maximum-likelihood fit of the first-margin-scaled model to a dataset.
    Fit(FitArgs),
    /// Risk report: moments, V@R, common-shock CV@R/ERM/MTCE/MTCov, tail indices.
    Risk(RiskArgs),
    /// Conditional dependence measures given the shock time.
    Dependence(DependenceArgs),
    /// Joint density and distribution function at the points of a CSV file.
    Eval(EvalArgs),
    /// Check a model file and report every broken constraint.
    Validate(ValidateArgs),
}

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(short, long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Also write tau12, k, resid1, resid2.
    #[arg(long)]
    pub latent: bool,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub p0: usize,
    #[arg(long, default_value_t = 2)]
    pub p1: usize,
    /// Take logs of both columns before fitting.
    #[arg(long)]
    pub log_transform: bool,
    /// With --log-transform, keep only pairs whose logs both exceed this.
    #[arg(long, requires = "log_transform")]
    pub lower: Option<f64>,
    /// Estimate the initial distribution instead of starting in state 1.
    #[arg(long)]
    pub estimate_alpha: bool,
    #[arg(long, default_value_t = 5)]
    pub starts: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 2000)]
    pub max_iter: usize,
    /// Model file (reduced form) used as the first start.
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Fit report (JSON); stdout when absent.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Also write the fitted model on its own.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
}

#[derive(Args)]
pub struct RiskArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value = "0.95,0.975,0.99")]
    pub levels: String,
    /// Shock thresholds: `v1,v2,...` or `start:stop:count`; empty for none.
    /// Default: --a-points points over [0, 0.99-quantile of the shock time].
    #[arg(long)]
    pub a_grid: Option<String>,
    #[arg(long, default_value_t = 50)]
    pub a_points: usize,
    #[arg(long, default_value = "0.5")]
    pub vartheta: String,
    /// Report (JSON); stdout when absent.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Directory for two-column CSV curves.
    #[arg(long)]
    pub curves: Option<PathBuf>,
}

#[derive(Args)]
pub struct DependenceArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Shock times; same syntax and default as the risk a-grid.
    #[arg(long)]
    pub t_grid: Option<String>,
    #[arg(long, default_value_t = 50)]
    pub t_points: usize,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV of z1,z2 (header optional).
    #[arg(long)]
    pub points: PathBuf,
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ValidateArgs {
    pub model: PathBuf,
}

/// Failures split by who has to act: bad input (2) or numerics (3).
pub enum Failure {
    Input(anyhow::Error),
    Numeric(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        use csph::Error as E;
        match e.downcast_ref::<E>() {
            Some(E::Singular { .. } | E::Numeric(_) | E::Domain(_) | E::Fit(_)) => Failure::Numeric(e),
            _ => Failure::Input(e),
        }
    }
}

impl From<csph::Error> for Failure {
    fn from(e: csph::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.into())
    }
}

/// Parses `args` (program name first) and runs the command. Exit codes:
/// 0 success, 2 bad input or usage, 3 numerical failure.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot set up {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Fit(a) => commands::fit(a),
        Command::Risk(a) => commands::risk(a),
        Command::Dependence(a) => commands::dependence(a),
        Command::Eval(a) => commands::eval(a),
        Command::Validate(a) => commands::validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
