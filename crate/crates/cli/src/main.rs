//! `misselect`: batch front end for fitting, scoring, path building,
//! simulation studies and theory diagnostics.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 solver failure,
//! 3 degenerate covariance contrast.

mod commands;
mod config;
mod data;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::{Common, DataInput};
use crate::config::Config;
use crate::error::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "misselect", version, about = "Model selection for possibly misspecified GLMs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct CommonArgs {
    /// Sectioned key=value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Working family: gaussian, bernoulli or poisson.
    #[arg(long, global = true)]
    family: Option<String>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// Design matrix CSV (rows are observations).
    #[arg(long)]
    design: PathBuf,
    /// Response CSV with a single column.
    #[arg(long)]
    response: PathBuf,
    /// Both CSV files start with a header row.
    #[arg(long)]
    header: bool,
    /// Prepend an intercept column to every fit.
    #[arg(long)]
    intercept: bool,
    /// Gaussian scale handling: unit or profile.
    #[arg(long)]
    dispersion: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit one support and report the QMLE, contrast and criteria.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        /// Column indices (0-based), `all` or `none`.
        #[arg(long)]
        support: Option<String>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Screen, build a penalized path, refit and score every candidate.
    Path {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Score the candidate supports listed in a file, one per line.
    Score {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        candidates: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run simulation experiments and write summary tables.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Monte Carlo checks of the KL expansion and asymptotic normality.
    Diagnose {
        #[command(flatten)]
        common: CommonArgs,
    },
}

impl DataArgs {
    fn input(&self) -> DataInput {
        DataInput {
            design: self.design.clone(),
            response: self.response.clone(),
            header: self.header,
            intercept: self.intercept,
            dispersion: self.dispersion.clone(),
        }
    }
}

fn common(args: &CommonArgs) -> CliResult<(Common, usize)> {
    let config = match &args.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let workers = match args.workers {
        Some(w) => w,
        None => config.get_or("run", "workers", 0usize)?,
    };
    Ok((
        Common {
            config,
            config_path: args.config.clone(),
            family: args.family.clone(),
            seed: args.seed,
            out: args.out.clone(),
        },
        workers,
    ))
}

fn run(cli: Cli) -> CliResult<()> {
    let args = match &cli.command {
        Command::Fit { common, .. }
        | Command::Path { common, .. }
        | Command::Score { common, .. }
        | Command::Simulate { common }
        | Command::Diagnose { common } => common,
    };
    let (common, workers) = common(args)?;
    // 0 lets rayon use the available parallelism
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::usage(format!("cannot start worker pool: {e}")))?;
    let workers = pool.current_num_threads();
    pool.install(|| match &cli.command {
        Command::Fit { data, support, .. } => commands::cmd_fit(&common, &data.input(), support.as_deref()),
        Command::Path { data, .. } => commands::cmd_path(&common, &data.input()),
        Command::Score { data, candidates, .. } => commands::cmd_score(&common, &data.input(), candidates),
        Command::Simulate { .. } => commands::cmd_simulate(&common, workers),
        Command::Diagnose { .. } => commands::cmd_diagnose(&common),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
