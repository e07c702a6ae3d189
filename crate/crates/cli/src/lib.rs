//! Command-line front end: dataset loading, configuration, and JSON reports.
//!
//! [`run_command`] is the whole program minus process plumbing, so tests can
//! drive it with an argument vector and capture what it writes.

pub mod commands;
pub mod config;
pub mod dataset;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use commands::Report;
pub use config::{ConfigError, RunConfig};
pub use dataset::{
    export_distribution, load_dataset, read_dataset, Dataset, DatasetError, PredictionMode,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_LIMIT: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Core(#[from] multical::Error),
    #[error("cannot write output: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(multical::Error::LimitExceeded { .. })
            | CliError::Dataset(DatasetError::Model(multical::Error::LimitExceeded { .. })) => {
                EXIT_LIMIT
            }
            _ => EXIT_USAGE,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "multical",
    version,
    about = "Multicalibration audits, sample-size bounds, and convergence experiments"
)]
pub struct Cli {
    #[command(flatten)]
    pub overrides: ConfigArgs,

    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand. They override the config file.
#[derive(Debug, Default, Args)]
pub struct ConfigArgs {
    /// `key = value` config file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    #[arg(long, global = true)]
    pub psi: Option<f64>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<PredictionMode>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Audit every predictor in a dataset.
    Audit(commands::AuditArgs),
    /// Print the sample-size bounds that apply to the configuration.
    SampleSize(commands::SampleSizeArgs),
    /// Monte Carlo check of uniform convergence at a given sample size.
    Verify(commands::VerifyArgs),
    /// Exact graph and VC dimensions of a dataset's predictors.
    Dims(commands::DimsArgs),
    /// Distinguishing experiment on the two-distribution lower-bound instance.
    LowerBoundDemo(commands::LowerBoundArgs),
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.load_file(path)?;
        }
        macro_rules! flag {
            ($field:ident => $target:ident) => {
                if let Some(v) = self.$field {
                    cfg.$target = v;
                }
            };
        }
        flag!(alpha => alpha);
        flag!(gamma => gamma);
        flag!(psi => psi);
        flag!(epsilon => epsilon);
        flag!(delta => delta);
        flag!(lambda => lambda);
        flag!(trials => trials);
        flag!(seed => master_seed);
        flag!(mode => mode);
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses `argv` (program name first), runs the subcommand, and returns the
/// exit code: 0 success, 1 audit violations, 2 usage or parse error, 3 a
/// brute-force limit was exceeded.
pub fn run_command<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    let cfg = cli.overrides.resolve()?;
    let (json, code) = match &cli.command {
        Command::Audit(a) => commands::audit(&cfg, a)?,
        Command::SampleSize(a) => commands::sample_size(&cfg, a)?,
        Command::Verify(a) => commands::verify(&cfg, a)?,
        Command::Dims(a) => commands::dims(&cfg, a)?,
        Command::LowerBoundDemo(a) => commands::lower_bound_demo(&cfg, a)?,
    };
    match &cli.overrides.output {
        Some(path) => std::fs::write(path, json)?,
        None => out.write_all(json.as_bytes())?,
    }
    Ok(code)
}
