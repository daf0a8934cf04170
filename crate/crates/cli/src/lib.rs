//! Command surface of the `critheat` binary.
//!
//! Exit codes: 0 success, 1 experiment precondition not met, 2 configuration,
//! 3 I/O, 4 numerical corruption, 5 theorem-inconsistent sweep row,
//! 6 sweep with rows whose hypotheses do not hold.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use critheat::config::{parse_config, RunConfig};
use critheat::Error;

mod commands;
pub mod output;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("output directory {} is not empty; pass --overwrite to replace it", .0.display())]
    OutputExists(PathBuf),
    #[error("no output directory: pass --out or set `output` in the config")]
    NoOutput,
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => match e {
                Error::InvalidArgument { .. } | Error::Parse { .. } | Error::Config { .. } => 2,
                Error::Format(_) => 3,
                Error::Corruption { .. } | Error::StepCollapse { .. } | Error::Consistency { .. } => 4,
                _ => 1,
            },
            CliError::Io { .. } | CliError::OutputExists(_) => 3,
            CliError::NoOutput | CliError::Usage(_) => 2,
        }
    }
}

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    Corruption,
    Inconsistent,
    Partial,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Success => 0,
            Status::Corruption => 4,
            Status::Inconsistent => 5,
            Status::Partial => 6,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "critheat", version, about = "Radial experiments for the energy-critical heat equation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one initial datum and record its trajectory.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Also write every checkpointed field.
        #[arg(long)]
        checkpoints: bool,
    },
    /// Dichotomy sweep over dimensions and initial data.
    Sweep(CommonArgs),
    /// Fit the decay rate of a dissipative run.
    Decayfit(CommonArgs),
    /// Estimate the decay character of the initial datum.
    Character(CommonArgs),
    /// Frequency-splitting diagnostic along a run.
    Splitting(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub overwrite: bool,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl CommonArgs {
    pub fn load(&self) -> Result<RunConfig, CliError> {
        let text = fs::read_to_string(&self.config).map_err(|source| CliError::Io {
            path: self.config.clone(),
            source,
        })?;
        let mut cfg = parse_config(&text)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }

    pub fn out_dir(&self, cfg: &RunConfig) -> Result<PathBuf, CliError> {
        self.out
            .clone()
            .or_else(|| cfg.output.as_ref().map(PathBuf::from))
            .ok_or(CliError::NoOutput)
    }
}

fn configure_threads(threads: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<Status, CliError> {
    let (common, verb) = match &cli.command {
        Command::Run { common, .. } => (common, "run"),
        Command::Sweep(c) => (c, "sweep"),
        Command::Decayfit(c) => (c, "decayfit"),
        Command::Character(c) => (c, "character"),
        Command::Splitting(c) => (c, "splitting"),
    };
    configure_threads(common.threads)?;
    let cfg = common.load()?;
    let out = common.out_dir(&cfg)?;
    let dir = output::OutputDir::open(Path::new(&out), common.overwrite)?;
    match &cli.command {
        Command::Run { checkpoints, .. } => commands::run(&cfg, dir, *checkpoints),
        Command::Sweep(_) => commands::sweep(&cfg, dir),
        Command::Decayfit(_) => commands::decayfit(&cfg, dir),
        Command::Character(_) => commands::character(&cfg, dir),
        Command::Splitting(_) => commands::splitting(&cfg, dir),
    }
    .map_err(|e| {
        eprintln!("critheat {verb}: aborted");
        e
    })
}

/// Parses `args`, runs the command and maps the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(status) => ExitCode::from(status.code()),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
