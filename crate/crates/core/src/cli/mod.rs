//! `spinorlab` command-line front end.
//!
//! Exit codes: 0 success, 1 configuration, input or I/O error, 2 numerical
//! failure. `SPINORLAB_THREADS` sets the worker-pool size; output is
//! identical for any value.

pub mod config;
pub mod output;
pub mod scenarios;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use config::Config;
pub use output::{Format, Table};
pub use scenarios::{Overrides, RunOutput};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("numerical error: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => 2,
            _ => 1,
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        use crate::Error as E;
        match e {
            E::StepUnderflow { .. } | E::NonFinite(_) | E::NotNormalized { .. } => CliError::Numerical(e.to_string()),
            E::InsufficientData(_) | E::DimensionMismatch { .. } => CliError::Input(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "spinorlab", version, about = "Spin-2 sublevel dynamics: RF rotations, STIRAP, Ramsey and echo")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the scenario described by a config file.
    Run {
        config: PathBuf,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Monte Carlo seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
        /// Monte Carlo sample count (overrides the config).
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// List scenarios and their config keys.
    ListScenarios,
}

/// Reads `path` and runs its scenario.
pub fn run_config_file(path: &Path, overrides: Overrides) -> Result<RunOutput, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let cfg = Config::parse(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    scenarios::run(&cfg, overrides, base)
}

fn thread_count() -> Result<Option<usize>, CliError> {
    match std::env::var("SPINORLAB_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!("SPINORLAB_THREADS=`{v}` is not a positive integer"))),
        },
    }
}

fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::ListScenarios => {
            print!("{}", scenarios::listing());
            Ok(())
        }
        Command::Run {
            config,
            out,
            seed,
            samples,
            format,
        } => {
            let result = run_config_file(&config, Overrides { seed, samples })?;
            for w in &result.warnings {
                eprintln!("warning: {w}");
            }
            match out {
                Some(path) => {
                    let file =
                        std::fs::File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                    result.table.write(std::io::BufWriter::new(file), format)?;
                    let mut stdout = std::io::stdout().lock();
                    for line in &result.report {
                        writeln!(stdout, "{line}").map_err(|e| CliError::Io(e.to_string()))?;
                    }
                }
                None => {
                    result.table.write(std::io::stdout().lock(), format)?;
                    for line in &result.report {
                        eprintln!("{line}");
                    }
                }
            }
            Ok(())
        }
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = thread_count().and_then(|threads| match threads {
        None => execute(cli.command),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?
            .install(|| execute(cli.command)),
    });
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn main() -> i32 {
    main_with_args(std::env::args_os())
}
