use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::{AssumptionsArgs, BoundsArgs, ConvergeArgs, GenDataArgs, LinevalArgs};

/// Generative vs discriminative linear classifiers: data generation,
/// sample-complexity experiments, assumption diagnostics and bounds.
#[derive(Debug, Parser)]
#[command(name = "gendisc", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON config file; explicit flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Run every grid cell on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample the synthetic Gaussian mixture into a feature CSV.
    GenData(GenDataArgs),
    /// Sample-complexity sweep: m_conv against n for both classifiers.
    Converge(ConvergeArgs),
    /// Naive Bayes assumption statistics of a feature file.
    Assumptions(AssumptionsArgs),
    /// Error curves and two-regimes verdict on train/test feature files.
    Lineval(LinevalArgs),
    /// Logistic-loss threshold, generalization bound and transform table.
    Bounds(BoundsArgs),
}

/// Failure classes mapped onto exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<gendisc::Error> for CliError {
    fn from(e: gendisc::Error) -> Self {
        use gendisc::Error as E;
        match e {
            E::Io { .. } | E::NonFinite(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let exec = setup_execution(&cli.global)?;
    let file = cli.global.config.as_deref();
    match cli.command {
        Command::GenData(a) => {
            let (config, out) = a.resolve(file)?;
            commands::gen_data(&config, &out)
        }
        Command::Converge(a) => {
            let (config, out_dir) = a.resolve(file)?;
            commands::converge(&config, &out_dir, exec)
        }
        Command::Assumptions(a) => {
            let (config, train, out_dir) = a.resolve(file)?;
            commands::assumptions(&config, &train, &out_dir)
        }
        Command::Lineval(a) => commands::lineval(&a.resolve(file)?, exec),
        Command::Bounds(a) => {
            let (config, out_dir) = a.resolve(file)?;
            commands::bounds(&config, &out_dir)
        }
    }
}

fn setup_execution(g: &GlobalArgs) -> Result<gendisc::Execution, CliError> {
    if g.threads == Some(0) {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    #[cfg(feature = "parallel")]
    if let Some(t) = g.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    Ok(if g.sequential {
        gendisc::Execution::Sequential
    } else {
        gendisc::Execution::Parallel
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
