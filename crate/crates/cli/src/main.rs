//! `tierlink` command-line front end.
//!
//! Every subcommand reads one JSON configuration and writes CSV files into
//! the output directory. Exit codes: 0 success, 2 configuration error,
//! 3 infeasible network, 1 anything else (I/O).

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tierlink::config::{load_config, ExperimentConfig};
use tierlink::markov::PriorityStrategy;
use tierlink::strategy::StrategyMode;
use tierlink::Error;

#[derive(Parser)]
#[command(name = "tierlink", version, about = "Multi-hop routing reliability in multi-tier satellite-terrestrial networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Interruption matrices, transition matrices, hop statistics and the
    /// multi-hop interruption of the configured strategy.
    Analyze(Common),
    /// Monte Carlo estimate of the configured strategy.
    Simulate(Common),
    /// Analytic report of every strategy and the heuristic picks.
    StrategySearch {
        #[command(flatten)]
        common: Common,
        /// Also simulate every strategy with common random numbers.
        #[arg(long)]
        simulate: bool,
    },
    /// Availability, coverage, URLLC rate and multi-flow interruption.
    Metrics(Common),
    /// The configured parameter sweep as one long-format table.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Monte Carlo trials (overrides the configuration).
    #[arg(long)]
    iterations: Option<u64>,
    /// Base seed (overrides the configuration).
    #[arg(long)]
    seed: Option<u64>,
    /// Explicit priority ranks such as "3,2,1"; selects explicit mode.
    #[arg(long)]
    strategy: Option<PriorityStrategy>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Horizons of the cumulative interruption curve, comma separated.
    #[arg(long, value_delimiter = ',')]
    ne: Vec<usize>,
}

/// Failure of a command.
#[derive(Debug)]
pub enum AppError {
    Lib(Error),
    Io(String),
}

impl From<Error> for AppError {
    fn from(e: Error) -> Self {
        AppError::Lib(e)
    }
}

impl AppError {
    fn exit_code(&self) -> u8 {
        match self {
            AppError::Io(_) => 1,
            AppError::Lib(e) => match e {
                Error::NonAbsorbing { .. } | Error::NoStationary(_) | Error::NoFeasibleStrategy | Error::Domain(_) => 3,
                _ => 2,
            },
        }
    }
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AppError::Lib(Error::Config(list)) => {
                writeln!(f, "configuration error:")?;
                for m in list {
                    writeln!(f, "  - {m}")?;
                }
                Ok(())
            }
            AppError::Lib(e) => write!(f, "{e}"),
            AppError::Io(m) => write!(f, "{m}"),
        }
    }
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, AppError> {
        let mut cfg = load_config(&self.config)?;
        if let Some(n) = self.iterations {
            cfg.iterations = n;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(s) = &self.strategy {
            cfg.strategy_mode = StrategyMode::Explicit;
            cfg.explicit_strategy = Some(s.clone());
        }
        if !self.ne.is_empty() {
            cfg.cumulative_horizons = self.ne.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn install_threads(&self) -> Result<(), AppError> {
        if let Some(n) = self.threads {
            if n == 0 {
                return Err(Error::Config(vec!["--threads must be at least 1".to_string()]).into());
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| AppError::Io(format!("cannot start {n} threads: {e}")))?;
        }
        Ok(())
    }
}

fn run(cli: Cli) -> Result<(), AppError> {
    let common = match &cli.command {
        Command::Analyze(c) | Command::Simulate(c) | Command::Metrics(c) | Command::Sweep(c) => c,
        Command::StrategySearch { common, .. } => common,
    };
    common.install_threads()?;
    let cfg = common.load()?;
    output::ensure_dir(&common.out)?;
    let written = match &cli.command {
        Command::Analyze(_) => commands::analyze(&cfg, &common.out)?,
        Command::Simulate(_) => commands::simulate(&cfg, &common.out)?,
        Command::StrategySearch { simulate, .. } => commands::strategy_search(&cfg, &common.out, *simulate)?,
        Command::Metrics(_) => commands::metrics(&cfg, &common.out)?,
        Command::Sweep(_) => commands::sweep(&cfg, &common.out)?,
    };
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprint!("error: {e}");
            if !matches!(e, AppError::Lib(Error::Config(_))) {
                eprintln!();
            }
            ExitCode::from(e.exit_code())
        }
    }
}
