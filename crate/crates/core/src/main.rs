use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::{error, info, warn};

use lobres::config::{load_config, ExperimentKind, RunConfig};
use lobres::runner;

#[derive(Parser)]
#[command(name = "lobres", version, about = "Order-book simulation and high-resilience limit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one strategy at one resilience scale
    Simulate(RunArgs),
    /// Run a convergence, block-dominance or tracker-bound experiment
    Converge(RunArgs),
    /// Run the certainty-equivalent comparison of tracker speeds
    Utility(RunArgs),
    /// Check a configuration and estimate its cost without simulating
    Validate(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides monte_carlo.seed
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides out_dir
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = LogLevel::Info)]
    log_level: LogLevel,
}

#[derive(Clone, Copy, ValueEnum)]
enum LogLevel {
    Error,
    Warn,
    Info,
    Debug,
}

impl From<LogLevel> for log::LevelFilter {
    fn from(l: LogLevel) -> Self {
        match l {
            LogLevel::Error => log::LevelFilter::Error,
            LogLevel::Warn => log::LevelFilter::Warn,
            LogLevel::Info => log::LevelFilter::Info,
            LogLevel::Debug => log::LevelFilter::Debug,
        }
    }
}

fn accepts(command: &Command, kind: ExperimentKind) -> bool {
    match command {
        Command::Simulate(_) => kind == ExperimentKind::Simulate,
        Command::Utility(_) => kind == ExperimentKind::Utility,
        Command::Converge(_) => !matches!(kind, ExperimentKind::Simulate | ExperimentKind::Utility),
        Command::Validate(_) => true,
    }
}

fn load(args: &RunArgs) -> lobres::Result<RunConfig> {
    let mut config = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.monte_carlo.seed = seed;
    }
    if let Some(out) = &args.out {
        config.out_dir = Some(out.clone());
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let args = match &cli.command {
        Command::Simulate(a) | Command::Converge(a) | Command::Utility(a) | Command::Validate(a) => a,
    };
    env_logger::Builder::new().filter_level(args.log_level.into()).format_timestamp(None).init();

    let config = match load(args) {
        Ok(c) => c,
        Err(e) => {
            error!("{}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    if !accepts(&cli.command, config.experiment) {
        error!(
            "experiment \"{}\" cannot be run with this subcommand",
            config.experiment.name()
        );
        return ExitCode::from(2);
    }

    if let Command::Validate(_) = cli.command {
        return match runner::validate(&config) {
            Ok(report) => {
                print!("{report}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                error!("{e}");
                ExitCode::from(2)
            }
        };
    }

    let out = config
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(config.experiment.name()));
    info!("running {} into {}", config.experiment.name(), out.display());
    match runner::run(&config, &out) {
        Ok(output) => {
            for g in &output.summary.gates {
                let status = if g.passed { "PASS" } else { "FAIL" };
                println!("{status} {}: {}", g.name, g.detail);
            }
            for f in &output.files {
                info!("wrote {}", f.display());
            }
            if output.summary.all_passed {
                ExitCode::SUCCESS
            } else {
                warn!("some gates failed");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            error!("{e}");
            ExitCode::from(2)
        }
    }
}
