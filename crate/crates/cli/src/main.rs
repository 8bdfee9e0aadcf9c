mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CliError, Overrides};

#[derive(Parser, Debug)]
#[command(
    name = "seqdevid",
    version,
    about = "Sequence-based IoT device identification experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the master seed (takes precedence over SEQDEVID_SEED).
    #[arg(long)]
    seed: Option<u64>,
    /// Maximum concurrent training runs; 1 runs everything sequentially.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ingest captures and write the dataset CSV.
    Extract {
        #[command(flatten)]
        common: Common,
    },
    /// Train one architecture and save the model.
    Train {
        #[command(flatten)]
        common: Common,
        /// Architecture to train (e.g. vanilla, stacked, cnn, ed).
        #[arg(long, default_value = "vanilla")]
        arch: String,
    },
    /// Run the repeated comparison and write the report.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        repeats: Option<usize>,
    },
    /// Re-render markdown, SVG and CSV from an existing report JSON.
    Report {
        #[command(flatten)]
        common: Common,
    },
}

fn overrides(common: &Common, repeats: Option<usize>) -> Result<Overrides, CliError> {
    let env_seed =
        match std::env::var("SEQDEVID_SEED") {
            Ok(v) => Some(v.trim().parse::<u64>().map_err(|_| {
                CliError::Usage(anyhow::anyhow!("SEQDEVID_SEED must be an unsigned integer, got {v:?}"))
            })?),
            Err(_) => None,
        };
    if common.jobs == Some(0) {
        return Err(CliError::Usage(anyhow::anyhow!("--jobs must be at least 1")));
    }
    Ok(Overrides {
        out: common.out.clone(),
        seed: common.seed.or(env_seed),
        repeats,
        jobs: common.jobs,
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Extract { common } => {
            let o = overrides(&common, None)?;
            commands::extract(&common.config, &o)
        }
        Command::Train { common, arch } => {
            let o = overrides(&common, None)?;
            commands::train(&common.config, &o, &arch)
        }
        Command::Compare { common, repeats } => {
            let o = overrides(&common, repeats)?;
            commands::compare(&common.config, &o)
        }
        Command::Report { common } => {
            let o = overrides(&common, None)?;
            commands::report(&common.config, &o)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.inner());
            ExitCode::from(e.code())
        }
    }
}
