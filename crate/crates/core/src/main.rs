use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use flowtrack::cli::{self, CliError, ProviderKind};

#[derive(Parser)]
#[command(
    name = "flowtrack",
    version,
    about = "Dense-flow feature tracking harness"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic dataset from a sequence spec file.
    Gen {
        spec: PathBuf,
        out_dir: PathBuf,
        /// Tracker config used to place flow corruption.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Track a dataset and write the tracks CSV (plus sidecars).
    Track {
        config: PathBuf,
        dataset: PathBuf,
        /// Overrides the config's `provider`.
        #[arg(long, value_parser = parse_provider)]
        provider: Option<ProviderKind>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Score a tracks CSV against the dataset's ground truth.
    Eval {
        tracks: PathBuf,
        dataset: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Dense-flow provider vs. the LK baseline on one dataset.
    Compare {
        config: PathBuf,
        dataset: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Print a config with every setting spelled out.
    DumpConfig { config: PathBuf },
}

fn parse_provider(s: &str) -> Result<ProviderKind, String> {
    s.parse()
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Gen {
            spec,
            out_dir,
            config,
        } => cli::cmd_gen(&spec, &out_dir, config.as_deref()),
        Command::Track {
            config,
            dataset,
            provider,
            out,
        } => {
            let outputs = cli::cmd_track(&config, &dataset, provider, &out)?;
            eprintln!("tracked {} frames into {}", outputs.len(), out.display());
            Ok(())
        }
        Command::Eval {
            tracks,
            dataset,
            out,
        } => {
            let m = cli::cmd_eval(&tracks, &dataset, &out)?;
            print!(
                "{}",
                m.to_csv()
                    .lines()
                    .last()
                    .map(|l| format!("{l}\n"))
                    .unwrap_or_default()
            );
            Ok(())
        }
        Command::Compare {
            config,
            dataset,
            out,
        } => {
            let report = cli::cmd_compare(&config, &dataset, &out)?;
            print!("{}", report.table());
            Ok(())
        }
        Command::DumpConfig { config } => {
            print!("{}", cli::dump_config(&cli::parse_config(&config)?));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
