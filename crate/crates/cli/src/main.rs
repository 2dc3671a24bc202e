use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use tsd_cli::run::{run, Command, RunManifest};

/// Threshold signal detection simulator.
#[derive(Parser)]
#[command(name = "tsd", version)]
struct Cli {
    /// Experiment to run
    #[arg(value_enum)]
    command: Command,

    /// TOML config (optional for `moments` and `selftest`)
    #[arg(short, long)]
    config: Option<PathBuf>,

    /// Directory for result files
    #[arg(short, long, default_value = "tsd_out")]
    out: PathBuf,

    /// Replaces the config seed
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads (0 = all cores)
    #[arg(short, long, default_value_t = 0)]
    workers: usize,

    /// Write per-cycle events.jsonl (born, g2)
    #[arg(long)]
    events: bool,

    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let manifest = RunManifest {
        config_path: cli.config,
        command: cli.command,
        output_dir: cli.out,
        seed_override: cli.seed,
        verbosity: cli.verbose,
        workers: cli.workers,
        event_log: cli.events,
    };
    match run(&manifest) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
