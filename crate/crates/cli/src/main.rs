mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::{usage, CliResult};

/// Steered-response-power sound source localization.
#[derive(Debug, Parser)]
#[command(name = "xsrp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a free-field scene: scene.wav, truth.json, manifest.json.
    Simulate {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Per-frame source estimates as JSON lines.
    Localize {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Write the map of one frame as .csv or .pgm.
        #[arg(long)]
        export_map: Option<PathBuf>,
        /// Frame whose map is exported.
        #[arg(long, default_value_t = 0, requires = "export_map")]
        map_frame: usize,
    },
    /// Particle-filter trajectory as JSON lines.
    Track {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Complexity sweep: predicted operations against measured counters and time.
    Bench {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
}

/// Caps rayon's global pool at `XSRP_THREADS` workers.
fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("XSRP_THREADS") else { return Ok(()) };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| usage(format!("XSRP_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| usage(format!("cannot configure {n} worker threads: {e}")))
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Simulate { config, out } => commands::simulate(&config, &out),
        Command::Localize { config, input, out, export_map, map_frame } => {
            commands::localize(&config, &input, &out, export_map.as_deref().map(|p| (p, map_frame)))
        }
        Command::Track { config, input, out } => commands::track(&config, &input, &out),
        Command::Bench { config, out } => commands::bench(&config, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("xsrp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
