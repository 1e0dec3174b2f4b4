use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use sthermo_cli::{render, run, Format, JobConfig, Overrides, Timing};

/// Spectral potentials, t-entropy and variational-principle checks for
/// finite dynamical systems.
#[derive(Parser, Debug)]
#[command(name = "sthermo", version)]
struct Args {
    /// Job config (TOML, or JSON when it starts with `{`).
    #[arg(long)]
    config: PathBuf,
    /// Report path; defaults to the config's `output.path`, else stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Seed for randomized multi-start optimizers.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Record wall-clock time in the report. Off by default so repeated
    /// runs give byte-identical reports.
    #[arg(long)]
    timing: bool,
}

const EXIT_VALIDATION: u8 = 2;
const EXIT_IO: u8 = 1;

fn main() -> ExitCode {
    let args = Args::parse();
    let config = match JobConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    let overrides = Overrides { seed: args.seed, n_max: args.n_max, tol: args.tol };
    let start = Instant::now();
    let mut report = match run(&config, &overrides) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    if args.timing {
        report.timing = Some(Timing { wall_clock_seconds: start.elapsed().as_secs_f64() });
    }
    let spec = config.output.clone().unwrap_or_default();
    let format = args.format.unwrap_or(spec.format);
    let text = render(&report, format);
    match args.output.or(spec.path) {
        Some(path) => {
            if let Err(e) = std::fs::write(&path, text) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(EXIT_IO);
            }
        }
        None => print!("{text}"),
    }
    if let Some(msg) = &report.error {
        eprintln!("warning: {msg}");
    }
    ExitCode::from(report.exit_code() as u8)
}
