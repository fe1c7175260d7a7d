//! `canonme`: canonical forms, rate series and non-Markovianity measures
//! from a JSON model config.
//!
//! Exit codes: 0 success, 2 validation error, 3 numerical failure. On a
//! numerical failure a JSON failure report (with any singular-time report)
//! is written to `<output>.failure.json`, or to stderr without `--output`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use canonme::pipeline::{self, Command, Format, RunOptions};
use canonme::{Error, ErrorClass};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "canonme", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Canonical form at a single time (JSON).
    Canon(Args),
    /// Branch-tracked rate series.
    Series(Args),
    /// Full measure report.
    Measures(Args),
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(clap::Args)]
struct Args {
    /// Model config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the grid start.
    #[arg(long, allow_negative_numbers = true)]
    t0: Option<f64>,
    /// Override the grid end.
    #[arg(long, allow_negative_numbers = true)]
    t1: Option<f64>,
    /// Override the number of grid intervals.
    #[arg(long)]
    steps: Option<usize>,
    /// Rates below `-tol_neg` count as negative [default: 1e-10·max|γ|].
    #[arg(long)]
    tol_neg: Option<f64>,
    /// Condition number above which a map is flagged singular [default: 1e8].
    #[arg(long)]
    cond_max: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Output format [default: json for canon and measures, csv for series].
    #[arg(long, value_enum)]
    format: Option<OutFormat>,
}

const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn threads_from_env() -> Result<usize, String> {
    match std::env::var("CANONME_THREADS") {
        Err(_) => Ok(0),
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| format!("CANONME_THREADS must be a non-negative integer, got `{v}`")),
    }
}

fn write_output(path: Option<&Path>, body: &str) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, body),
        None => std::io::stdout().lock().write_all(body.as_bytes()),
    }
}

fn failure_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".failure.json");
    PathBuf::from(name)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args, default_format) = match cli.command {
        Cmd::Canon(a) => (Command::Canon, a, Format::Json),
        Cmd::Series(a) => (Command::Series, a, Format::Csv),
        Cmd::Measures(a) => (Command::Measures, a, Format::Json),
    };
    let threads = match threads_from_env() {
        Ok(t) => t,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    let format = match args.format {
        Some(OutFormat::Csv) => Format::Csv,
        Some(OutFormat::Json) => Format::Json,
        None => default_format,
    };
    let opts = RunOptions {
        t0: args.t0,
        t1: args.t1,
        steps: args.steps,
        tol_neg: args.tol_neg,
        cond_max: args.cond_max,
        threads,
    };

    match pipeline::execute(command, format, &args.config, &opts) {
        Ok(body) => match write_output(args.output.as_deref(), &body) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: writing output: {e}");
                ExitCode::from(EXIT_NUMERICAL)
            }
        },
        Err(err) => report(&err, args.output.as_deref()),
    }
}

fn report(err: &Error, output: Option<&Path>) -> ExitCode {
    eprintln!("error: {err}");
    match err.class() {
        ErrorClass::Validation => ExitCode::from(EXIT_VALIDATION),
        ErrorClass::Numerical => {
            let body = pipeline::failure_report(err);
            let written = match output {
                Some(p) => std::fs::write(failure_path(p), &body),
                None => std::io::stderr().lock().write_all(body.as_bytes()),
            };
            if let Err(e) = written {
                eprintln!("error: writing failure report: {e}");
            }
            ExitCode::from(EXIT_NUMERICAL)
        }
    }
}
