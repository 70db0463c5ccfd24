use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use seqmeas_cli::{run, RunOptions};

/// Run a sequential-measurement experiment from a TOML config.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Args {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV traces and summary.json.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override a config value, e.g. `--set ladder.d=8`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads. Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Run cross-checks: couplings against quadrature, closed-form evolution against
    /// direct iteration.
    #[arg(long)]
    verify: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let opts = RunOptions {
        config: args.config,
        out: args.out,
        overrides: args.overrides,
        threads: args.threads,
        verify: args.verify,
    };
    match run(&opts) {
        Ok(summary) => {
            for c in &summary.checks {
                println!(
                    "{} {}: {:e} (threshold {:e})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.threshold
                );
            }
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            if summary.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
