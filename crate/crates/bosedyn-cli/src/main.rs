use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bosedyn_cli::{acceptance, config, engines};

#[derive(Parser)]
#[command(
    name = "bosedyn",
    version,
    about = "Reduced dynamics of interacting bosons at fixed particle number: exact, BBGKY-consistency, mean-field, GPE and dissipative engines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write per-engine CSVs plus a JSON manifest.
    Run { config: PathBuf },
    /// Dry-run checks of a scenario: dimensions, Hermiticity,
    /// normalization. Writes nothing.
    Validate { config: PathBuf },
    /// Execute the full structural self-check suite and print one
    /// pass/fail line per criterion.
    Selftest,
}

fn fail(err: &engines::RunError) -> ExitCode {
    eprintln!("bosedyn: error[{}] {}", err.kind(), err.message());
    ExitCode::from(err.exit_code())
}

fn main() -> ExitCode {
    // die quietly when stdout is closed mid-stream (e.g. piped into head)
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config: path } => {
            let cfg = match config::load_config(&path) {
                Ok(c) => c,
                Err(e) => return fail(&engines::RunError::Config(e.0)),
            };
            match engines::run_scenario(&cfg) {
                Ok(summary) => {
                    for (name, file) in &summary.outputs {
                        println!("{name}: {file}");
                    }
                    println!("manifest: {}", summary.manifest_path.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Validate { config: path } => {
            let cfg = match config::load_config(&path) {
                Ok(c) => c,
                Err(e) => return fail(&engines::RunError::Config(e.0)),
            };
            match engines::validate_scenario(&cfg) {
                Ok(report) => {
                    for line in report {
                        println!("{line}");
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Selftest => {
            let results = acceptance::run_all();
            let mut all_ok = true;
            for r in &results {
                println!("{}", r.summary_line());
                for d in &r.details {
                    println!("    {d}");
                }
                all_ok &= r.passed;
            }
            if all_ok {
                println!("selftest: all {} criteria passed", results.len());
                ExitCode::SUCCESS
            } else {
                println!("selftest: FAILURES present");
                ExitCode::FAILURE
            }
        }
    }
}
