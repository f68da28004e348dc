use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gradedcalc::{check_source, run_source, Options, Outcome};

#[derive(Parser)]
#[command(name = "gradedcalc", version, about = "Exact calculator for graded domains")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute a script: declarations first, then each command in order.
    Run {
        /// Script file to execute.
        script: PathBuf,
        /// Emit one JSON report instead of text.
        #[arg(long)]
        json: bool,
        /// Default truncation weight for domains that do not set their own.
        #[arg(long)]
        trunc: Option<u32>,
    },
    /// Parse a script and type-check its declarations without running it.
    Check {
        /// Script file to check.
        script: PathBuf,
        /// Emit one JSON report instead of text.
        #[arg(long)]
        json: bool,
    },
}

fn env_trunc() -> Result<Option<u32>, String> {
    match std::env::var("GRADEDCALC_TRUNC") {
        Ok(s) => s
            .trim()
            .parse::<u32>()
            .map(Some)
            .map_err(|_| format!("GRADEDCALC_TRUNC must be a nonnegative integer, got `{s}`")),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(std::env::VarError::NotUnicode(_)) => {
            Err("GRADEDCALC_TRUNC is not valid unicode".to_string())
        }
    }
}

fn finish(script: &PathBuf, outcome: Outcome) -> ExitCode {
    print!("{}", outcome.stdout);
    if outcome.ok {
        return ExitCode::SUCCESS;
    }
    // Command failures are already part of the text transcript; a parse or
    // declaration failure leaves stdout empty and goes to stderr instead.
    if outcome.stdout.is_empty() {
        for d in &outcome.diagnostics {
            eprintln!("{}:{d}", script.display());
        }
    }
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Cmd::Run { script, json, trunc } => {
            let env_trunc = match env_trunc() {
                Ok(v) => v,
                Err(msg) => {
                    eprintln!("error: {msg}");
                    return ExitCode::from(2);
                }
            };
            let src = match fs::read_to_string(&script) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", script.display());
                    return ExitCode::from(2);
                }
            };
            let opts = Options { json, trunc, env_trunc };
            finish(&script, run_source(&src, &opts))
        }
        Cmd::Check { script, json } => {
            let src = match fs::read_to_string(&script) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", script.display());
                    return ExitCode::from(2);
                }
            };
            let opts = Options { json, ..Options::default() };
            finish(&script, check_source(&src, &opts))
        }
    }
}
