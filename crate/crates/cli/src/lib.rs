//! Batch front-end: parses a command and its TOML configuration, runs the
//! matching core routine and writes CSV and JSON reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use config::{Cli, Command, ExperimentConfig, ResolvedConfig};
use error::{CliError, CliResult, EXIT_OK, EXIT_VIOLATION};

/// Outcome of one invocation.
#[derive(Debug)]
pub struct Outcome {
    pub written: Vec<PathBuf>,
    pub violations: Vec<String>,
}

fn load(cli: &Cli) -> CliResult<ResolvedConfig> {
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.display().to_string(),
                source,
            })?;
            ExperimentConfig::from_toml(&text)?
        }
        None => ExperimentConfig::default(),
    };
    let mut resolved = ResolvedConfig::resolve(cli, file)?;
    if resolved.command == Command::Check && resolved.field.cutoffs.as_ref().is_none_or(Vec::is_empty) {
        let rule = resolved.rule()?;
        resolved.field.cutoffs = Some(resolved.ladder(&rule));
    }
    Ok(resolved)
}

/// Run a parsed command line inside a pool of the requested size.
pub fn execute(cli: &Cli) -> CliResult<Outcome> {
    let config = load(cli)?;
    let work = || -> CliResult<Outcome> {
        let report = commands::run_command(&config)?;
        let written = output::write_report(&cli.out, &config, &report)?;
        Ok(Outcome {
            written,
            violations: report.violations,
        })
    };
    match cli.workers {
        Some(0) => Err(CliError::Config("--workers must be at least 1".into())),
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Config(e.to_string()))?
            .install(work),
        None => work(),
    }
}

/// Run and map the outcome to a process exit code, reporting on stderr.
pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(outcome) => {
            eprintln!(
                "{}: wrote {} files to {}",
                cli.command.token(),
                outcome.written.len(),
                cli.out.display()
            );
            if outcome.violations.is_empty() {
                EXIT_OK
            } else {
                for v in &outcome.violations {
                    eprintln!("violation: {v}");
                }
                EXIT_VIOLATION
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
