use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use relfuse::io::commands::{cmd_eb_fit, cmd_eb_predict, cmd_er_assess, cmd_validate};
use relfuse::io::report::Report;
use relfuse::io::{Tolerances, ValidateKind};
use relfuse::{Error, FinalizeMode};

/// Exit status when `rel validate` finds a metric outside its tolerance.
const EXIT_OUT_OF_TOLERANCE: u8 = 5;

#[derive(Parser)]
#[command(
    name = "rel",
    version,
    about = "Reliability assessment from expert-elicited data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Belief aggregation over an attribute tree.
    Er {
        #[command(subcommand)]
        command: ErCommand,
    },
    /// Empirical Bayes fitting and prediction.
    Eb {
        #[command(subcommand)]
        command: EbCommand,
    },
    /// Compare the engines against their reference oracles.
    Validate {
        file: PathBuf,
        #[arg(long, value_enum)]
        kind: ValidateKind,
        /// JSON file overriding the pass tolerances.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ErCommand {
    /// Aggregate an assessment file.
    Assess {
        file: PathBuf,
        #[arg(long, default_value_t = FinalizeMode::Raw)]
        mode: FinalizeMode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum EbCommand {
    /// Fit prior hyperparameters to an observation file.
    Fit {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Posterior and predictive reliability of one unit from a fit report.
    Predict {
        fit: PathBuf,
        #[arg(long)]
        unit: String,
        #[arg(long)]
        mission_time: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn colored(text: &str, code: &str) -> String {
    let plain = std::env::var_os("NO_COLOR").is_some_and(|v| !v.is_empty())
        || !std::io::stdout().is_terminal();
    if plain {
        text.to_string()
    } else {
        format!("\x1b[{code}m{text}\x1b[0m")
    }
}

fn emit<S: Serialize, I: Serialize, R: Serialize>(
    report: &Report<S, I, R>,
    out: Option<&Path>,
    summary: impl FnOnce() -> String,
) -> Result<(), Error> {
    let json = report.to_json();
    match out {
        Some(path) => {
            std::fs::write(path, json)
                .map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))?;
            println!("{}", summary());
        }
        None => {
            std::io::stdout()
                .write_all(json.as_bytes())
                .map_err(|e| Error::Io(e.to_string()))?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Er {
            command: ErCommand::Assess { file, mode, out },
        } => {
            let report = cmd_er_assess(&file, mode)?;
            emit(&report, out.as_deref(), || {
                let r = &report.result;
                format!(
                    "{}: beliefs {:?}, unassigned {}",
                    r.root, r.beliefs, r.unassigned
                )
            })?;
            Ok(0)
        }
        Command::Eb {
            command: EbCommand::Fit { file, out },
        } => {
            let report = cmd_eb_fit(&file)?;
            emit(&report, out.as_deref(), || {
                let f = &report.result.fit;
                let [p, q] = f.family.param_names();
                format!(
                    "{}: {p} = {}, {q} = {}, converged = {}, at_bound = {}",
                    f.family, f.estimate.a, f.estimate.b, f.converged, f.at_bound
                )
            })?;
            Ok(0)
        }
        Command::Eb {
            command:
                EbCommand::Predict {
                    fit,
                    unit,
                    mission_time,
                    out,
                },
        } => {
            let report = cmd_eb_predict(&fit, &unit, mission_time)?;
            emit(&report, out.as_deref(), || {
                format!(
                    "{unit}: posterior reliability {}",
                    report.result.posterior_reliability
                )
            })?;
            Ok(0)
        }
        Command::Validate {
            file,
            kind,
            config,
            out,
        } => {
            let tolerances = match config {
                Some(path) => Tolerances::from_file(&path)?,
                None => Tolerances::default(),
            };
            let report = cmd_validate(&file, kind, tolerances)?;
            emit(&report, out.as_deref(), || {
                report
                    .result
                    .checks
                    .iter()
                    .map(|c| {
                        let status = match (c.tolerance, c.passed) {
                            (None, _) => colored("INFO", "36"),
                            (Some(_), true) => colored("PASS", "32"),
                            (Some(_), false) => colored("FAIL", "31"),
                        };
                        match c.tolerance {
                            Some(t) => {
                                format!("{status} {} = {:e} (tolerance {:e})", c.name, c.value, t)
                            }
                            None => format!("{status} {} = {:e}", c.name, c.value),
                        }
                    })
                    .collect::<Vec<_>>()
                    .join("\n")
            })?;
            Ok(if report.result.passed {
                0
            } else {
                EXIT_OUT_OF_TOLERANCE
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("rel: error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
