//! Command-line drivers for the tag-encoded QKD simulator.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use tagqkd::experiment::{
    bell_decompose_report, default_basis_grid, measure_circuit_stats, parse_session_config,
    postselect_stats, qkd_run, unitary_from_angles, unitary_from_entries, ExperimentError,
};

#[derive(Parser)]
#[command(name = "tagqkd", about = "Two-photon tag-encoded QKD simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    /// Single JSON summary document.
    Summary,
    /// Line-delimited JSON: per-trial records, then the summary line.
    Records,
}

#[derive(Subcommand)]
enum Command {
    /// Bell-sector weights delta1, delta2, delta3 of a channel unitary and
    /// the post-selection acceptance probability.
    BellDecompose {
        /// 8 comma-separated numbers: the 4 complex entries, re/im interleaved, row-major.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "angles")]
        entries: Option<Vec<f64>>,
        /// 3 comma-separated angles xi,phi1,phi2 with U00 = cos(xi) e^{i phi1}, U01 = sin(xi) e^{i phi2}.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        angles: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Summary)]
        format: Format,
    },
    /// Monte Carlo of the post-selection acceptance over Haar-random
    /// channel unitaries, checked against the closed form per trial.
    PostselectStats {
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Summary)]
        format: Format,
    },
    /// Full QKD session from a key-value config file.
    QkdRun {
        /// Flat key = value config; keys match the session fields.
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed from the config file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Summary)]
        format: Format,
    },
    /// Success rates of the beamsplitter measurement circuit over a basis grid.
    MeasureCircuitStats {
        #[arg(long, default_value_t = 20_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Summary)]
        format: Format,
    },
}

fn emit(out: Option<&PathBuf>, payload: String) -> Result<(), String> {
    match out {
        Some(path) => fs::write(path, payload).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            let stdout = std::io::stdout();
            let mut handle = stdout.lock();
            handle
                .write_all(payload.as_bytes())
                .map_err(|e| format!("cannot write to stdout: {e}"))
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T, pretty: bool) -> String {
    if pretty {
        serde_json::to_string_pretty(value).expect("reports serialize")
    } else {
        serde_json::to_string(value).expect("reports serialize")
    }
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::BellDecompose {
            entries,
            angles,
            out,
            format,
        } => {
            let unitary = match (entries, angles) {
                (Some(values), None) => unitary_from_entries(&values),
                (None, Some(values)) => unitary_from_angles(&values),
                _ => Err(ExperimentError::UnitarySpec(
                    "supply exactly one of --entries or --angles".into(),
                )),
            }
            .map_err(|e| e.to_string())?;
            let report = bell_decompose_report(&unitary).map_err(|e| e.to_string())?;
            let payload = match format {
                Format::Summary => to_json(&report, true) + "\n",
                Format::Records => to_json(&report, false) + "\n",
            };
            emit(out.as_ref(), payload)
        }
        Command::PostselectStats {
            trials,
            seed,
            out,
            format,
        } => {
            if trials < 1 {
                return Err("--trials must be at least 1".into());
            }
            let (report, records) = postselect_stats(trials, seed).map_err(|e| e.to_string())?;
            let payload = match format {
                Format::Summary => to_json(&report, true) + "\n",
                Format::Records => {
                    let mut lines: Vec<String> =
                        records.iter().map(|r| to_json(r, false)).collect();
                    lines.push(to_json(&report, false));
                    lines.join("\n") + "\n"
                }
            };
            emit(out.as_ref(), payload)
        }
        Command::QkdRun {
            config,
            seed,
            out,
            format,
        } => {
            let text = fs::read_to_string(&config)
                .map_err(|e| format!("cannot read {}: {e}", config.display()))?;
            let mut session = parse_session_config(&text).map_err(|e| e.to_string())?;
            if let Some(seed) = seed {
                session.seed = seed;
            }
            let report = qkd_run(&session).map_err(|e| e.to_string())?;
            let payload = match format {
                Format::Summary => to_json(&report, true) + "\n",
                Format::Records => to_json(&report, false) + "\n",
            };
            emit(out.as_ref(), payload)
        }
        Command::MeasureCircuitStats {
            trials,
            seed,
            out,
            format,
        } => {
            if trials < 1 {
                return Err("--trials must be at least 1".into());
            }
            let (report, records) =
                measure_circuit_stats(trials, seed, &default_basis_grid()).map_err(|e| e.to_string())?;
            let payload = match format {
                Format::Summary => to_json(&report, true) + "\n",
                Format::Records => {
                    let mut lines: Vec<String> =
                        records.iter().map(|r| to_json(r, false)).collect();
                    lines.push(to_json(&report, false));
                    lines.join("\n") + "\n"
                }
            };
            emit(out.as_ref(), payload)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
