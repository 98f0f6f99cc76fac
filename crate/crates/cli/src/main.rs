use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cavity_readout_cli::commands::{self, Method};
use cavity_readout_cli::config::StateBlock;
use cavity_readout_cli::csvio::{emit, read_spectrum, read_table};
use cavity_readout_cli::{exit, CliError, CliResult, RunConfig};
use clap::{Args, Parser, Subcommand};

/// Steady-state transmission spectra of a cavity dispersively coupled to qubits.
///
/// Exit codes: 0 success, 1 IO failure, 2 configuration or validation error,
/// 3 numerical non-convergence.
#[derive(Parser)]
#[command(name = "cavity-readout", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Embedded device parameters (n1-2010, n2-2010) instead of the config's device block.
    #[arg(long)]
    params_preset: Option<String>,
    /// Probabilities of the basis states, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "ket")]
    probs: Option<Vec<f64>>,
    /// Basis state as a ket label alpha_1..alpha_N, e.g. 10.
    #[arg(long)]
    ket: Option<String>,
    /// Number of grid points.
    #[arg(long)]
    points: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the dispersive-regime ratios.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Write a spectrum CSV.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// exact, fast, meanfield, closed1, closed2 or mixture.
        #[arg(short, long)]
        method: Option<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write a master-equation spectrum CSV with convergence columns.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write decayed populations and the quasi-static spectrum.
    Decay {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        populations: Option<PathBuf>,
        #[arg(long)]
        spectrum: Option<PathBuf>,
    },
    /// Write the spectrum averaged over the decay.
    Average {
        #[command(flatten)]
        common: Common,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Fit basis-state probabilities to a spectrum CSV and write a JSON report.
    Infer {
        #[command(flatten)]
        common: Common,
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Render a CSV as an SVG line plot.
    Plot {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn load(common: &Common) -> CliResult<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(name) = &common.params_preset {
        cfg.preset = Some(name.clone());
        cfg.device = None;
    }
    if common.probs.is_some() || common.ket.is_some() {
        let n = cfg.device()?.n_qubits();
        cfg.state = Some(StateBlock {
            n_qubits: n,
            probs: common.probs.clone(),
            ket: common.ket.clone(),
            basis: None,
        });
    }
    if let Some(points) = common.points {
        cfg.grid.points = Some(points);
    }
    Ok(cfg)
}

fn output_or<'a>(flag: &'a Option<PathBuf>, config: &'a Option<PathBuf>) -> Option<&'a Path> {
    flag.as_deref().or(config.as_deref())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Validate { common } => {
            let cfg = load(&common)?;
            let (text, passed) = commands::validate(&cfg)?;
            print!("{text}");
            if !passed {
                return Err(CliError::config("dispersive regime check failed"));
            }
        }
        Command::Spectrum {
            common,
            method,
            output,
        } => {
            let cfg = load(&common)?;
            let name = method
                .or_else(|| cfg.spectrum.method.clone())
                .unwrap_or_else(|| "exact".into());
            let bytes = commands::spectrum(&cfg, Method::parse(&name)?)?;
            emit(&bytes, output_or(&output, &cfg.output.path))?;
        }
        Command::Oracle { common, output } => {
            let cfg = load(&common)?;
            let (bytes, converged) = commands::oracle(&cfg)?;
            emit(&bytes, output_or(&output, &cfg.output.path))?;
            if !converged {
                return Err(CliError::NotConverged(
                    "some grid points did not reach a steady state (see the converged column)"
                        .into(),
                ));
            }
        }
        Command::Decay {
            common,
            populations,
            spectrum,
        } => {
            let cfg = load(&common)?;
            let pops_path = output_or(&populations, &cfg.output.populations_path);
            let spec_path = output_or(&spectrum, &cfg.output.spectrum_path).ok_or_else(|| {
                CliError::config("decay: give --spectrum or output.spectrum_path")
            })?;
            for w in commands::decay_warnings(&cfg.device()?) {
                eprintln!("{w}");
            }
            let (pops, spec) = commands::decay(&cfg)?;
            emit(&spec, Some(spec_path))?;
            emit(&pops, pops_path)?;
        }
        Command::Average { common, output } => {
            let cfg = load(&common)?;
            for w in commands::decay_warnings(&cfg.device()?) {
                eprintln!("{w}");
            }
            let bytes = commands::average(&cfg)?;
            emit(&bytes, output_or(&output, &cfg.output.path))?;
        }
        Command::Infer {
            common,
            input,
            output,
        } => {
            let cfg = load(&common)?;
            let (grid, values) = read_spectrum(&input)?;
            let report = commands::infer(&cfg, &grid, &values)?;
            let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
            json.push('\n');
            emit(json.as_bytes(), output_or(&output, &cfg.output.report_path))?;
        }
        Command::Plot { input, output } => {
            let table = read_table(&input)?;
            let svg = commands::plot(&table, &input)?;
            emit(svg.as_bytes(), Some(&output))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(exit::SUCCESS as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
