//! Subcommand bodies. Each returns the bytes to write so callers decide
//! where output goes; nothing here touches stdout.

use cavity_readout::chain::{exact_spectrum, fast_spectrum, mixture_spectrum};
use cavity_readout::decay::{
    decay_trajectory, device_t1, quasi_static_spectrum, time_averaged_spectrum_with,
    timescale_warnings,
};
use cavity_readout::infer::{height_weights, peak_report_in};
use cavity_readout::lindblad::oracle_spectrum;
use cavity_readout::model::{validate_dispersive, RatioKind, DECAY_WARN_RATIO};
use cavity_readout::spectra::{closed_form, ClosedFormKind};
use cavity_readout::{AngularFrequency, DeviceParams, DiagonalState, FrequencyGrid, Spectrum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{index_to_ket, RunConfig};
use crate::csvio::{metadata_line, mhz6, sci, spectrum_table, Table, VERSION};
use crate::error::{CliError, CliResult};

/// Spectrum evaluation routes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Exact,
    Fast,
    MeanField,
    Closed1,
    Closed2,
    Mixture,
}

impl Method {
    pub const NAMES: [&'static str; 6] = [
        "exact",
        "fast",
        "meanfield",
        "closed1",
        "closed2",
        "mixture",
    ];

    pub fn parse(name: &str) -> CliResult<Self> {
        Ok(match name {
            "exact" => Self::Exact,
            "fast" => Self::Fast,
            "meanfield" => Self::MeanField,
            "closed1" => Self::Closed1,
            "closed2" => Self::Closed2,
            "mixture" => Self::Mixture,
            other => {
                return Err(CliError::config(format!(
                    "spectrum.method: unknown `{other}` ({})",
                    Self::NAMES.join(", ")
                )))
            }
        })
    }

    pub fn name(self) -> &'static str {
        Self::NAMES[self as usize]
    }

    pub fn evaluate(
        self,
        params: &DeviceParams,
        state: &DiagonalState,
        grid: &FrequencyGrid,
    ) -> CliResult<Spectrum> {
        Ok(match self {
            Self::Exact => exact_spectrum(params, state, grid)?,
            Self::Fast => fast_spectrum(params, state, grid)?,
            Self::MeanField => closed_form(ClosedFormKind::MeanField, params, state, grid)?,
            Self::Closed1 => closed_form(ClosedFormKind::OneQubit, params, state, grid)?,
            Self::Closed2 => closed_form(ClosedFormKind::TwoQubit, params, state, grid)?,
            Self::Mixture => mixture_spectrum(params, state, grid)?,
        })
    }
}

/// First 16 hex digits of the SHA-256 of the resolved inputs.
pub fn params_hash(parts: &[&dyn std::fmt::Debug]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(format!("{p:?}").as_bytes());
        h.update([0u8]);
    }
    format!("{:x}", h.finalize())[..16].to_string()
}

/// Text report and pass flag of the dispersive-regime check.
pub fn validate(cfg: &RunConfig) -> CliResult<(String, bool)> {
    let params = cfg.device()?;
    let report = validate_dispersive(&params, cfg.threshold()?)?;
    let mut out = format!("threshold {}\n", report.threshold);
    for c in &report.checks {
        let (label, unit) = match c.kind {
            RatioKind::CouplingOverDetuning { qubit } => (format!("g{qubit}/Delta{qubit}"), ""),
            RatioKind::QubitCrossTalk { i, j, via } => {
                (format!("g{i}g{j}/(Delta{via}Delta{i}{j})"), "")
            }
            RatioKind::DirectShift { qubit } => (format!("Gamma{qubit}"), " MHz (supplied)"),
        };
        let verdict = if c.passed { "ok" } else { "FAIL" };
        out.push_str(&format!("{label} = {:.6}{unit} {verdict}\n", c.value));
    }
    for w in &report.decay_warnings {
        out.push_str(&format!(
            "warning: qubit {} has (1/t1)/kappa = {:.3} > {DECAY_WARN_RATIO}\n",
            w.qubit, w.ratio
        ));
    }
    let passed = report.passed();
    out.push_str(if passed {
        "dispersive regime: pass\n"
    } else {
        "dispersive regime: fail\n"
    });
    Ok((out, passed))
}

pub fn spectrum(cfg: &RunConfig, method: Method) -> CliResult<Vec<u8>> {
    let params = cfg.device()?;
    let state = cfg.state(&params)?;
    let grid = cfg.grid(&params)?;
    let mut s = method.evaluate(&params, &state, &grid)?;
    let mut extra = Vec::new();
    let mut values = s.values().to_vec();
    if let Some(frac) = cfg.spectrum.noise_fraction {
        if !(frac >= 0.0 && frac.is_finite()) {
            return Err(CliError::config(format!(
                "spectrum.noise_fraction: {frac} must be >= 0"
            )));
        }
        let peak = values.iter().copied().fold(0.0, f64::max);
        let noise = Normal::new(0.0, frac * peak)
            .map_err(|e| CliError::config(format!("spectrum.noise_fraction: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for v in values.iter_mut() {
            *v += noise.sample(&mut rng);
        }
        extra.push(("noise_fraction", frac.to_string()));
        extra.push(("seed", cfg.seed.to_string()));
    }
    let hash = params_hash(&[
        &method.name(),
        &params,
        &state,
        &grid,
        &cfg.spectrum,
        &cfg.seed,
    ]);
    let meta = metadata_line(method.name(), &hash, &extra);
    if cfg.spectrum.noise_fraction.is_some() {
        // noisy samples may dip below zero, so bypass the spectrum type
        let mut t = Table::new(
            meta,
            &[crate::csvio::FREQ_COLUMN, crate::csvio::VALUE_COLUMN],
        );
        for (w, v) in grid.points().zip(&values) {
            t.row([mhz6(AngularFrequency::from_rad_per_us(w).mhz()), sci(*v)]);
        }
        return Ok(t.into_bytes());
    }
    s = Spectrum::new(grid, values)?;
    Ok(spectrum_table(&s, meta).into_bytes())
}

/// Oracle CSV and whether every point converged.
pub fn oracle(cfg: &RunConfig) -> CliResult<(Vec<u8>, bool)> {
    let params = cfg.device()?;
    let state = cfg.state(&params)?;
    let grid = cfg.grid(&params)?;
    let trunc = cfg.truncation(&params)?;
    let out = oracle_spectrum(&params, &state, &grid, &trunc)?;
    let hash = params_hash(&[&"oracle", &params, &state, &grid, &trunc]);
    let meta = metadata_line("oracle", &hash, &[("n_max", trunc.n_max.to_string())]);
    let mut t = Table::new(
        meta,
        &[
            "omega_L_MHz",
            "S_value",
            "converged",
            "tail_occupation",
            "steps",
        ],
    );
    for p in &out.points {
        t.row([
            mhz6(AngularFrequency::from_rad_per_us(p.omega_l).mhz()),
            sci(p.value),
            if p.converged { "1".into() } else { "0".into() },
            sci(p.tail_occupation),
            p.steps.to_string(),
        ]);
    }
    Ok((t.into_bytes(), out.all_converged()))
}

/// Warnings for qubits relaxing too fast for the quasi-static picture.
pub fn decay_warnings(params: &DeviceParams) -> Vec<String> {
    timescale_warnings(params, DECAY_WARN_RATIO)
        .into_iter()
        .map(|(q, r)| format!("warning: qubit {q} has (1/t1)/kappa = {r:.3}; quasi-static spectra are approximate"))
        .collect()
}

/// Populations-versus-time CSV and the quasi-static spectrum CSV.
pub fn decay(cfg: &RunConfig) -> CliResult<(Vec<u8>, Vec<u8>)> {
    let params = cfg.device()?;
    let state = cfg.state(&params)?;
    let grid = cfg.grid(&params)?;
    let times = cfg.decay_times()?;
    let tau = cfg.decay_spectrum_time()?;
    let t1 = device_t1(&params);
    let traj = decay_trajectory(&state, &t1, &times)?;

    let hash = params_hash(&[&"decay", &params, &state, &times]);
    let n = params.n_qubits();
    let mut columns = vec!["tau_us".to_string()];
    columns.extend((0..params.dim()).map(|k| format!("p_{}", index_to_ket(k, n))));
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut pops = Table::new(metadata_line("decay", &hash, &[]), &cols);
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let mut row = vec![mhz6(*t)];
        row.extend(s.probs().iter().map(|p| sci(*p)));
        pops.row(row);
    }

    let spec = quasi_static_spectrum(&params, &state, tau, &grid)?;
    let hash = params_hash(&[&"quasi-static", &params, &state, &grid, &tau]);
    let meta = metadata_line("quasi-static", &hash, &[("tau_us", tau.to_string())]);
    Ok((pops.into_bytes(), spectrum_table(&spec, meta).into_bytes()))
}

pub fn average(cfg: &RunConfig) -> CliResult<Vec<u8>> {
    let params = cfg.device()?;
    let state = cfg.state(&params)?;
    let grid = cfg.grid(&params)?;
    let (tau, steps, method) = cfg.averaging()?;
    let s = time_averaged_spectrum_with(&params, &state, tau, steps, &grid, method)?;
    let hash = params_hash(&[&"average", &params, &state, &grid, &tau, &steps, &method]);
    let meta = metadata_line(
        "average",
        &hash,
        &[
            ("tau_max_us", tau.to_string()),
            ("steps", steps.to_string()),
        ],
    );
    Ok(spectrum_table(&s, meta).into_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakJson {
    pub location_mhz: f64,
    pub height: f64,
    pub assigned_basis_index: Option<usize>,
    pub assigned_ket: Option<String>,
}

/// JSON report of `infer`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InferReport {
    pub version: String,
    pub params_hash: String,
    pub n_qubits: usize,
    /// Centre groups in basis indices, aligned with `weights`.
    pub groups: Vec<Vec<usize>>,
    pub weights: Vec<f64>,
    /// Per-basis probabilities, `null` when a degenerate group hides the split.
    pub basis_probs: Option<Vec<f64>>,
    pub residual_norm: f64,
    pub unresolvable: bool,
    pub degenerate_groups: Vec<Vec<usize>>,
    pub peaks: Vec<PeakJson>,
    /// Diagnostic weights read from peak heights.
    pub height_weights: Vec<f64>,
}

pub fn infer(cfg: &RunConfig, grid: &FrequencyGrid, values: &[f64]) -> CliResult<InferReport> {
    let params = cfg.device()?;
    let report = peak_report_in(grid, values, &params, cfg.prominence()?)?;
    let n = params.n_qubits();
    let w = &report.weights;
    Ok(InferReport {
        version: VERSION.to_string(),
        params_hash: params_hash(&[&"infer", &params]),
        n_qubits: n,
        groups: w.groups.clone(),
        weights: w.probs.clone(),
        basis_probs: w.basis_probs(),
        residual_norm: w.residual_norm,
        unresolvable: w.unresolvable,
        degenerate_groups: report.degenerate_groups.clone(),
        peaks: report
            .peaks
            .iter()
            .map(|p| PeakJson {
                location_mhz: p.location.mhz(),
                height: p.height,
                assigned_basis_index: p.assigned_basis_index,
                assigned_ket: p.assigned_basis_index.map(|k| index_to_ket(k, n)),
            })
            .collect(),
        height_weights: height_weights(&report, params.dim()),
    })
}

/// SVG of the second column against the first.
pub fn plot(table: &crate::csvio::RawTable, path: &std::path::Path) -> CliResult<String> {
    if table.header.len() < 2 {
        return Err(CliError::Input {
            path: path.to_path_buf(),
            message: "need at least two columns".into(),
        });
    }
    let x = table.numbers(0, path)?;
    let y = table.numbers(1, path)?;
    let title = table.comments.first().cloned().unwrap_or_default();
    Ok(crate::plot::render(
        &x,
        &y,
        &table.header[0],
        &table.header[1],
        &title,
    ))
}
