//! JSON run configuration. Frequencies are linear MHz and times are us; both
//! are converted to the core's rad/us and us at this boundary.

use std::path::{Path, PathBuf};

use cavity_readout::decay::Averaging;
use cavity_readout::lindblad::TruncationConfig;
use cavity_readout::model::derive_dispersive_shifts;
use cavity_readout::{
    presets, AngularFrequency, DeviceParams, DiagonalState, FrequencyGrid, QubitParams,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DEFAULT_POINTS: usize = 2001;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Embedded parameter set, used instead of `device`.
    pub preset: Option<String>,
    pub device: Option<DeviceBlock>,
    pub state: Option<StateBlock>,
    #[serde(default)]
    pub grid: GridBlock,
    #[serde(default)]
    pub spectrum: SpectrumBlock,
    #[serde(default)]
    pub oracle: OracleBlock,
    #[serde(default)]
    pub decay: DecayBlock,
    #[serde(default)]
    pub average: AverageBlock,
    #[serde(default)]
    pub infer: InferBlock,
    #[serde(default)]
    pub validate: ValidateBlock,
    #[serde(default)]
    pub output: OutputBlock,
    /// Seeds the optional synthetic noise of `spectrum`.
    #[serde(default)]
    pub seed: u64,
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceBlock {
    pub cavity_freq_MHz: f64,
    pub kappa_MHz: f64,
    /// Drive amplitude; defaults to kappa/20.
    pub drive_MHz: Option<f64>,
    #[serde(default)]
    pub qubits: Vec<QubitBlock>,
}

/// Either `omega_MHz` and `g_MHz`, or `gamma_shift_MHz`.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitBlock {
    pub omega_MHz: Option<f64>,
    pub g_MHz: Option<f64>,
    pub gamma_shift_MHz: Option<f64>,
    pub t1_us: Option<f64>,
}

/// Exactly one of `probs`, `basis` or `ket`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateBlock {
    pub n_qubits: usize,
    pub probs: Option<Vec<f64>>,
    /// Basis index `k`; qubit `j` is bit `j - 1`.
    pub basis: Option<usize>,
    /// Ket label `alpha_1 alpha_2 ... alpha_N`, e.g. `"10"`.
    pub ket: Option<String>,
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub center_MHz: Option<f64>,
    pub half_span_MHz: Option<f64>,
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumBlock {
    pub method: Option<String>,
    /// Standard deviation of added Gaussian noise, as a fraction of the peak.
    pub noise_fraction: Option<f64>,
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleBlock {
    pub n_max: Option<usize>,
    pub drive_MHz: Option<f64>,
    pub time_step_us: Option<f64>,
    pub tolerance: Option<f64>,
    pub max_time_us: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayBlock {
    pub times_us: Option<Vec<f64>>,
    pub spectrum_time_us: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AverageBlock {
    pub tau_max_us: Option<f64>,
    pub steps: Option<usize>,
    /// `analytic` (default) or `trapezoid`.
    pub method: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferBlock {
    pub prominence: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateBlock {
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub path: Option<PathBuf>,
    pub populations_path: Option<PathBuf>,
    pub spectrum_path: Option<PathBuf>,
    pub report_path: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| CliError::Input {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Device parameters with dispersive shifts derived.
    pub fn device(&self) -> CliResult<DeviceParams> {
        let raw = match (&self.preset, &self.device) {
            (Some(_), Some(_)) => {
                return Err(CliError::config(
                    "config: give either `preset` or `device`, not both",
                ))
            }
            (Some(name), None) => presets::by_name(name).ok_or_else(|| {
                CliError::config(format!(
                    "preset: unknown preset `{name}` (known: {})",
                    presets::NAMES.join(", ")
                ))
            })?,
            (None, Some(d)) => d.build()?,
            (None, None) => return Err(CliError::config("config: missing `device` or `preset`")),
        };
        Ok(derive_dispersive_shifts(&raw)?)
    }

    pub fn state(&self, params: &DeviceParams) -> CliResult<DiagonalState> {
        let block = self
            .state
            .as_ref()
            .ok_or_else(|| CliError::config("config: missing `state`"))?;
        let state = block.build()?;
        if state.n_qubits() != params.n_qubits() {
            return Err(CliError::config(format!(
                "state.n_qubits: {} but the device has {} qubits",
                state.n_qubits(),
                params.n_qubits()
            )));
        }
        Ok(state)
    }

    /// Grid centred on `center_MHz` (default the cavity) with half-span
    /// `half_span_MHz` (default `sum Gamma + 10 kappa`).
    pub fn grid(&self, params: &DeviceParams) -> CliResult<FrequencyGrid> {
        let points = self.grid.points.unwrap_or(DEFAULT_POINTS);
        if points < 2 {
            return Err(CliError::config("grid.points: need at least 2"));
        }
        let default = FrequencyGrid::covering_all_peaks(params, points)?;
        let center = match self.grid.center_MHz {
            Some(c) => AngularFrequency::from_mhz(finite("grid.center_MHz", c)?),
            None => params.cavity_freq(),
        };
        let half_span = match self.grid.half_span_MHz {
            Some(h) if h > 0.0 && h.is_finite() => AngularFrequency::from_mhz(h),
            Some(h) => {
                return Err(CliError::config(format!(
                    "grid.half_span_MHz: {h} must be positive"
                )))
            }
            None => AngularFrequency::from_rad_per_us(
                0.5 * (default.stop().value() - default.start().value()),
            ),
        };
        Ok(FrequencyGrid::centered(center, half_span, points)?)
    }

    pub fn truncation(&self, params: &DeviceParams) -> CliResult<TruncationConfig> {
        let mut t = TruncationConfig::for_device(params);
        let o = &self.oracle;
        if let Some(n) = o.n_max {
            t.n_max = n;
        }
        if let Some(d) = o.drive_MHz {
            t.drive = Some(AngularFrequency::from_mhz(finite("oracle.drive_MHz", d)?).value());
        }
        if let Some(h) = o.time_step_us {
            positive("oracle.time_step_us", h)?;
            t.time_step = Some(h);
        }
        if let Some(tol) = o.tolerance {
            t.convergence_tol = positive("oracle.tolerance", tol)?;
        }
        if let Some(m) = o.max_time_us {
            t.max_time = positive("oracle.max_time_us", m)?;
        }
        Ok(t)
    }

    pub fn decay_times(&self) -> CliResult<Vec<f64>> {
        let times = match &self.decay.times_us {
            Some(t) => t.clone(),
            None => (0..=40).map(|i| i as f64 * 0.05).collect(),
        };
        for t in &times {
            if !(*t >= 0.0 && t.is_finite()) {
                return Err(CliError::config(format!(
                    "decay.times_us: {t} must be >= 0"
                )));
            }
        }
        Ok(times)
    }

    pub fn decay_spectrum_time(&self) -> CliResult<f64> {
        let t = self.decay.spectrum_time_us.unwrap_or(0.5);
        if !(t >= 0.0 && t.is_finite()) {
            return Err(CliError::config(format!(
                "decay.spectrum_time_us: {t} must be >= 0"
            )));
        }
        Ok(t)
    }

    pub fn averaging(&self) -> CliResult<(f64, usize, Averaging)> {
        let tau = self.average.tau_max_us.unwrap_or(0.5);
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(CliError::config(format!(
                "average.tau_max_us: {tau} must be >= 0"
            )));
        }
        let steps = self.average.steps.unwrap_or(64);
        if steps < 2 {
            return Err(CliError::config("average.steps: need at least 2"));
        }
        let method = match self.average.method.as_deref().unwrap_or("analytic") {
            "analytic" => Averaging::Analytic,
            "trapezoid" => Averaging::Trapezoid,
            other => {
                return Err(CliError::config(format!(
                    "average.method: unknown `{other}` (analytic, trapezoid)"
                )))
            }
        };
        Ok((tau, steps, method))
    }

    pub fn prominence(&self) -> CliResult<f64> {
        let p = self
            .infer
            .prominence
            .unwrap_or(cavity_readout::infer::DEFAULT_PROMINENCE);
        if !(p > 0.0 && p < 1.0) {
            return Err(CliError::config(format!(
                "infer.prominence: {p} must lie in (0, 1)"
            )));
        }
        Ok(p)
    }

    pub fn threshold(&self) -> CliResult<f64> {
        let t = self.validate.threshold.unwrap_or(0.1);
        if !(t > 0.0 && t < 1.0) {
            return Err(CliError::config(format!(
                "validate.threshold: {t} must lie in (0, 1)"
            )));
        }
        Ok(t)
    }
}

fn finite(field: &str, v: f64) -> CliResult<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::config(format!("{field}: {v} is not finite")))
    }
}

fn positive(field: &str, v: f64) -> CliResult<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::config(format!("{field}: {v} must be positive")))
    }
}

impl DeviceBlock {
    fn build(&self) -> CliResult<DeviceParams> {
        let wf = finite("device.cavity_freq_MHz", self.cavity_freq_MHz)?;
        let kappa = positive("device.kappa_MHz", self.kappa_MHz)?;
        let qubits = self
            .qubits
            .iter()
            .enumerate()
            .map(|(i, q)| q.build(i))
            .collect::<CliResult<Vec<_>>>()?;
        let mut params = DeviceParams::new(
            AngularFrequency::from_mhz(wf),
            AngularFrequency::from_mhz(kappa),
            qubits,
        )?;
        if let Some(d) = self.drive_MHz {
            params =
                params.with_drive(AngularFrequency::from_mhz(finite("device.drive_MHz", d)?))?;
        }
        Ok(params)
    }
}

impl QubitBlock {
    fn build(&self, index: usize) -> CliResult<QubitParams> {
        let field = |name: &str| format!("device.qubits[{index}].{name}");
        let mut q = QubitParams::default();
        match (self.omega_MHz, self.g_MHz) {
            (Some(w), Some(g)) => {
                q.transition_freq =
                    Some(AngularFrequency::from_mhz(finite(&field("omega_MHz"), w)?));
                q.coupling = Some(AngularFrequency::from_mhz(finite(&field("g_MHz"), g)?));
            }
            (None, None) => {}
            _ => {
                return Err(CliError::config(format!(
                    "{}: `omega_MHz` and `g_MHz` must be given together",
                    field("")
                )))
            }
        }
        if let Some(s) = self.gamma_shift_MHz {
            q.dispersive_shift = Some(AngularFrequency::from_mhz(finite(
                &field("gamma_shift_MHz"),
                s,
            )?));
        }
        if let Some(t1) = self.t1_us {
            if !(t1 > 0.0) {
                return Err(CliError::config(format!(
                    "{}: {t1} must be positive",
                    field("t1_us")
                )));
            }
            q.t1 = Some(t1);
        }
        Ok(q)
    }
}

impl StateBlock {
    pub fn build(&self) -> CliResult<DiagonalState> {
        let n = self.n_qubits;
        match (&self.probs, self.basis, &self.ket) {
            (Some(p), None, None) => DiagonalState::new(n, p.clone())
                .map_err(|e| CliError::config(format!("state.probs: {e}"))),
            (None, Some(k), None) => DiagonalState::basis(n, k)
                .map_err(|e| CliError::config(format!("state.basis: {e}"))),
            (None, None, Some(label)) => {
                let k = ket_to_index(label, n).ok_or_else(|| {
                    CliError::config(format!("state.ket: `{label}` is not {n} binary digits"))
                })?;
                Ok(DiagonalState::basis(n, k)?)
            }
            _ => Err(CliError::config(
                "state: give exactly one of `probs`, `basis`, `ket`",
            )),
        }
    }
}

/// Basis index of the ket `alpha_1 ... alpha_N`; `alpha_j` is bit `j - 1`.
pub fn ket_to_index(label: &str, n_qubits: usize) -> Option<usize> {
    if label.len() != n_qubits {
        return None;
    }
    label
        .chars()
        .enumerate()
        .try_fold(0usize, |k, (j, c)| match c {
            '0' => Some(k),
            '1' => Some(k | 1 << j),
            _ => None,
        })
}

/// Inverse of [`ket_to_index`].
pub fn index_to_ket(k: usize, n_qubits: usize) -> String {
    (0..n_qubits)
        .map(|j| if k >> j & 1 == 1 { '1' } else { '0' })
        .collect()
}
