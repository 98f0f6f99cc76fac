//! Device parameters, diagonal qubit states, frequency grids and spectra.
//!
//! Every frequency and rate is an angular frequency in rad/us, so a value
//! quoted as "2pi x 1.69 MHz" is stored as `AngularFrequency::from_mhz(1.69)`.
//! Times are in microseconds.
//!
//! Basis index `k` of an N-qubit register encodes qubit `j` (1-based) in bit
//! `j - 1`, and `sigma_z` takes the value +1 on `|1>` and -1 on `|0>`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use crate::error::{invalid, Error, Result};

/// Default cap on the register size; solver state grows as `2^N`.
pub const DEFAULT_MAX_QUBITS: usize = 12;

/// Tolerance on the normalization of a [`DiagonalState`].
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// An angular frequency or rate in rad/us.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct AngularFrequency(f64);

impl AngularFrequency {
    pub const ZERO: Self = Self(0.0);

    pub const fn from_rad_per_us(value: f64) -> Self {
        Self(value)
    }

    /// `2pi x mhz`.
    pub fn from_mhz(mhz: f64) -> Self {
        Self(TAU * mhz)
    }

    pub fn from_ghz(ghz: f64) -> Self {
        Self::from_mhz(1e3 * ghz)
    }

    /// Value in rad/us.
    pub const fn value(self) -> f64 {
        self.0
    }

    /// Linear frequency in MHz.
    pub fn mhz(self) -> f64 {
        self.0 / TAU
    }
}

/// One qubit of the register.
///
/// The dispersive shift is either derived from `(transition_freq, coupling)`
/// by [`derive_dispersive_shifts`] or supplied directly.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QubitParams {
    pub transition_freq: Option<AngularFrequency>,
    pub coupling: Option<AngularFrequency>,
    pub dispersive_shift: Option<AngularFrequency>,
    /// Renormalized transition frequency `omega_j - Gamma_j`, filled in on derivation.
    pub renormalized_freq: Option<AngularFrequency>,
    /// Energy relaxation time in us. `None` means "use the default" in the
    /// decay model, `f64::INFINITY` means no decay.
    pub t1: Option<f64>,
}

impl QubitParams {
    pub fn from_coupling(transition_freq: AngularFrequency, coupling: AngularFrequency) -> Self {
        Self {
            transition_freq: Some(transition_freq),
            coupling: Some(coupling),
            ..Self::default()
        }
    }

    pub fn from_shift(shift: AngularFrequency) -> Self {
        Self {
            dispersive_shift: Some(shift),
            ..Self::default()
        }
    }

    pub fn with_t1(mut self, t1: f64) -> Self {
        self.t1 = Some(t1);
        self
    }

    fn has_coupling_pair(&self) -> bool {
        self.transition_freq.is_some() && self.coupling.is_some()
    }
}

/// Cavity, drive and qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceParams {
    cavity_freq: AngularFrequency,
    cavity_decay: AngularFrequency,
    drive: AngularFrequency,
    qubits: Vec<QubitParams>,
    max_qubits: usize,
}

impl DeviceParams {
    /// Builds a device with the default drive `kappa / 20`.
    pub fn new(
        cavity_freq: AngularFrequency,
        cavity_decay: AngularFrequency,
        qubits: Vec<QubitParams>,
    ) -> Result<Self> {
        Self::with_cap(cavity_freq, cavity_decay, qubits, DEFAULT_MAX_QUBITS)
    }

    pub fn with_cap(
        cavity_freq: AngularFrequency,
        cavity_decay: AngularFrequency,
        qubits: Vec<QubitParams>,
        max_qubits: usize,
    ) -> Result<Self> {
        if !cavity_freq.value().is_finite() {
            return Err(invalid("cavity_freq", "must be finite"));
        }
        let kappa = cavity_decay.value();
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(invalid("kappa", "must be finite and positive"));
        }
        if qubits.len() > max_qubits {
            return Err(Error::TooManyQubits {
                n: qubits.len(),
                cap: max_qubits,
            });
        }
        for (idx, q) in qubits.iter().enumerate() {
            check_qubit(idx + 1, q)?;
        }
        Ok(Self {
            cavity_freq,
            cavity_decay,
            drive: AngularFrequency(kappa / 20.0),
            qubits,
            max_qubits,
        })
    }

    pub fn with_drive(mut self, drive: AngularFrequency) -> Result<Self> {
        if !drive.value().is_finite() {
            return Err(invalid("drive", "must be finite"));
        }
        self.drive = drive;
        Ok(self)
    }

    pub fn cavity_freq(&self) -> AngularFrequency {
        self.cavity_freq
    }

    /// Cavity energy decay rate kappa.
    pub fn kappa(&self) -> AngularFrequency {
        self.cavity_decay
    }

    /// Drive amplitude epsilon.
    pub fn drive(&self) -> AngularFrequency {
        self.drive
    }

    pub fn qubits(&self) -> &[QubitParams] {
        &self.qubits
    }

    pub fn n_qubits(&self) -> usize {
        self.qubits.len()
    }

    pub fn max_qubits(&self) -> usize {
        self.max_qubits
    }

    /// Number of computational basis states, `2^N`.
    pub fn dim(&self) -> usize {
        1 << self.qubits.len()
    }

    /// Dispersive shifts `Gamma_j` in rad/us, in qubit order.
    pub fn shifts(&self) -> Result<Vec<f64>> {
        self.qubits
            .iter()
            .enumerate()
            .map(|(idx, q)| {
                q.dispersive_shift
                    .map(AngularFrequency::value)
                    .ok_or(Error::ShiftNotDerived { qubit: idx + 1 })
            })
            .collect()
    }

    /// Checks that `state` describes the same register.
    pub fn check_state(&self, state: &DiagonalState) -> Result<()> {
        if state.n_qubits() != self.n_qubits() {
            return Err(Error::QubitCountMismatch {
                expected: self.n_qubits(),
                found: state.n_qubits(),
            });
        }
        Ok(())
    }
}

fn check_qubit(qubit: usize, q: &QubitParams) -> Result<()> {
    let finite = |v: Option<AngularFrequency>| v.is_none_or(|f| f.value().is_finite());
    if !(finite(q.transition_freq) && finite(q.coupling) && finite(q.dispersive_shift)) {
        return Err(invalid(
            "qubit",
            format!("qubit {qubit} has a non-finite frequency"),
        ));
    }
    if q.coupling.is_some_and(|g| g.value() < 0.0) {
        return Err(invalid(
            "coupling",
            format!("qubit {qubit} has a negative coupling"),
        ));
    }
    if let Some(t1) = q.t1 {
        if t1.is_nan() || t1 <= 0.0 {
            return Err(invalid("t1", format!("qubit {qubit} needs t1 > 0")));
        }
    }
    Ok(())
}

/// Fills in `Gamma_j = g_j^2 / |omega_f - omega_j|` and `omega_j - Gamma_j`.
///
/// Directly supplied shifts pass through unchanged.
pub fn derive_dispersive_shifts(params: &DeviceParams) -> Result<DeviceParams> {
    let mut out = params.clone();
    let omega_f = params.cavity_freq.value();
    for (idx, q) in out.qubits.iter_mut().enumerate() {
        let qubit = idx + 1;
        match (q.has_coupling_pair(), q.dispersive_shift) {
            (true, Some(_)) if q.renormalized_freq.is_none() => {
                return Err(Error::AmbiguousShift { qubit })
            }
            (true, _) => {
                let omega = q.transition_freq.unwrap().value();
                let g = q.coupling.unwrap().value();
                let detuning = (omega_f - omega).abs();
                if detuning == 0.0 {
                    return Err(Error::ResonantQubit { qubit });
                }
                let shift = g * g / detuning;
                q.dispersive_shift = Some(AngularFrequency(shift));
                q.renormalized_freq = Some(AngularFrequency(omega - shift));
            }
            (false, Some(_)) => {}
            (false, None) => return Err(Error::MissingShift { qubit }),
        }
    }
    Ok(out)
}

/// Which dispersive-regime ratio a [`RatioCheck`] refers to (1-based qubits).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatioKind {
    /// `g_j / Delta_j`.
    CouplingOverDetuning { qubit: usize },
    /// `g_i g_j / (Delta_{via} Delta_ij)` with `via` one of `i`, `j`.
    QubitCrossTalk { i: usize, j: usize, via: usize },
    /// Directly supplied shift, in MHz; only positivity is checked.
    DirectShift { qubit: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioCheck {
    pub kind: RatioKind,
    pub value: f64,
    pub passed: bool,
}

/// A qubit whose relaxation rate `1/t1` is not small against kappa.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayWarning {
    pub qubit: usize,
    /// `(1/t1) / kappa`.
    pub ratio: f64,
}

/// Ratio above which a qubit's `(1/t1)/kappa` is reported.
pub const DECAY_WARN_RATIO: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub threshold: f64,
    pub checks: Vec<RatioCheck>,
    pub decay_warnings: Vec<DecayWarning>,
}

impl ValidationReport {
    /// True when every ratio lies in `(0, threshold)`. Decay warnings do not fail.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Checks the dispersive-regime conditions for every qubit and qubit pair.
pub fn validate_dispersive(params: &DeviceParams, threshold: f64) -> Result<ValidationReport> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(invalid("threshold", "must lie in (0, 1)"));
    }
    let omega_f = params.cavity_freq.value();
    let in_regime = |v: f64| v > 0.0 && v < threshold;
    let mut checks = Vec::new();
    let mut detunings: Vec<Option<(f64, f64, f64)>> = Vec::with_capacity(params.n_qubits());

    for (idx, q) in params.qubits.iter().enumerate() {
        let qubit = idx + 1;
        if q.has_coupling_pair() {
            let omega = q.transition_freq.unwrap().value();
            let g = q.coupling.unwrap().value();
            let detuning = (omega_f - omega).abs();
            if detuning == 0.0 {
                return Err(Error::ResonantQubit { qubit });
            }
            let value = g / detuning;
            checks.push(RatioCheck {
                kind: RatioKind::CouplingOverDetuning { qubit },
                value,
                passed: in_regime(value),
            });
            detunings.push(Some((omega, g, detuning)));
        } else if let Some(shift) = q.dispersive_shift {
            checks.push(RatioCheck {
                kind: RatioKind::DirectShift { qubit },
                value: shift.mhz(),
                passed: shift.value() > 0.0,
            });
            detunings.push(None);
        } else {
            return Err(Error::MissingShift { qubit });
        }
    }

    for i in 0..detunings.len() {
        for j in (i + 1)..detunings.len() {
            let (Some((wi, gi, di)), Some((wj, gj, dj))) = (detunings[i], detunings[j]) else {
                continue;
            };
            let dij = (wi - wj).abs();
            if dij == 0.0 {
                return Err(Error::DegenerateQubits {
                    first: i + 1,
                    second: j + 1,
                });
            }
            for (via, d) in [(i + 1, di), (j + 1, dj)] {
                let value = gi * gj / (d * dij);
                checks.push(RatioCheck {
                    kind: RatioKind::QubitCrossTalk {
                        i: i + 1,
                        j: j + 1,
                        via,
                    },
                    value,
                    passed: in_regime(value),
                });
            }
        }
    }

    let kappa = params.cavity_decay.value();
    let decay_warnings = params
        .qubits
        .iter()
        .enumerate()
        .filter_map(|(idx, q)| {
            let ratio = q.t1.map(|t1| (1.0 / t1) / kappa)?;
            (ratio > DECAY_WARN_RATIO).then_some(DecayWarning {
                qubit: idx + 1,
                ratio,
            })
        })
        .collect();

    Ok(ValidationReport {
        threshold,
        checks,
        decay_warnings,
    })
}

/// Eigenvalue of `sigma_z` of qubit `j` (1-based) on basis state `k`.
pub fn basis_sign(k: usize, j: usize, n_qubits: usize) -> Result<f64> {
    if j == 0 || j > n_qubits {
        return Err(Error::IndexOutOfRange(format!(
            "qubit {j} not in 1..={n_qubits}"
        )));
    }
    if k >= 1 << n_qubits {
        return Err(Error::IndexOutOfRange(format!(
            "basis index {k} not below 2^{n_qubits}"
        )));
    }
    Ok(sign_of_bit(k, j - 1))
}

#[inline]
pub(crate) fn sign_of_bit(k: usize, bit: usize) -> f64 {
    if (k >> bit) & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Sum of `Gamma_j s_j(k)`: the cavity pull of basis state `k`.
///
/// Its resonance sits at `omega_f - pull(k)`.
pub(crate) fn pull(shifts: &[f64], k: usize) -> f64 {
    shifts
        .iter()
        .enumerate()
        .map(|(bit, g)| g * sign_of_bit(k, bit))
        .sum()
}

/// Probability vector over the `2^N` computational basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalState {
    n_qubits: usize,
    probs: Vec<f64>,
}

impl DiagonalState {
    pub fn new(n_qubits: usize, probs: Vec<f64>) -> Result<Self> {
        if n_qubits >= usize::BITS as usize - 1 || probs.len() != 1 << n_qubits {
            return Err(Error::InvalidState(format!(
                "{} probabilities for {n_qubits} qubits",
                probs.len()
            )));
        }
        if let Some((k, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(**p >= 0.0 && **p <= 1.0))
        {
            return Err(Error::InvalidState(format!(
                "probability {p} at index {k} outside [0, 1]"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidState(format!("probabilities sum to {total}")));
        }
        Ok(Self { n_qubits, probs })
    }

    /// Rescales nonnegative weights to unit sum.
    pub fn from_weights(n_qubits: usize, weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) || weights.iter().any(|w| *w < 0.0) {
            return Err(Error::InvalidState(
                "weights must be nonnegative with positive finite sum".into(),
            ));
        }
        let mut probs: Vec<f64> = weights.iter().map(|w| (w / total).min(1.0)).collect();
        // fold the rounding residue into the largest entry
        let residue = 1.0 - probs.iter().sum::<f64>();
        let largest = (0..probs.len())
            .max_by(|a, b| probs[*a].total_cmp(&probs[*b]))
            .unwrap_or(0);
        if let Some(p) = probs.get_mut(largest) {
            *p = (*p + residue).clamp(0.0, 1.0);
        }
        Self::new(n_qubits, probs)
    }

    pub fn basis(n_qubits: usize, k: usize) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if k >= dim {
            return Err(Error::IndexOutOfRange(format!(
                "basis index {k} not below 2^{n_qubits}"
            )));
        }
        let mut probs = alloc::vec![0.0; dim];
        probs[k] = 1.0;
        Self::new(n_qubits, probs)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn dim(&self) -> usize {
        self.probs.len()
    }

    /// Some `k` when the state is the basis state `|k>`.
    pub fn as_basis_state(&self) -> Option<usize> {
        self.probs.iter().position(|p| *p == 1.0)
    }

    /// The state with every qubit flipped.
    pub fn complemented(&self) -> Self {
        let mask = self.probs.len() - 1;
        let probs = (0..self.probs.len())
            .map(|k| self.probs[k ^ mask])
            .collect();
        Self {
            n_qubits: self.n_qubits,
            probs,
        }
    }
}

/// `<prod_{j in subset} sigma_j^z>` for a diagonal state.
///
/// `subset` is a bitmask with qubit `j` on bit `j - 1`; the empty subset gives 1.
pub fn expectation_z(state: &DiagonalState, subset: usize) -> Result<f64> {
    if subset >= state.dim() {
        return Err(Error::IndexOutOfRange(format!(
            "subset mask {subset:#b} names qubits beyond {}",
            state.n_qubits
        )));
    }
    Ok(expectation_z_unchecked(state.probs(), subset))
}

/// Bitmask for a list of 1-based qubit indices.
pub fn subset_mask(qubits: &[usize], n_qubits: usize) -> Result<usize> {
    qubits.iter().try_fold(0usize, |mask, &j| {
        if j == 0 || j > n_qubits {
            Err(Error::IndexOutOfRange(format!(
                "qubit {j} not in 1..={n_qubits}"
            )))
        } else {
            Ok(mask | 1 << (j - 1))
        }
    })
}

pub(crate) fn expectation_z_unchecked(probs: &[f64], subset: usize) -> f64 {
    probs
        .iter()
        .enumerate()
        .map(|(k, p)| {
            // product of signs is -1 for each qubit of the subset sitting in |0>
            if (subset & !k).count_ones().is_multiple_of(2) {
                *p
            } else {
                -*p
            }
        })
        .sum()
}

/// Evenly spaced probe frequencies `start..=stop`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    start: AngularFrequency,
    stop: AngularFrequency,
    count: usize,
}

impl FrequencyGrid {
    pub fn new(start: AngularFrequency, stop: AngularFrequency, count: usize) -> Result<Self> {
        if !(start.value().is_finite() && stop.value().is_finite()) {
            return Err(Error::InvalidGrid("non-finite bounds".into()));
        }
        if !(start.value() < stop.value()) {
            return Err(Error::InvalidGrid(format!(
                "start {} must be below stop {}",
                start.value(),
                stop.value()
            )));
        }
        if count < 2 {
            return Err(Error::InvalidGrid(format!("count {count} below 2")));
        }
        Ok(Self { start, stop, count })
    }

    /// Grid of `count` points on `center +/- half_span`.
    pub fn centered(
        center: AngularFrequency,
        half_span: AngularFrequency,
        count: usize,
    ) -> Result<Self> {
        Self::new(
            AngularFrequency(center.value() - half_span.value()),
            AngularFrequency(center.value() + half_span.value()),
            count,
        )
    }

    /// Default window `omega_f +/- (sum_j Gamma_j + 10 kappa)`, which covers every pull.
    pub fn covering_all_peaks(params: &DeviceParams, count: usize) -> Result<Self> {
        let reach: f64 =
            params.shifts()?.iter().map(|g| g.abs()).sum::<f64>() + 10.0 * params.kappa().value();
        Self::centered(params.cavity_freq(), AngularFrequency(reach), count)
    }

    pub fn start(&self) -> AngularFrequency {
        self.start
    }

    pub fn stop(&self) -> AngularFrequency {
        self.stop
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn step(&self) -> f64 {
        (self.stop.value() - self.start.value()) / (self.count - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.count {
            self.stop.value()
        } else {
            self.start.value() + i as f64 * self.step()
        }
    }

    /// Probe frequencies in rad/us.
    pub fn points(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.count).map(|i| self.point(i))
    }
}

/// Transmission values `S(omega_L) = <a^dag a>/epsilon^2` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: FrequencyGrid,
    values: Vec<f64>,
}

impl Spectrum {
    pub fn new(grid: FrequencyGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.count() {
            return Err(Error::InvalidSpectrum(format!(
                "{} values for {} grid points",
                values.len(),
                grid.count()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidSpectrum(format!(
                "value {v} is not finite and >= 0"
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(omega_L, S)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid.points().zip(self.values.iter().copied())
    }

    /// Trapezoid-rule area under the spectrum.
    pub fn area(&self) -> f64 {
        let h = self.grid.step();
        let inner: f64 = self.values.iter().sum();
        h * (inner - 0.5 * (self.values[0] + self.values[self.values.len() - 1]))
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|v| v * factor).collect())
    }

    /// Index of the largest value.
    pub fn argmax(&self) -> usize {
        (0..self.values.len())
            .max_by(|a, b| self.values[*a].total_cmp(&self.values[*b]))
            .unwrap_or(0)
    }
}

/// Evaluates `f` at every grid point into a spectrum.
pub(crate) fn tabulate(
    grid: &FrequencyGrid,
    mut f: impl FnMut(f64) -> Result<f64>,
) -> Result<Spectrum> {
    let values = grid.points().map(&mut f).collect::<Result<Vec<_>>>()?;
    Spectrum::new(*grid, values)
}
