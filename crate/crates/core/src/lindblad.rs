//! Brute-force check: the full cavity + qubit master equation in a truncated
//! Fock space, marched to its steady state with fixed-step RK4.
//!
//! In the frame rotating at the probe frequency,
//!
//! ```text
//! H = delta a^dag a + 1/2 sum_j w~_j sz_j - a^dag a sum_j Gamma_j sz_j + eps (a^dag + a)
//! drho/dt = -i [H, rho] + kappa/2 (2 a rho a^dag - a^dag a rho - rho a^dag a)
//! ```
//!
//! The `w~_j sz_j / 2` term is kept even though it commutes with every
//! observable computed here. Basis index of `|n> (x) |k>` is `n * 2^N + k`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::Zero;

use crate::error::{invalid, Error, Result};
use crate::linalg::is_positive_semidefinite;
use crate::math::sqrt;
use crate::model::{pull, sign_of_bit, DeviceParams, DiagonalState, FrequencyGrid, Spectrum};

/// Fock-tail occupation above which an oracle point is flagged.
pub const TAIL_FLAG: f64 = 1e-6;

const TRACE_TOL: f64 = 1e-8;
const HERMITIAN_TOL: f64 = 1e-10;
const POSITIVITY_TOL: f64 = 1e-8;

/// Step-size safety factor against the fastest rate in the generator.
const STEP_FACTOR: f64 = 0.05;

/// Fock truncation and integration controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationConfig {
    /// Highest photon number kept.
    pub n_max: usize,
    /// Drive amplitude; `None` uses the device drive.
    pub drive: Option<f64>,
    /// Fixed step in us; `None` picks the largest allowed step.
    pub time_step: Option<f64>,
    /// Relative change of `<a^dag a>` over one cavity lifetime that counts as steady.
    pub convergence_tol: f64,
    /// Give up after this many us.
    pub max_time: f64,
}

impl TruncationConfig {
    /// `n_max = 8`, device drive, automatic step, tolerance `1e-8`, up to `500/kappa`.
    pub fn for_device(params: &DeviceParams) -> Self {
        Self {
            n_max: 8,
            drive: None,
            time_step: None,
            convergence_tol: 1e-8,
            max_time: 500.0 / params.kappa().value(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_max < 2 {
            return Err(invalid("n_max", "must be at least 2"));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(invalid("convergence_tol", "must be positive"));
        }
        if !(self.max_time > 0.0) {
            return Err(invalid("max_time", "must be positive"));
        }
        if let Some(eps) = self.drive {
            if !eps.is_finite() {
                return Err(invalid("drive", "must be finite"));
            }
        }
        Ok(())
    }
}

/// Largest step allowed at probe frequency `omega_l`:
/// `0.05 / (|delta| + N Gamma_max + kappa)`.
pub fn max_time_step(params: &DeviceParams, omega_l: f64) -> Result<f64> {
    let shifts = params.shifts()?;
    let gamma_max = shifts.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let delta = (params.cavity_freq().value() - omega_l).abs();
    let rate = delta + shifts.len() as f64 * gamma_max + params.kappa().value();
    Ok(STEP_FACTOR / rate)
}

/// Density operator on `Fock(0..=n_max) (x) (C^2)^N`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    fock_levels: usize,
    n_qubits: usize,
    data: Vec<Complex64>,
}

impl DensityOperator {
    /// `|0><0| (x) diag(p)`.
    pub fn vacuum_with(state: &DiagonalState, n_max: usize) -> Self {
        let q = state.dim();
        let dim = (n_max + 1) * q;
        let mut data = vec![Complex64::zero(); dim * dim];
        for (k, p) in state.probs().iter().enumerate() {
            data[k * dim + k] = Complex64::new(*p, 0.0);
        }
        Self {
            fock_levels: n_max + 1,
            n_qubits: state.n_qubits(),
            data,
        }
    }

    /// Wraps a raw row-major matrix; no physicality checks.
    pub fn from_raw(n_max: usize, n_qubits: usize, data: Vec<Complex64>) -> Result<Self> {
        let dim = (n_max + 1) << n_qubits;
        if data.len() != dim * dim {
            return Err(invalid(
                "density operator",
                format!("expected {} entries", dim * dim),
            ));
        }
        Ok(Self {
            fock_levels: n_max + 1,
            n_qubits,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.fock_levels << self.n_qubits
    }

    pub fn n_max(&self) -> usize {
        self.fock_levels - 1
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    fn qdim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn trace(&self) -> Complex64 {
        let dim = self.dim();
        (0..dim).map(|i| self.data[i * dim + i]).sum()
    }

    /// `max |rho - rho^dag|`.
    pub fn hermiticity_error(&self) -> f64 {
        let dim = self.dim();
        let mut worst = 0.0f64;
        for r in 0..dim {
            for c in r..dim {
                worst = worst.max((self.data[r * dim + c] - self.data[c * dim + r].conj()).norm());
            }
        }
        worst
    }

    /// No eigenvalue below `-tol`.
    pub fn is_positive(&self, tol: f64) -> bool {
        is_positive_semidefinite(&self.data, self.dim(), tol)
    }

    /// `<a^dag a>`.
    pub fn photon_number(&self) -> f64 {
        let dim = self.dim();
        let q = self.qdim();
        (0..dim)
            .map(|i| (i / q) as f64 * self.data[i * dim + i].re)
            .sum()
    }

    /// Population of the highest kept Fock level.
    pub fn tail_occupation(&self) -> f64 {
        let dim = self.dim();
        let q = self.qdim();
        let top = self.n_max() * q;
        (top..dim).map(|i| self.data[i * dim + i].re).sum()
    }

    /// `<prod_{j in subset} sz_j>` for a subset bitmask.
    pub fn expectation_z(&self, subset: usize) -> f64 {
        let dim = self.dim();
        let q = self.qdim();
        (0..dim)
            .map(|i| {
                let k = i % q;
                let sign = if (subset & !k).count_ones().is_multiple_of(2) {
                    1.0
                } else {
                    -1.0
                };
                sign * self.data[i * dim + i].re
            })
            .sum()
    }

    /// Reduced qubit populations `p_k = sum_n rho[(n,k),(n,k)]`.
    pub fn qubit_populations(&self) -> Vec<f64> {
        let dim = self.dim();
        let q = self.qdim();
        let mut p = vec![0.0; q];
        for i in 0..dim {
            p[i % q] += self.data[i * dim + i].re;
        }
        p
    }

    fn check_physical(&self, time: f64) -> Result<()> {
        let tr = self.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::StepFailure {
                time,
                reason: format!("trace drifted to {tr}"),
            });
        }
        let herm = self.hermiticity_error();
        if herm > HERMITIAN_TOL {
            return Err(Error::StepFailure {
                time,
                reason: format!("hermiticity error {herm:e}"),
            });
        }
        if !self.is_positive(POSITIVITY_TOL) {
            return Err(Error::StepFailure {
                time,
                reason: format!("eigenvalue below -{POSITIVITY_TOL:e}"),
            });
        }
        Ok(())
    }
}

/// The Liouvillian `rho -> drho/dt` at one probe frequency.
#[derive(Debug, Clone)]
pub struct Generator {
    qdim: usize,
    fock_levels: usize,
    kappa: f64,
    drive: f64,
    /// Diagonal of H.
    energies: Vec<f64>,
    sqrt_n: Vec<f64>,
}

/// Builds the master-equation generator for probe frequency `omega_l`.
pub fn build_generator(
    params: &DeviceParams,
    omega_l: f64,
    trunc: &TruncationConfig,
) -> Result<Generator> {
    trunc.validate()?;
    let shifts = params.shifts()?;
    let qdim = params.dim();
    let fock_levels = trunc.n_max + 1;
    let delta = params.cavity_freq().value() - omega_l;
    let renormalized: Vec<f64> = params
        .qubits()
        .iter()
        .map(|q| q.renormalized_freq.map_or(0.0, |w| w.value()))
        .collect();
    let mut energies = Vec::with_capacity(fock_levels * qdim);
    for n in 0..fock_levels {
        for k in 0..qdim {
            let free: f64 = renormalized
                .iter()
                .enumerate()
                .map(|(bit, w)| 0.5 * w * sign_of_bit(k, bit))
                .sum();
            energies.push(n as f64 * (delta - pull(&shifts, k)) + free);
        }
    }
    Ok(Generator {
        qdim,
        fock_levels,
        kappa: params.kappa().value(),
        drive: trunc.drive.unwrap_or(params.drive().value()),
        energies,
        sqrt_n: (0..=fock_levels).map(|n| sqrt(n as f64)).collect(),
    })
}

impl Generator {
    pub fn dim(&self) -> usize {
        self.fock_levels * self.qdim
    }

    /// Writes `L(rho)` into `out`.
    pub fn apply(&self, rho: &[Complex64], out: &mut [Complex64]) {
        let dim = self.dim();
        let q = self.qdim;
        let top = self.fock_levels - 1;
        let eps = self.drive;
        let half_kappa = 0.5 * self.kappa;
        let minus_i = Complex64::new(0.0, -1.0);
        for r in 0..dim {
            let nr = r / q;
            for c in 0..dim {
                let nc = c / q;
                let x = rho[r * dim + c];
                // [H, rho] with diagonal energies plus the drive's ladder terms
                let mut comm = x * (self.energies[r] - self.energies[c]);
                if eps != 0.0 {
                    let mut ladder = Complex64::zero();
                    if nr < top {
                        ladder += rho[(r + q) * dim + c] * self.sqrt_n[nr + 1];
                    }
                    if nr > 0 {
                        ladder += rho[(r - q) * dim + c] * self.sqrt_n[nr];
                    }
                    if nc < top {
                        ladder -= rho[r * dim + c + q] * self.sqrt_n[nc + 1];
                    }
                    if nc > 0 {
                        ladder -= rho[r * dim + c - q] * self.sqrt_n[nc];
                    }
                    comm += ladder * eps;
                }
                let mut value = minus_i * comm - x * (half_kappa * (nr + nc) as f64);
                if nr < top && nc < top {
                    value += rho[(r + q) * dim + c + q]
                        * (self.kappa * self.sqrt_n[nr + 1] * self.sqrt_n[nc + 1]);
                }
                out[r * dim + c] = value;
            }
        }
    }
}

/// Outcome of one steady-state integration.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub rho: DensityOperator,
    pub photon_number: f64,
    /// Integration time in us.
    pub time: f64,
    pub steps: usize,
    pub converged: bool,
    /// Relative change of `<a^dag a>` over the last cavity lifetime.
    pub last_change: f64,
    /// `|L(rho)|_F / (kappa |rho|_F)` at the final state.
    pub stationarity: f64,
}

struct Rk4 {
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    k3: Vec<Complex64>,
    k4: Vec<Complex64>,
    tmp: Vec<Complex64>,
}

impl Rk4 {
    fn new(len: usize) -> Self {
        let z = vec![Complex64::zero(); len];
        Self {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            tmp: z,
        }
    }

    fn step(&mut self, gen: &Generator, rho: &mut [Complex64], h: f64) {
        gen.apply(rho, &mut self.k1);
        for ((t, r), k) in self.tmp.iter_mut().zip(rho.iter()).zip(&self.k1) {
            *t = r + k * (0.5 * h);
        }
        gen.apply(&self.tmp, &mut self.k2);
        for ((t, r), k) in self.tmp.iter_mut().zip(rho.iter()).zip(&self.k2) {
            *t = r + k * (0.5 * h);
        }
        gen.apply(&self.tmp, &mut self.k3);
        for ((t, r), k) in self.tmp.iter_mut().zip(rho.iter()).zip(&self.k3) {
            *t = r + k * h;
        }
        gen.apply(&self.tmp, &mut self.k4);
        let sixth = h / 6.0;
        for (i, r) in rho.iter_mut().enumerate() {
            *r += (self.k1[i] + (self.k2[i] + self.k3[i]) * 2.0 + self.k4[i]) * sixth;
        }
    }
}

fn frobenius(v: &[Complex64]) -> f64 {
    sqrt(v.iter().map(|z| z.norm_sqr()).sum::<f64>())
}

fn march(
    params: &DeviceParams,
    state: &DiagonalState,
    omega_l: f64,
    trunc: &TruncationConfig,
) -> Result<SteadyState> {
    params.check_state(state)?;
    let gen = build_generator(params, omega_l, trunc)?;
    let bound = max_time_step(params, omega_l)?;
    let h = match trunc.time_step {
        Some(h) if !(h > 0.0 && h <= bound) => {
            return Err(invalid(
                "time_step",
                format!("{h} us outside (0, {bound}] at omega_L = {omega_l}"),
            ))
        }
        Some(h) => h,
        None => bound,
    };
    let mut rho = DensityOperator::vacuum_with(state, trunc.n_max);
    let mut deriv = vec![Complex64::zero(); rho.data.len()];
    let stationarity = |rho: &DensityOperator, deriv: &mut [Complex64]| {
        gen.apply(&rho.data, deriv);
        frobenius(deriv) / (gen.kappa * frobenius(&rho.data))
    };

    if stationarity(&rho, &mut deriv) == 0.0 {
        return Ok(SteadyState {
            photon_number: rho.photon_number(),
            rho,
            time: 0.0,
            steps: 0,
            converged: true,
            last_change: 0.0,
            stationarity: 0.0,
        });
    }

    let lifetime = 1.0 / params.kappa().value();
    let window = libm::ceil(lifetime / h) as usize;
    let mut rk4 = Rk4::new(rho.data.len());
    let mut history = Vec::with_capacity(window);
    let mut steps = 0usize;
    let mut time = 0.0;
    loop {
        history.clear();
        for _ in 0..window {
            rk4.step(&gen, &mut rho.data, h);
            steps += 1;
            time = steps as f64 * h;
            rho.check_physical(time)?;
            history.push(rho.photon_number());
        }
        let end = *history.last().unwrap();
        let spread = history.iter().fold(0.0f64, |m, n| m.max((n - end).abs()));
        let last_change = if end.abs() > 0.0 {
            spread / end.abs()
        } else if spread == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        let converged = last_change < trunc.convergence_tol;
        if converged || time >= trunc.max_time {
            return Ok(SteadyState {
                photon_number: end,
                stationarity: stationarity(&rho, &mut deriv),
                rho,
                time,
                steps,
                converged,
                last_change,
            });
        }
    }
}

/// Integrates from `|0><0| (x) diag(p)` until `<a^dag a>` settles.
pub fn evolve_to_steady(
    params: &DeviceParams,
    state: &DiagonalState,
    omega_l: f64,
    trunc: &TruncationConfig,
) -> Result<SteadyState> {
    let out = march(params, state, omega_l, trunc)?;
    if !out.converged {
        return Err(Error::NotConverged {
            omega_l,
            time: out.time,
            last_change: out.last_change,
        });
    }
    Ok(out)
}

/// One grid point of an oracle scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OraclePoint {
    pub omega_l: f64,
    /// `<a^dag a> / eps^2`.
    pub value: f64,
    pub converged: bool,
    pub tail_occupation: f64,
    pub steps: usize,
    pub time: f64,
    pub last_change: f64,
}

impl OraclePoint {
    /// Tail occupation at or above [`TAIL_FLAG`].
    pub fn flagged(&self) -> bool {
        !(self.tail_occupation < TAIL_FLAG)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSpectrum {
    pub spectrum: Spectrum,
    pub points: Vec<OraclePoint>,
}

impl OracleSpectrum {
    pub fn all_converged(&self) -> bool {
        self.points.iter().all(|p| p.converged)
    }

    /// The first non-converged point as an error.
    pub fn check(&self) -> Result<()> {
        match self.points.iter().find(|p| !p.converged) {
            Some(p) => Err(Error::NotConverged {
                omega_l: p.omega_l,
                time: p.time,
                last_change: p.last_change,
            }),
            None => Ok(()),
        }
    }
}

/// Master-equation spectrum, one integration per grid point.
///
/// Non-convergence is recorded per point rather than aborting the scan; see
/// [`OracleSpectrum::check`].
pub fn oracle_spectrum(
    params: &DeviceParams,
    state: &DiagonalState,
    grid: &FrequencyGrid,
    trunc: &TruncationConfig,
) -> Result<OracleSpectrum> {
    let eps = trunc.drive.unwrap_or(params.drive().value());
    let mut points = Vec::with_capacity(grid.count());
    for omega_l in grid.points() {
        let out = march(params, state, omega_l, trunc)?;
        let value = if eps == 0.0 {
            0.0
        } else {
            (out.photon_number / (eps * eps)).max(0.0)
        };
        points.push(OraclePoint {
            omega_l,
            value,
            converged: out.converged,
            tail_occupation: out.rho.tail_occupation(),
            steps: out.steps,
            time: out.time,
            last_change: out.last_change,
        });
    }
    let spectrum = Spectrum::new(*grid, points.iter().map(|p| p.value).collect())?;
    Ok(OracleSpectrum { spectrum, points })
}
