//! Qubit T1 relaxation of the measured populations and the resulting
//! quasi-static and time-averaged spectra.
//!
//! Each qubit relaxes independently: a qubit in `|1>` stays there with
//! probability `exp(-tau/t1)` and otherwise drops to `|0>`. The cavity is
//! assumed to follow the populations adiabatically (kappa >> 1/t1), so the
//! spectrum at time `tau` is the steady-state spectrum of the decayed state.

use alloc::vec;
use alloc::vec::Vec;

use crate::chain::exact_spectrum;
use crate::error::{invalid, Result};
use crate::model::{DeviceParams, DiagonalState, FrequencyGrid, Spectrum};

/// Relaxation time assumed for a qubit without an explicit `t1`, in us.
pub const DEFAULT_T1: f64 = 1.0;

/// Populations sampled along a decay.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DiagonalState>,
}

/// Per-qubit relaxation times of a device, with [`DEFAULT_T1`] filled in.
pub fn device_t1(params: &DeviceParams) -> Vec<f64> {
    params
        .qubits()
        .iter()
        .map(|q| q.t1.unwrap_or(DEFAULT_T1))
        .collect()
}

fn check_t1(t1: &[f64], n_qubits: usize) -> Result<()> {
    if t1.len() != n_qubits {
        return Err(invalid("t1", "one relaxation time per qubit"));
    }
    if t1.iter().any(|t| t.is_nan() || *t <= 0.0) {
        return Err(invalid("t1", "relaxation times must be positive"));
    }
    Ok(())
}

fn survival(tau: f64, t1: f64) -> f64 {
    if t1.is_infinite() {
        1.0
    } else {
        libm::exp(-tau / t1)
    }
}

/// Applies independent amplitude damping for time `tau` to the populations.
pub fn decay_populations(initial: &DiagonalState, t1: &[f64], tau: f64) -> Result<DiagonalState> {
    check_t1(t1, initial.n_qubits())?;
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(invalid("tau", "must be finite and nonnegative"));
    }
    let mut p = initial.probs().to_vec();
    for (bit, t) in t1.iter().enumerate() {
        let stay = survival(tau, *t);
        let mask = 1 << bit;
        for k in 0..p.len() {
            if k & mask != 0 {
                let moved = p[k] * (1.0 - stay);
                p[k] -= moved;
                p[k ^ mask] += moved;
            }
        }
    }
    renormalized(initial.n_qubits(), p)
}

/// Clamps rounding noise and restores the unit sum.
fn renormalized(n_qubits: usize, mut p: Vec<f64>) -> Result<DiagonalState> {
    for x in p.iter_mut() {
        *x = x.clamp(0.0, 1.0);
    }
    DiagonalState::from_weights(n_qubits, &p)
}

/// Samples [`decay_populations`] at each time.
pub fn decay_trajectory(
    initial: &DiagonalState,
    t1: &[f64],
    times: &[f64],
) -> Result<DecayTrajectory> {
    let states = times
        .iter()
        .map(|tau| decay_populations(initial, t1, *tau))
        .collect::<Result<Vec<_>>>()?;
    Ok(DecayTrajectory {
        times: times.to_vec(),
        states,
    })
}

/// Steady-state spectrum of the state decayed for `tau`, using the device's t1 values.
pub fn quasi_static_spectrum(
    params: &DeviceParams,
    initial: &DiagonalState,
    tau: f64,
    grid: &FrequencyGrid,
) -> Result<Spectrum> {
    params.check_state(initial)?;
    let decayed = decay_populations(initial, &device_t1(params), tau)?;
    exact_spectrum(params, &decayed, grid)
}

/// How populations are averaged over `[0, tau_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Averaging {
    /// Exact time integrals of the exponentials.
    Analytic,
    /// Trapezoid rule on `n_steps + 1` equally spaced times.
    Trapezoid,
}

/// `(1/T) int_0^T exp(-r t) dt`.
fn mean_exponential(rate: f64, horizon: f64) -> f64 {
    let x = rate * horizon;
    if x == 0.0 {
        1.0
    } else if x.is_infinite() {
        0.0
    } else {
        -libm::expm1(-x) / x
    }
}

/// Time-averaged populations over `[0, tau_max]`.
pub fn time_averaged_populations(
    initial: &DiagonalState,
    t1: &[f64],
    tau_max: f64,
    n_steps: usize,
    method: Averaging,
) -> Result<DiagonalState> {
    check_t1(t1, initial.n_qubits())?;
    if !(tau_max >= 0.0 && tau_max.is_finite()) {
        return Err(invalid("tau_max", "must be finite and nonnegative"));
    }
    if n_steps < 2 {
        return Err(invalid("n_steps", "must be at least 2"));
    }
    if tau_max == 0.0 {
        return Ok(initial.clone());
    }
    match method {
        Averaging::Analytic => analytic_average(initial, t1, tau_max),
        Averaging::Trapezoid => {
            let h = tau_max / n_steps as f64;
            let mut acc = vec![0.0; initial.dim()];
            for i in 0..=n_steps {
                let w = if i == 0 || i == n_steps { 0.5 } else { 1.0 };
                let s = decay_populations(initial, t1, i as f64 * h)?;
                for (a, p) in acc.iter_mut().zip(s.probs()) {
                    *a += w * p;
                }
            }
            let scale = 1.0 / n_steps as f64;
            renormalized(
                initial.n_qubits(),
                acc.into_iter().map(|a| a * scale).collect(),
            )
        }
    }
}

/// Exact average of the decay map.
///
/// Starting from `|k>`, the weight reaching `|k'>` (with `k'` a sub-mask of
/// `k`) is `prod_{j in k'} e^{-g_j t} prod_{j in k \ k'} (1 - e^{-g_j t})`.
/// Expanding the second product gives a signed sum of pure exponentials whose
/// time averages are known in closed form.
fn analytic_average(initial: &DiagonalState, t1: &[f64], tau_max: f64) -> Result<DiagonalState> {
    let rates: Vec<f64> = t1
        .iter()
        .map(|t| if t.is_infinite() { 0.0 } else { 1.0 / t })
        .collect();
    let rate_of = |mask: usize| -> f64 {
        rates
            .iter()
            .enumerate()
            .filter(|(bit, _)| mask >> bit & 1 == 1)
            .map(|(_, r)| r)
            .sum()
    };
    let mut out = vec![0.0; initial.dim()];
    for (k, pk) in initial.probs().iter().enumerate() {
        if *pk == 0.0 {
            continue;
        }
        // every final state `kept` is a sub-mask of k
        let mut kept = k;
        loop {
            let lost = k & !kept;
            let base = rate_of(kept);
            // inclusion-exclusion over the qubits that relaxed
            let mut weight = 0.0;
            let mut sub = lost;
            loop {
                let sign = if sub.count_ones().is_multiple_of(2) {
                    1.0
                } else {
                    -1.0
                };
                weight += sign * mean_exponential(base + rate_of(sub), tau_max);
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & lost;
            }
            out[kept] += pk * weight;
            if kept == 0 {
                break;
            }
            kept = (kept - 1) & k;
        }
    }
    renormalized(initial.n_qubits(), out)
}

/// Spectrum averaged over decay times `[0, tau_max]`.
///
/// The spectrum is linear in the populations, so this is one exact solve at
/// the analytically averaged populations.
pub fn time_averaged_spectrum(
    params: &DeviceParams,
    initial: &DiagonalState,
    tau_max: f64,
    n_steps: usize,
    grid: &FrequencyGrid,
) -> Result<Spectrum> {
    time_averaged_spectrum_with(params, initial, tau_max, n_steps, grid, Averaging::Analytic)
}

pub fn time_averaged_spectrum_with(
    params: &DeviceParams,
    initial: &DiagonalState,
    tau_max: f64,
    n_steps: usize,
    grid: &FrequencyGrid,
    method: Averaging,
) -> Result<Spectrum> {
    params.check_state(initial)?;
    let mean = time_averaged_populations(initial, &device_t1(params), tau_max, n_steps, method)?;
    exact_spectrum(params, &mean, grid)
}

/// Qubits whose `(1/t1) / kappa` exceeds `ratio`, where the quasi-static
/// picture gets shaky.
pub fn timescale_warnings(params: &DeviceParams, ratio: f64) -> Vec<(usize, f64)> {
    let kappa = params.kappa().value();
    device_t1(params)
        .iter()
        .enumerate()
        .filter_map(|(idx, t1)| {
            let r = (1.0 / t1) / kappa;
            (r > ratio).then_some((idx + 1, r))
        })
        .collect()
}
