//! Exact steady-state transmission from the closed qubit-cavity correlation chain.
//!
//! The unknowns are `v(S) = <P_S a>` with `P_S = prod_{j in S} sigma_j^z` for
//! every subset `S` of the register (bitmask, qubit `j` on bit `j - 1`). They
//! obey
//!
//! ```text
//! d v(S)/dt = (-i delta - kappa/2) v(S) + i sum_l Gamma_l v(S xor {l}) - i eps <P_S>
//! ```
//!
//! with `delta = omega_f - omega_L`. The chain closes because `(sigma_l^z)^2 = 1`,
//! so the system has exactly `2^N` unknowns. The photon number then follows from
//! `d<a^dag a>/dt = -kappa <a^dag a> - 2 eps Im<a>`.
//!
//! The generator is `(-i delta - kappa/2) I + i sum_l Gamma_l X_l`, where `X_l`
//! flips bit `l`. Walsh characters diagonalize every `X_l`, so its eigenvalues
//! are `-i delta - kappa/2 + i sum_l (+/-Gamma_l)`: all with real part `-kappa/2`.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{norm2, walsh_hadamard, CMatrix};
use crate::math::sq;
use crate::model::{
    expectation_z_unchecked, pull, tabulate, DeviceParams, DiagonalState, FrequencyGrid, Spectrum,
};

/// Relative residual accepted from the dense steady-state solve.
pub const RESIDUAL_TOL: f64 = 1e-10;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Steady-state correlators `<(prod_{j in S} sigma_j^z) a>` indexed by subset mask.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatorVector {
    n_qubits: usize,
    entries: Vec<Complex64>,
}

impl CorrelatorVector {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn entry(&self, subset: usize) -> Complex64 {
        self.entries[subset]
    }

    /// The cavity field `<a>`.
    pub fn field(&self) -> Complex64 {
        self.entries[0]
    }
}

fn check_size(params: &DeviceParams) -> Result<()> {
    if params.n_qubits() > params.max_qubits() {
        return Err(Error::TooManyQubits {
            n: params.n_qubits(),
            cap: params.max_qubits(),
        });
    }
    Ok(())
}

/// Coefficient matrix `M` of `dv/dt = M v - i eps z` at probe frequency `omega_l`.
pub fn build_chain_matrix(params: &DeviceParams, omega_l: f64) -> Result<CMatrix> {
    check_size(params)?;
    let shifts = params.shifts()?;
    let dim = params.dim();
    let delta = params.cavity_freq().value() - omega_l;
    let diag = Complex64::new(-0.5 * params.kappa().value(), -delta);
    let mut m = CMatrix::zeros(dim);
    for s in 0..dim {
        m.set(s, s, diag);
        for (bit, gamma) in shifts.iter().enumerate() {
            m.add_to(s, s ^ (1 << bit), I * gamma);
        }
    }
    Ok(m)
}

/// Source vector `z(S) = <P_S>` over every subset.
pub fn correlator_source(state: &DiagonalState) -> Vec<f64> {
    (0..state.dim())
        .map(|subset| expectation_z_unchecked(state.probs(), subset))
        .collect()
}

/// Solves `M v = i eps z` for the steady-state correlators by dense LU.
pub fn steady_correlators(
    params: &DeviceParams,
    state: &DiagonalState,
    omega_l: f64,
) -> Result<CorrelatorVector> {
    params.check_state(state)?;
    let m = build_chain_matrix(params, omega_l)?;
    let z = correlator_source(state);
    solve_chain(&m, &z, params.drive().value(), state.n_qubits())
}

fn solve_chain(m: &CMatrix, z: &[f64], eps: f64, n_qubits: usize) -> Result<CorrelatorVector> {
    let rhs: Vec<Complex64> = z.iter().map(|zs| I * eps * zs).collect();
    let v = m.solve(&rhs).ok_or(Error::SolverFailure {
        residual: f64::INFINITY,
    })?;
    let mv = m.mul_vec(&v);
    let diff: Vec<Complex64> = mv.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    let scale = norm2(&rhs);
    let residual = if scale > 0.0 {
        norm2(&diff) / scale
    } else {
        norm2(&diff)
    };
    if !(residual <= RESIDUAL_TOL) {
        return Err(Error::SolverFailure { residual });
    }
    Ok(CorrelatorVector {
        n_qubits,
        entries: v,
    })
}

/// Transmission from the cavity field: `S = -2 Im<a> / (kappa eps)`.
fn transmission(field: Complex64, kappa: f64, eps: f64) -> f64 {
    let s = -2.0 * field.im / (kappa * eps);
    // a zero-probability corner of the state can leave -0.0 or a rounding-level negative
    if s < 0.0 && s > -1e-12 * (4.0 / (kappa * kappa)) {
        0.0
    } else {
        s
    }
}

/// Exact spectrum from a dense solve of the full chain at every grid point.
pub fn exact_spectrum(
    params: &DeviceParams,
    state: &DiagonalState,
    grid: &FrequencyGrid,
) -> Result<Spectrum> {
    params.check_state(state)?;
    check_size(params)?;
    let eps = drive_or_unit(params);
    let kappa = params.kappa().value();
    let z = correlator_source(state);
    tabulate(grid, |omega_l| {
        let m = build_chain_matrix(params, omega_l)?;
        let v = solve_chain(&m, &z, eps, state.n_qubits())?;
        Ok(transmission(v.field(), kappa, eps))
    })
}

/// The normalized spectrum does not depend on the drive; a zero drive is
/// replaced by a unit one so the ratio stays defined.
fn drive_or_unit(params: &DeviceParams) -> f64 {
    let eps = params.drive().value();
    if eps == 0.0 {
        1.0
    } else {
        eps
    }
}

/// Lorentzian mixture `sum_k p_k / ((omega_L - omega_f + pull_k)^2 + (kappa/2)^2)`.
pub fn mixture_spectrum(
    params: &DeviceParams,
    state: &DiagonalState,
    grid: &FrequencyGrid,
) -> Result<Spectrum> {
    params.check_state(state)?;
    let shifts = params.shifts()?;
    let omega_f = params.cavity_freq().value();
    let half_width_sq = 0.25 * sq(params.kappa().value());
    let terms: Vec<(f64, f64)> = state
        .probs()
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0)
        .map(|(k, p)| (omega_f - pull(&shifts, k), *p))
        .collect();
    tabulate(grid, |omega_l| {
        Ok(terms
            .iter()
            .map(|(center, p)| p / (sq(omega_l - center) + half_width_sq))
            .sum())
    })
}

/// Same contract as [`exact_spectrum`] in `O(N 2^N + G 2^N)`.
///
/// The source `z` is expanded in Walsh characters once; each mode then
/// responds independently through its eigenvalue, and `<a>` is the sum of the
/// mode responses (every character equals 1 on the empty subset).
pub fn fast_spectrum(
    params: &DeviceParams,
    state: &DiagonalState,
    grid: &FrequencyGrid,
) -> Result<Spectrum> {
    params.check_state(state)?;
    check_size(params)?;
    let shifts = params.shifts()?;
    let dim = state.dim();
    let kappa = params.kappa().value();
    let eps = drive_or_unit(params);

    // z(S) from p by one transform: z = H (p with each index complemented).
    let mask = dim - 1;
    let mut z: Vec<f64> = (0..dim).map(|k| state.probs()[k ^ mask]).collect();
    walsh_hadamard(&mut z);
    // and back to mode amplitudes c_m = 2^-N (H z)_m
    let mut amps = z;
    walsh_hadamard(&mut amps);
    let norm = 1.0 / dim as f64;

    // imaginary part of each eigenvalue without the detuning: sum_l Gamma_l (-1)^{m_l}
    let mut mode_shift = vec![0.0; dim];
    for (m, slot) in mode_shift.iter_mut().enumerate() {
        *slot = shifts
            .iter()
            .enumerate()
            .map(|(bit, g)| if (m >> bit) & 1 == 0 { *g } else { -*g })
            .sum();
    }
    let modes: Vec<(f64, f64)> = amps
        .iter()
        .zip(&mode_shift)
        .filter(|(c, _)| **c != 0.0)
        .map(|(c, shift)| (c * norm, *shift))
        .collect();

    let omega_f = params.cavity_freq().value();
    tabulate(grid, |omega_l| {
        let delta = omega_f - omega_l;
        let field: Complex64 = modes
            .iter()
            .map(|(c, shift)| {
                let lambda = Complex64::new(-0.5 * kappa, shift - delta);
                I * eps * c / lambda
            })
            .sum();
        Ok(transmission(field, kappa, eps))
    })
}
