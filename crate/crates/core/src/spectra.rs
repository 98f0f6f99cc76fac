//! Closed-form spectra: empty cavity, mean field, one qubit and two qubits.
//!
//! The one-qubit form is evaluated with the denominator
//! `(y^2 - Lambda)^2 + (kappa y)^2`, `y = omega_L - omega_f`,
//! `Lambda = Gamma^2 + kappa^2/4`. Expanding the two-Lorentzian mixture
//! `p0 L(y + Gamma) + p1 L(y - Gamma)` with `L(x) = 1/(x^2 + kappa^2/4)`:
//!
//! ```text
//! L(y+G) L(y-G) = 1 / [((y+G)^2 + k^2/4)((y-G)^2 + k^2/4)]
//!               = 1 / [(y^2 + Lambda)^2 - 4 y^2 G^2]
//!               = 1 / [(y^2 - Lambda)^2 + (kappa y)^2]
//! p0 ((y-G)^2 + k^2/4) + p1 ((y+G)^2 + k^2/4) = y^2 - 2 y G Z + Lambda,  Z = p1 - p0
//! ```
//!
//! which is the numerator used here. Writing the denominator with `Lambda^2`
//! in place of `Lambda` is not dimensionally consistent.

use crate::error::{Error, Result};
use crate::math::sq;
use crate::model::{
    expectation_z_unchecked, tabulate, DeviceParams, DiagonalState, FrequencyGrid, Spectrum,
};

/// Which closed form to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosedFormKind {
    EmptyCavity,
    MeanField,
    OneQubit,
    TwoQubit,
}

impl ClosedFormKind {
    /// Register size the form is restricted to, if any.
    pub fn required_qubits(self) -> Option<usize> {
        match self {
            Self::EmptyCavity => Some(0),
            Self::MeanField => None,
            Self::OneQubit => Some(1),
            Self::TwoQubit => Some(2),
        }
    }
}

fn require(kind: ClosedFormKind, params: &DeviceParams, state: &DiagonalState) -> Result<()> {
    params.check_state(state)?;
    match kind.required_qubits() {
        Some(n) if n != params.n_qubits() => Err(Error::WrongQubitCount {
            kind,
            n: params.n_qubits(),
        }),
        _ => Ok(()),
    }
}

/// Dispatches to the closed form named by `kind`.
pub fn closed_form(
    kind: ClosedFormKind,
    params: &DeviceParams,
    state: &DiagonalState,
    grid: &FrequencyGrid,
) -> Result<Spectrum> {
    match kind {
        ClosedFormKind::EmptyCavity => {
            require(kind, params, state)?;
            empty_cavity_spectrum(params, grid)
        }
        ClosedFormKind::MeanField => meanfield_spectrum(params, state, grid),
        ClosedFormKind::OneQubit => closed_form_n1(params, state, grid),
        ClosedFormKind::TwoQubit => closed_form_n2(params, state, grid),
    }
}

/// Bare cavity Lorentzian `1/((omega_L - omega_f)^2 + (kappa/2)^2)`.
pub fn empty_cavity_spectrum(params: &DeviceParams, grid: &FrequencyGrid) -> Result<Spectrum> {
    let omega_f = params.cavity_freq().value();
    let hw2 = 0.25 * sq(params.kappa().value());
    tabulate(grid, |w| Ok(1.0 / (sq(w - omega_f) + hw2)))
}

/// Mean-field shift `sum_j Gamma_j <sigma_j^z>`.
pub fn meanfield_shift(params: &DeviceParams, state: &DiagonalState) -> Result<f64> {
    params.check_state(state)?;
    let shifts = params.shifts()?;
    Ok(shifts
        .iter()
        .enumerate()
        .map(|(bit, g)| g * expectation_z_unchecked(state.probs(), 1 << bit))
        .sum())
}

/// Single Lorentzian centred at `omega_f - sum_j Gamma_j <sigma_j^z>`.
///
/// This is what factorizing `<sigma_j^z a> ~ <sigma_j^z><a>` predicts.
pub fn meanfield_spectrum(
    params: &DeviceParams,
    state: &DiagonalState,
    grid: &FrequencyGrid,
) -> Result<Spectrum> {
    let center = params.cavity_freq().value() - meanfield_shift(params, state)?;
    let hw2 = 0.25 * sq(params.kappa().value());
    tabulate(grid, |w| Ok(1.0 / (sq(w - center) + hw2)))
}

/// One-qubit closed form (see the module docs for the denominator).
pub fn closed_form_n1(
    params: &DeviceParams,
    state: &DiagonalState,
    grid: &FrequencyGrid,
) -> Result<Spectrum> {
    require(ClosedFormKind::OneQubit, params, state)?;
    let gamma = params.shifts()?[0];
    let kappa = params.kappa().value();
    let z1 = expectation_z_unchecked(state.probs(), 1);
    let lambda = gamma * gamma + 0.25 * kappa * kappa;
    let omega_f = params.cavity_freq().value();
    tabulate(grid, |w| {
        let y = w - omega_f;
        let num = y * y - 2.0 * y * gamma * z1 + lambda;
        let den = sq(y * y - lambda) + sq(kappa * y);
        Ok(num / den)
    })
}

/// Two-qubit closed form `S = -2 (A C + B D) / (kappa (A^2 + B^2))`.
pub fn closed_form_n2(
    params: &DeviceParams,
    state: &DiagonalState,
    grid: &FrequencyGrid,
) -> Result<Spectrum> {
    require(ClosedFormKind::TwoQubit, params, state)?;
    let shifts = params.shifts()?;
    let (g1, g2) = (shifts[0], shifts[1]);
    let kappa = params.kappa().value();
    let z = [
        expectation_z_unchecked(state.probs(), 0b01),
        expectation_z_unchecked(state.probs(), 0b10),
    ];
    let z12 = expectation_z_unchecked(state.probs(), 0b11);
    let sum_g2 = g1 * g1 + g2 * g2;
    let k2 = kappa * kappa;
    let omega_f = params.cavity_freq().value();
    tabulate(grid, |w| {
        let y = w - omega_f;
        let q = 0.25 * k2 - y * y;
        let a = sq(g1 * g1 - g2 * g2) + 2.0 * q * sum_g2 + q * q - k2 * y * y;
        let b = -2.0 * kappa * y * (sum_g2 + 0.25 * k2 - y * y);
        let c = kappa * z12 * g1 * g2 - kappa * y * (z[0] * g1 + z[1] * g2)
            + 0.5 * kappa * (3.0 * y * y - 0.25 * k2 - sum_g2);
        // j' is the other qubit of the pair
        let d = -2.0 * z12 * y * g1 * g2
            - (z[0] * g1 * (g1 * g1 - g2 * g2 + q) + z[1] * g2 * (g2 * g2 - g1 * g1 + q))
            + y * (sum_g2 + 0.75 * k2 - y * y);
        Ok(-2.0 * (a * c + b * d) / (kappa * (a * a + b * b)))
    })
}
