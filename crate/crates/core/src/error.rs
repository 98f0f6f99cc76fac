use alloc::string::String;

use crate::spectra::ClosedFormKind;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the readout model, solvers and inference routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("qubit {qubit} is resonant with the cavity (zero detuning)")]
    ResonantQubit { qubit: usize },

    #[error("qubits {first} and {second} are degenerate (zero mutual detuning)")]
    DegenerateQubits { first: usize, second: usize },

    #[error(
        "qubit {qubit} needs either (transition frequency, coupling) or a direct dispersive shift"
    )]
    MissingShift { qubit: usize },

    #[error("qubit {qubit} specifies both (transition frequency, coupling) and a direct dispersive shift")]
    AmbiguousShift { qubit: usize },

    #[error("dispersive shift of qubit {qubit} has not been derived")]
    ShiftNotDerived { qubit: usize },

    #[error("{n} qubits exceeds the configured cap of {cap}")]
    TooManyQubits { n: usize, cap: usize },

    #[error("state has {found} qubits but the device has {expected}")]
    QubitCountMismatch { expected: usize, found: usize },

    #[error("{kind:?} closed form does not apply to {n} qubits")]
    WrongQubitCount { kind: ClosedFormKind, n: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("linear solve failed (relative residual {residual:e})")]
    SolverFailure { residual: f64 },

    #[error("no steady state at omega_L = {omega_l} rad/us within {time} us (last relative change {last_change:e})")]
    NotConverged {
        omega_l: f64,
        time: f64,
        last_change: f64,
    },

    #[error(
        "density operator left the physical set at t = {time} us: {reason}; reduce the time step"
    )]
    StepFailure { time: f64, reason: String },

    #[error("spectrum is empty")]
    EmptySpectrum,

    #[error("grid [{start}, {stop}] does not span predicted center {center} (rad/us)")]
    NonSpanningGrid { start: f64, stop: f64, center: f64 },

    #[error("grid step {step} rad/us does not resolve the linewidth kappa = {kappa} rad/us")]
    UnresolvedLinewidth { step: f64, kappa: f64 },
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
