//! Steady-state transmission spectra of a driven lossy cavity dispersively
//! coupled to N qubits, and the inverse problem of reading the qubits'
//! basis-state probabilities back out of a spectrum.
//!
//! * [`chain`] solves the closed qubit-cavity correlation chain exactly for any N.
//! * [`spectra`] holds the closed forms (empty cavity, mean field, N = 1, N = 2).
//! * [`lindblad`] integrates the full master equation in a truncated Fock space
//!   as a brute-force check.
//! * [`decay`] applies qubit T1 relaxation to the measured populations.
//! * [`infer`] locates peaks and unmixes a spectrum into basis-state weights.
//!
//! Frequencies are angular, in rad/us; see [`model`] for the conventions.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod chain;
pub mod decay;
pub mod error;
pub mod infer;
pub mod linalg;
pub mod lindblad;
mod math;
pub mod model;
pub mod presets;
pub mod spectra;

pub use error::{Error, Result};
pub use model::{
    AngularFrequency, DeviceParams, DiagonalState, FrequencyGrid, QubitParams, Spectrum,
};
