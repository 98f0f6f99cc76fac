//! Reference device parameter sets.

use alloc::vec;

use crate::model::{derive_dispersive_shifts, AngularFrequency, DeviceParams, QubitParams};

/// Names accepted by [`by_name`].
pub const NAMES: [&str; 2] = ["n1-2010", "n2-2010"];

/// Single qubit: `(omega_f, omega_q, kappa, g) = 2pi x (6444.2, 4009, 1.69, 134)` MHz.
pub fn n1_2010() -> DeviceParams {
    let raw = DeviceParams::new(
        AngularFrequency::from_mhz(6444.2),
        AngularFrequency::from_mhz(1.69),
        vec![QubitParams::from_coupling(
            AngularFrequency::from_mhz(4009.0),
            AngularFrequency::from_mhz(134.0),
        )],
    )
    .expect("preset is valid");
    derive_dispersive_shifts(&raw).expect("preset is dispersive")
}

/// Two qubits: `(omega_f, Gamma_1, Gamma_2, kappa) = 2pi x (6.806, 0.013, 0.004, 0.001)` GHz.
pub fn n2_2010() -> DeviceParams {
    DeviceParams::new(
        AngularFrequency::from_ghz(6.806),
        AngularFrequency::from_ghz(0.001),
        vec![
            QubitParams::from_shift(AngularFrequency::from_mhz(13.0)),
            QubitParams::from_shift(AngularFrequency::from_mhz(4.0)),
        ],
    )
    .expect("preset is valid")
}

pub fn by_name(name: &str) -> Option<DeviceParams> {
    match name {
        "n1-2010" => Some(n1_2010()),
        "n2-2010" => Some(n2_2010()),
        _ => None,
    }
}
