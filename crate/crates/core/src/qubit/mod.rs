//! Singlet-triplet qubit dynamics.
//!
//! `H(t) = (J(t) σz + Δb_z(t) σx) / 2` with `J = J0 exp(V / I)`. Frequencies are
//! given in true frequency (`J/h`, `Δb_z/h`); the `2π` enters only inside the
//! step unitary.

mod propagate;
mod timeline;
mod unitary;

pub(crate) use propagate::propagate_samples;
pub use propagate::{propagate, propagate_held, propagate_static, propagate_views};
pub use timeline::{ControlTimeline, Segment};
pub use unitary::Unitary2;

pub(crate) use unitary::Su2;

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Device parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitParams {
    /// Residual exchange `J0/h` in MHz.
    pub j0_mhz: f64,
    /// Insensitivity `I` in mV.
    pub insensitivity_mv: f64,
    /// Static gradient `Δb_z/h` in MHz.
    pub dbz_mhz: f64,
    /// Control and noise sampling rate in Hz.
    pub sample_rate_hz: f64,
}

impl Default for QubitParams {
    fn default() -> Self {
        Self {
            j0_mhz: 0.075,
            insensitivity_mv: 18.0,
            dbz_mhz: 10.0,
            sample_rate_hz: 1e9,
        }
    }
}

impl QubitParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("j0_mhz", self.j0_mhz),
            ("insensitivity_mv", self.insensitivity_mv),
            ("dbz_mhz", self.dbz_mhz),
            ("sample_rate_hz", self.sample_rate_hz),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be > 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    /// Voltage in mV that drives the exchange to `j_mhz`.
    pub fn voltage_for_exchange(&self, j_mhz: f64) -> f64 {
        self.insensitivity_mv * (j_mhz / self.j0_mhz).ln()
    }
}

/// `J/h = J0/h · e^{V/I}` in MHz, for `V` in mV.
pub fn exchange_from_voltage(v_mv: f64, params: &QubitParams) -> f64 {
    params.j0_mhz * (v_mv / params.insensitivity_mv).exp()
}

/// `exp(-i 2π dt (J σz + Δb σx) / 2)`, with `J` and `Δb` in MHz and `dt` in s.
///
/// A rotation by `2π dt √(J² + Δb²)` about the axis `∝ (Δb, 0, J)`.
pub fn step_unitary(j_mhz: f64, dbz_mhz: f64, dt: f64) -> Unitary2 {
    let (a, x, z) = step_coefficients(j_mhz * 1e6, dbz_mhz * 1e6, PI * dt);
    Su2 { a, x, y: 0.0, z }.to_unitary()
}

/// `(cos, n_x sin, n_z sin)` of the half angle; `half_angle_per_hz = π dt`.
#[inline(always)]
pub(crate) fn step_coefficients(j_hz: f64, b_hz: f64, half_angle_per_hz: f64) -> (f64, f64, f64) {
    let omega = (j_hz * j_hz + b_hz * b_hz).sqrt();
    if omega == 0.0 {
        return (1.0, 0.0, 0.0);
    }
    let (s, c) = (half_angle_per_hz * omega).sin_cos();
    let r = s / omega;
    (c, r * b_hz, r * j_hz)
}

/// Single-qubit pure states used for preparation and readout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisState {
    Zero,
    One,
    Plus,
    Minus,
}

impl BasisState {
    pub fn amplitudes(self) -> [Complex64; 2] {
        let h = FRAC_1_SQRT_2;
        match self {
            BasisState::Zero => [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            BasisState::One => [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
            BasisState::Plus => [Complex64::new(h, 0.0), Complex64::new(h, 0.0)],
            BasisState::Minus => [Complex64::new(h, 0.0), Complex64::new(-h, 0.0)],
        }
    }
}

/// `|⟨target|U|prepared⟩|²`.
pub fn survival_probability(u: &Unitary2, prepared: BasisState, target: BasisState) -> f64 {
    u.transition_probability(prepared.amplitudes(), target.amplitudes())
}
