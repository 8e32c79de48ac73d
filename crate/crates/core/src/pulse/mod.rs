//! Pulse rendering, generator compilation and the single-qubit Clifford group.
//!
//! A gate is a train of square voltage pulses convolved with a normalised
//! Gaussian and sampled on the `Δt = 1/f_s` grid. Sample `k` holds the value of
//! the smoothed waveform at the cell midpoint `(k + ½)Δt` and is applied over
//! `[kΔt, (k+1)Δt)`.

mod cache;
mod clifford;
mod compile;
mod simplex;

pub use cache::{GateCache, GateRecord};
pub use clifford::{phase_equivalent, CliffordElement, CliffordGroup};
pub use compile::{compile_all, compile_generator, CompileOptions, CompiledGate, GateSet};
pub use simplex::{nelder_mead, SimplexOptions, SimplexResult};

use std::f64::consts::{FRAC_PI_2, SQRT_2};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubit::{ControlTimeline, Unitary2};

/// Peak-duration band of a single pulse, ns.
pub const WIDTH_RANGE_NS: (f64, f64) = (30.0, 50.0);
/// Amplitude band, mV.
pub const AMPLITUDE_RANGE_MV: (f64, f64) = (70.0, 120.0);
/// 10-90 % rise time of a Gaussian-smoothed step in units of σ (`2 Φ⁻¹(0.9)`).
pub const RISE_PER_SIGMA: f64 = 2.563_103_131_303_78;
/// Allowed 10-90 % rise/decay times, ns.
pub const RISE_RANGE_NS: (f64, f64) = (4.0, 6.0);
/// Minimum distance, in σ, between a pulse edge and the window boundary.
pub const EDGE_MARGIN_SIGMAS: f64 = 3.0;

/// One square pulse before smoothing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub start_ns: f64,
    pub width_ns: f64,
    pub amplitude_mv: f64,
}

impl Pulse {
    pub fn end_ns(&self) -> f64 {
        self.start_ns + self.width_ns
    }
}

/// Shape of a gate: 1-5 pulses on a fixed window, one shared smoothing width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseShapeParams {
    pub pulses: Vec<Pulse>,
    /// Standard deviation of the Gaussian kernel, ns. Zero renders square pulses.
    pub sigma_ns: f64,
    pub total_ns: f64,
}

impl PulseShapeParams {
    /// Free time between consecutive pulses, ns.
    pub fn gaps_ns(&self) -> Vec<f64> {
        self.pulses
            .windows(2)
            .map(|w| w[1].start_ns - w[0].end_ns())
            .collect()
    }

    pub fn rise_time_ns(&self) -> f64 {
        RISE_PER_SIGMA * self.sigma_ns
    }

    /// Smoothing widths whose rise time lies in [`RISE_RANGE_NS`].
    pub fn sigma_range_ns() -> (f64, f64) {
        (
            RISE_RANGE_NS.0 / RISE_PER_SIGMA,
            RISE_RANGE_NS.1 / RISE_PER_SIGMA,
        )
    }

    /// Checks the hardware-motivated shape constraints used by the compiler.
    pub fn check_invariants(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidPulse(msg));
        if self.pulses.is_empty() || self.pulses.len() > 5 {
            return bad(format!("{} pulses, expected 1-5", self.pulses.len()));
        }
        let (slo, shi) = Self::sigma_range_ns();
        if !(self.sigma_ns >= slo - 1e-12 && self.sigma_ns <= shi + 1e-12) {
            return bad(format!(
                "rise time {:.3} ns outside {:?} ns",
                self.rise_time_ns(),
                RISE_RANGE_NS
            ));
        }
        let margin = EDGE_MARGIN_SIGMAS * self.sigma_ns;
        let mut cursor = margin;
        for (i, p) in self.pulses.iter().enumerate() {
            if !(WIDTH_RANGE_NS.0..=WIDTH_RANGE_NS.1).contains(&p.width_ns) {
                return bad(format!(
                    "pulse {i}: width {} ns outside {:?}",
                    p.width_ns, WIDTH_RANGE_NS
                ));
            }
            if !(AMPLITUDE_RANGE_MV.0..=AMPLITUDE_RANGE_MV.1).contains(&p.amplitude_mv) {
                return bad(format!(
                    "pulse {i}: amplitude {} mV outside {:?}",
                    p.amplitude_mv, AMPLITUDE_RANGE_MV
                ));
            }
            if p.start_ns < cursor - 1e-9 {
                return bad(format!(
                    "pulse {i} overlaps its predecessor or the window edge"
                ));
            }
            cursor = p.end_ns();
        }
        if cursor > self.total_ns - margin + 1e-9 {
            return bad("last pulse runs into the window edge".into());
        }
        Ok(())
    }

    /// Number of samples of the window at `fs`; rejects windows that are not
    /// a whole number of samples.
    pub fn sample_count(&self, fs: f64) -> Result<usize> {
        let n = self.total_ns * 1e-9 * fs;
        let rounded = n.round();
        if !(n >= 0.0 && n.is_finite()) || (n - rounded).abs() > 1e-9 * rounded.max(1.0) {
            return Err(Error::InvalidPulse(format!(
                "duration {} ns is not a whole number of samples at {fs} Hz",
                self.total_ns
            )));
        }
        Ok(rounded as usize)
    }
}

/// Samples the smoothed pulse train at the cell midpoints of the `1/fs` grid.
///
/// Each pulse contributes `A [Φ((t-a)/σ) - Φ((t-b)/σ)]`, the exact convolution
/// of the box `[a, b)` with the Gaussian kernel.
pub fn render_pulse(params: &PulseShapeParams, fs: f64) -> Result<ControlTimeline> {
    let n = params.sample_count(fs)?;
    if !(params.sigma_ns >= 0.0 && params.sigma_ns.is_finite()) {
        return Err(Error::InvalidPulse(format!(
            "smoothing width {} ns",
            params.sigma_ns
        )));
    }
    let dt_ns = 1e9 / fs;
    let mut samples = vec![0.0; n];
    render_into(&params.pulses, params.sigma_ns, dt_ns, &mut samples);
    Ok(ControlTimeline::new(samples, fs, "pulse"))
}

pub(crate) fn render_into(pulses: &[Pulse], sigma_ns: f64, dt_ns: f64, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for p in pulses {
        let (a, b) = (p.start_ns, p.end_ns());
        for (k, v) in out.iter_mut().enumerate() {
            let t = (k as f64 + 0.5) * dt_ns;
            *v += p.amplitude_mv * box_response(t, a, b, sigma_ns);
        }
    }
}

/// `Φ((t-a)/σ) - Φ((t-b)/σ)`, with the square box for `σ = 0`.
fn box_response(t: f64, a: f64, b: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return if t >= a && t < b { 1.0 } else { 0.0 };
    }
    let s = SQRT_2 * sigma;
    // 0.5 erfc(-x/√2) = Φ(x); erfc keeps the tails accurate on both sides.
    0.5 * (libm::erfc((a - t) / s) - libm::erfc((b - t) / s))
}

/// `|Tr(U_target† U)|² / 4`.
pub fn gate_fidelity(target: &Unitary2, actual: &Unitary2) -> f64 {
    ((target.adjoint() * *actual).trace().norm_sqr() / 4.0).min(1.0)
}

/// `1 - gate_fidelity`, evaluated from the off-identity part of `U_target† U`
/// so that values far below machine epsilon stay meaningful.
pub fn gate_infidelity(target: &Unitary2, actual: &Unitary2) -> f64 {
    let m = target.adjoint() * *actual;
    let off = m.entry(0, 1).norm_sqr() + m.entry(1, 0).norm_sqr();
    let diag = (m.entry(0, 0) - m.entry(1, 1)).norm_sqr();
    0.5 * off + 0.25 * diag
}

/// The native gate set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Generator {
    #[serde(rename = "I")]
    Identity,
    #[serde(rename = "X+")]
    XPlus,
    #[serde(rename = "X-")]
    XMinus,
    #[serde(rename = "Z+")]
    ZPlus,
    #[serde(rename = "Z-")]
    ZMinus,
}

impl Generator {
    pub const ALL: [Generator; 5] = [
        Generator::Identity,
        Generator::XPlus,
        Generator::XMinus,
        Generator::ZPlus,
        Generator::ZMinus,
    ];
    /// The four non-trivial generators in word order.
    pub const ROTATIONS: [Generator; 4] = [
        Generator::XPlus,
        Generator::XMinus,
        Generator::ZPlus,
        Generator::ZMinus,
    ];

    pub fn target(self) -> Unitary2 {
        match self {
            Generator::Identity => Unitary2::IDENTITY,
            Generator::XPlus => Unitary2::rx(FRAC_PI_2),
            Generator::XMinus => Unitary2::rx(-FRAC_PI_2),
            Generator::ZPlus => Unitary2::rz(FRAC_PI_2),
            Generator::ZMinus => Unitary2::rz(-FRAC_PI_2),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Generator::Identity => "I",
            Generator::XPlus => "X+",
            Generator::XMinus => "X-",
            Generator::ZPlus => "Z+",
            Generator::ZMinus => "Z-",
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Generator::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown generator {s:?}")))
    }
}

/// Gate set compiled once per test binary.
#[cfg(test)]
pub(crate) fn test_gates() -> &'static GateSet {
    static GATES: std::sync::OnceLock<GateSet> = std::sync::OnceLock::new();
    GATES.get_or_init(|| {
        compile_all(
            &crate::qubit::QubitParams::default(),
            &CompileOptions::default(),
        )
        .unwrap()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_pulse(a: f64, w: f64, amp: f64, sigma: f64, total: f64) -> PulseShapeParams {
        PulseShapeParams {
            pulses: vec![Pulse {
                start_ns: a,
                width_ns: w,
                amplitude_mv: amp,
            }],
            sigma_ns: sigma,
            total_ns: total,
        }
    }

    #[test]
    fn zero_amplitude_is_flat() {
        let t = render_pulse(&one_pulse(10.0, 30.0, 0.0, 2.0, 60.0), 1e9).unwrap();
        assert_eq!(t.len(), 60);
        assert!(t.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn square_limit_is_exact() {
        let t = render_pulse(&one_pulse(10.0, 30.0, 100.0, 0.0, 60.0), 1e9).unwrap();
        for (k, &v) in t.samples().iter().enumerate() {
            let expected = if (10..40).contains(&k) { 100.0 } else { 0.0 };
            assert_eq!(v, expected, "k={k}");
        }
        // tiny σ converges to the same samples
        let t2 = render_pulse(&one_pulse(10.0, 30.0, 100.0, 1e-3, 60.0), 1e9).unwrap();
        assert_eq!(t.samples(), t2.samples());
    }

    #[test]
    fn area_is_preserved() {
        let t = render_pulse(&one_pulse(20.0, 37.3, 95.0, 2.0, 80.0), 1e9).unwrap();
        let area: f64 = t.samples().iter().sum();
        assert!((area / (95.0 * 37.3) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rise_time_matches_gaussian_quantiles() {
        // 100 mV, 30 ns, σ = 2 ns, sampled finely
        let fs = 1e12;
        let t = render_pulse(&one_pulse(20.0, 30.0, 100.0, 2.0, 70.0), fs).unwrap();
        let s = t.samples();
        let first = |level: f64| s.iter().position(|&v| v >= level).unwrap() as f64 * 1e9 / fs;
        let rise = first(90.0) - first(10.0);
        assert!((rise - 2.563 * 2.0).abs() < 0.01, "rise = {rise}");
    }

    #[test]
    fn misaligned_duration_rejected() {
        assert!(matches!(
            render_pulse(&one_pulse(10.0, 30.0, 90.0, 2.0, 60.5), 1e9),
            Err(Error::InvalidPulse(_))
        ));
        assert!(render_pulse(&one_pulse(10.0, 30.0, 90.0, 2.0, 60.5), 2e9).is_ok());
    }

    #[test]
    fn invariants_enforced() {
        let sigma = 2.0;
        assert!(one_pulse(6.0, 40.0, 100.0, sigma, 60.0)
            .check_invariants()
            .is_ok());
        assert!(one_pulse(6.0, 25.0, 100.0, sigma, 60.0)
            .check_invariants()
            .is_err());
        assert!(one_pulse(6.0, 40.0, 130.0, sigma, 60.0)
            .check_invariants()
            .is_err());
        assert!(one_pulse(6.0, 40.0, 100.0, 1.0, 60.0)
            .check_invariants()
            .is_err());
        assert!(one_pulse(5.0, 40.0, 100.0, sigma, 60.0)
            .check_invariants()
            .is_err());
        assert!(one_pulse(6.0, 40.0, 100.0, sigma, 50.0)
            .check_invariants()
            .is_err());
    }

    #[test]
    fn fidelity_reference_values() {
        let u = Unitary2::rotation([0.1, 0.7, -0.2], 1.3);
        assert!((gate_fidelity(&u, &u) - 1.0).abs() < 1e-15);
        let zp = Unitary2::rz(std::f64::consts::PI);
        let xp = Unitary2::rx(std::f64::consts::PI);
        assert!(gate_fidelity(&zp, &xp) < 1e-30);
        for theta in [0.0, 0.4, 1.9, 3.0] {
            let f = gate_fidelity(&Unitary2::IDENTITY, &Unitary2::rz(theta));
            assert!((f - (theta / 2.0).cos().powi(2)).abs() < 1e-15);
            let r = gate_infidelity(&Unitary2::IDENTITY, &Unitary2::rz(theta));
            assert!((r - (theta / 2.0).sin().powi(2)).abs() < 1e-15);
        }
        // the accurate form resolves errors far below epsilon
        let r = gate_infidelity(&Unitary2::IDENTITY, &Unitary2::rz(2e-10));
        assert!((r / 1e-20 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn generator_names_round_trip() {
        for g in Generator::ALL {
            assert_eq!(g.as_str().parse::<Generator>().unwrap(), g);
        }
        assert!("Y+".parse::<Generator>().is_err());
    }
}
