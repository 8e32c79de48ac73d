//! Wall-clock randomized benchmarking.
//!
//! A fixed set of circuits is drawn once and executed pass after pass against
//! one persistent noise trajectory. Every circuit is preceded and followed by
//! a noiseless SPAM window that the noise is fast-forwarded through.

mod execute;
mod fit;
mod synthetic;

pub use execute::{
    run_experiment, run_pass, run_seed, run_seed_views, PassResult, RbRun, RunOptions,
};
pub use fit::{fit_rb, RbFit};
pub use synthetic::simulate_depolarizing;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pulse::{CliffordGroup, GateSet};
use crate::qubit::ControlTimeline;
use crate::seeds;

/// Depths, repetitions and timing of an RB campaign.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbSchedule {
    pub depths: Vec<usize>,
    pub circuits_per_depth: usize,
    pub passes: usize,
    /// State-preparation window before each circuit, μs.
    pub spam_prep_us: f64,
    /// Measurement window after each circuit, μs.
    pub spam_meas_us: f64,
    /// Idle after each pass, μs.
    pub inter_pass_idle_us: f64,
}

impl Default for RbSchedule {
    fn default() -> Self {
        Self {
            depths: (1..=9).map(|k| 1 << k).collect(),
            circuits_per_depth: 10,
            passes: 100,
            spam_prep_us: 50.0,
            spam_meas_us: 50.0,
            inter_pass_idle_us: 0.0,
        }
    }
}

impl RbSchedule {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSchedule(m));
        if self.depths.is_empty() {
            return bad("no depths".into());
        }
        if self.depths.iter().any(|&d| d < 2 || !d.is_power_of_two()) {
            return bad(format!(
                "depths must be powers of two >= 2, got {:?}",
                self.depths
            ));
        }
        if self.depths.windows(2).any(|w| w[1] <= w[0]) {
            return bad("depths must be strictly increasing".into());
        }
        if self.circuits_per_depth == 0 || self.passes == 0 {
            return bad("need at least one circuit per depth and one pass".into());
        }
        for (name, v) in [
            ("spam_prep_us", self.spam_prep_us),
            ("spam_meas_us", self.spam_meas_us),
            ("inter_pass_idle_us", self.inter_pass_idle_us),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        Ok(())
    }

    pub fn circuit_count(&self) -> usize {
        self.depths.len() * self.circuits_per_depth
    }

    /// Converts a window to whole samples, rejecting misaligned windows.
    pub fn window_samples(us: f64, fs: f64) -> Result<u64> {
        let n = us * 1e-6 * fs;
        let r = n.round();
        if (n - r).abs() > 1e-6 {
            return Err(Error::InvalidSchedule(format!(
                "{us} us is not a whole number of samples at {fs} Hz"
            )));
        }
        Ok(r as u64)
    }
}

/// One RB sequence and its waveform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbCircuit {
    /// `L{depth}-{index}`.
    pub id: String,
    pub depth: usize,
    pub index: usize,
    /// `depth` group elements in time order; the last inverts the others.
    pub cliffords: Vec<usize>,
    pub timeline: ControlTimeline,
}

impl RbCircuit {
    pub fn duration_s(&self) -> f64 {
        self.timeline.duration_s()
    }
}

/// Draws the circuit set, ordered by depth then index.
///
/// Circuit `(L, i)` takes its `L - 1` uniform elements from a stream keyed by
/// `(circuit_seed, L, i)`, so the set for a depth does not depend on which
/// other depths are scheduled.
pub fn sample_circuits(
    schedule: &RbSchedule,
    group: &CliffordGroup,
    gates: &GateSet,
    circuit_seed: u64,
) -> Result<Vec<RbCircuit>> {
    schedule.validate()?;
    let mut out = Vec::with_capacity(schedule.circuit_count());
    for &depth in &schedule.depths {
        for index in 0..schedule.circuits_per_depth {
            let mut rng = seeds::derive_rng(
                circuit_seed,
                &["circuit", &depth.to_string(), &index.to_string()],
            );
            let mut cliffords: Vec<usize> = (0..depth - 1)
                .map(|_| rng.random_range(0..group.len()))
                .collect();
            cliffords.push(group.inverse(group.compose(&cliffords)));
            let mut timeline = gates.word_timeline(&group.word_of(&cliffords));
            let id = format!("L{depth}-{index}");
            timeline = ControlTimeline::new(
                timeline.samples().to_vec(),
                timeline.sample_rate_hz(),
                id.clone(),
            );
            out.push(RbCircuit {
                id,
                depth,
                index,
                cliffords,
                timeline,
            });
        }
    }
    Ok(out)
}

/// Per-depth means of per-circuit values listed in schedule order.
pub fn depth_means(depths: &[usize], circuits: &[RbCircuit], values: &[f64]) -> Vec<f64> {
    depths
        .iter()
        .map(|&d| {
            let (sum, n) = circuits
                .iter()
                .zip(values)
                .filter(|(c, _)| c.depth == d)
                .fold((0.0, 0usize), |(s, n), (_, v)| (s + v, n + 1));
            sum / n as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulse::test_gates;

    #[test]
    fn default_schedule_is_valid() {
        let s = RbSchedule::default();
        s.validate().unwrap();
        assert_eq!(s.depths, vec![2, 4, 8, 16, 32, 64, 128, 256, 512]);
        assert_eq!(s.circuit_count(), 90);
        assert!(RbSchedule {
            depths: vec![2, 3],
            ..s.clone()
        }
        .validate()
        .is_err());
        assert!(RbSchedule {
            depths: vec![4, 2],
            ..s.clone()
        }
        .validate()
        .is_err());
        assert!(RbSchedule {
            spam_prep_us: -1.0,
            ..s
        }
        .validate()
        .is_err());
    }

    #[test]
    fn windows_must_be_sample_aligned() {
        assert_eq!(RbSchedule::window_samples(50.0, 1e9).unwrap(), 50_000);
        assert!(RbSchedule::window_samples(0.0005, 1e9).is_err());
    }

    #[test]
    fn circuits_invert_symbolically() {
        let group = CliffordGroup::build().unwrap();
        let gates = test_gates();
        let s = RbSchedule {
            depths: vec![2, 8, 32],
            circuits_per_depth: 5,
            ..Default::default()
        };
        let cs = sample_circuits(&s, &group, gates, 7).unwrap();
        assert_eq!(cs.len(), 15);
        for c in &cs {
            assert_eq!(c.cliffords.len(), c.depth);
            assert_eq!(group.compose(&c.cliffords), 0);
        }
        let again = sample_circuits(&s, &group, gates, 7).unwrap();
        assert_eq!(cs, again);
        let other = sample_circuits(&s, &group, gates, 8).unwrap();
        assert_ne!(cs, other);
    }
}
