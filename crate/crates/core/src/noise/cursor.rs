use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::io::Write;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Axis, NoiseModel};
use crate::error::{Error, Result};
use crate::seeds;

/// Per-axis noise at one instant: `δV` in volts and `δb_z/h` in hertz.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NoiseSample {
    pub delta_v: f64,
    pub delta_bz: f64,
}

/// Which components contribute to the emitted per-axis sums.
///
/// Masking only affects what is summed; every component keeps evolving.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentMask {
    active: Vec<bool>,
    charge: Vec<usize>,
    magnetic: Vec<usize>,
}

impl ComponentMask {
    fn from_active(model: &NoiseModel, active: Vec<bool>) -> Self {
        let mut charge = Vec::new();
        let mut magnetic = Vec::new();
        for (i, c) in model.components().iter().enumerate() {
            if active[i] {
                match c.axis {
                    Axis::Charge => charge.push(i),
                    Axis::Magnetic => magnetic.push(i),
                }
            }
        }
        Self {
            active,
            charge,
            magnetic,
        }
    }

    pub fn all(model: &NoiseModel) -> Self {
        Self::from_active(model, vec![true; model.len()])
    }

    pub fn none(model: &NoiseModel) -> Self {
        Self::from_active(model, vec![false; model.len()])
    }

    pub fn axis(model: &NoiseModel, axis: Axis) -> Self {
        let active = model.components().iter().map(|c| c.axis == axis).collect();
        Self::from_active(model, active)
    }

    /// Mask selecting exactly the labelled components; unknown labels are rejected.
    pub fn from_labels<'a, I>(model: &NoiseModel, labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let wanted: BTreeSet<&str> = labels.into_iter().collect();
        for label in &wanted {
            if model.index_of(label).is_none() {
                return Err(Error::InvalidModel(format!(
                    "model {} has no component {label}",
                    model.id
                )));
            }
        }
        let active = model
            .components()
            .iter()
            .map(|c| wanted.contains(c.label.as_str()))
            .collect();
        Ok(Self::from_active(model, active))
    }

    pub fn is_active(&self, index: usize) -> bool {
        self.active[index]
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.charge.is_empty() && self.magnetic.is_empty()
    }

    /// Per-axis sums of the active entries of `values`.
    #[inline]
    pub fn sample(&self, values: &[f64]) -> NoiseSample {
        let mut s = NoiseSample::default();
        for &i in &self.charge {
            s.delta_v += values[i];
        }
        for &i in &self.magnetic {
            s.delta_bz += values[i];
        }
        s
    }
}

/// The evolving state of one noise trajectory.
///
/// Each component owns an independent ChaCha8 stream keyed by
/// `("noise", model id, seed index, component label)`, so any two cursors built
/// for the same `(model, seed)` see identical per-component realisations
/// whatever masks they use.
#[derive(Clone, Debug)]
pub struct TrajectoryCursor {
    model_id: String,
    seed_index: u64,
    time: f64,
    time_carry: f64,
    values: Vec<f64>,
    rngs: Vec<ChaCha8Rng>,
    half_power: Vec<f64>,
    rate: Vec<f64>,
    mask: ComponentMask,
    cached_dt: f64,
    decay: Vec<f64>,
    kick: Vec<f64>,
}

impl TrajectoryCursor {
    /// Starts a trajectory at `t = 0` with components drawn from the
    /// stationary distribution `N(0, p_i / 2)`.
    pub fn new(model: &NoiseModel, master_seed: u64, seed_index: u64) -> Self {
        let seed_str = seed_index.to_string();
        let mut rngs: Vec<ChaCha8Rng> = model
            .components()
            .iter()
            .map(|c| seeds::derive_rng(master_seed, &["noise", &model.id, &seed_str, &c.label]))
            .collect();
        let half_power: Vec<f64> = model.components().iter().map(|c| 0.5 * c.power).collect();
        let rate = model
            .components()
            .iter()
            .map(|c| 2.0 * PI * c.frequency)
            .collect();
        let values = half_power
            .iter()
            .zip(rngs.iter_mut())
            .map(|(hp, rng)| {
                let g: f64 = StandardNormal.sample(rng);
                hp.sqrt() * g
            })
            .collect();
        let n = model.len();
        Self {
            model_id: model.id.clone(),
            seed_index,
            time: 0.0,
            time_carry: 0.0,
            values,
            rngs,
            half_power,
            rate,
            mask: ComponentMask::all(model),
            cached_dt: f64::NAN,
            decay: vec![0.0; n],
            kick: vec![0.0; n],
        }
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn seed_index(&self) -> u64 {
        self.seed_index
    }

    /// Current wall-clock time in seconds.
    pub fn time(&self) -> f64 {
        self.time + self.time_carry
    }

    /// Current per-component values (charge in V, magnetic in Hz).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &ComponentMask {
        &self.mask
    }

    pub fn set_mask(&mut self, mask: ComponentMask) -> Result<()> {
        if mask.len() != self.values.len() {
            return Err(Error::InvalidModel(format!(
                "mask covers {} components, cursor has {}",
                mask.len(),
                self.values.len()
            )));
        }
        self.mask = mask;
        Ok(())
    }

    /// Masked per-axis sums at the current time.
    #[inline]
    pub fn current(&self) -> NoiseSample {
        self.mask.sample(&self.values)
    }

    /// Advances every component by `dt` with the exact OU transition
    /// `η ← η e^{-2πf dt} + g sqrt((p/2)(1 - e^{-4πf dt}))` and returns the
    /// masked sums at the new time.
    #[inline]
    pub fn advance(&mut self, dt: f64) -> Result<NoiseSample> {
        self.step(dt)?;
        Ok(self.current())
    }

    /// Same transition as [`advance`](Self::advance) over a whole window, in
    /// O(#components) regardless of its length.
    pub fn fast_forward(&mut self, window: f64) -> Result<()> {
        self.step(window)
    }

    #[inline]
    fn step(&mut self, dt: f64) -> Result<()> {
        if !(dt >= 0.0 && dt.is_finite()) {
            return Err(Error::InvalidSchedule(format!(
                "time step must be finite and >= 0, got {dt}"
            )));
        }
        if dt == 0.0 {
            return Ok(());
        }
        if dt != self.cached_dt {
            self.prepare(dt);
        }
        for i in 0..self.values.len() {
            let g: f64 = StandardNormal.sample(&mut self.rngs[i]);
            self.values[i] = self.values[i] * self.decay[i] + self.kick[i] * g;
        }
        self.add_time(dt);
        Ok(())
    }

    fn prepare(&mut self, dt: f64) {
        for i in 0..self.values.len() {
            let x = self.rate[i] * dt;
            self.decay[i] = (-x).exp();
            self.kick[i] = (self.half_power[i] * -(-2.0 * x).exp_m1()).sqrt();
        }
        self.cached_dt = dt;
    }

    // Neumaier compensated summation keeps long schedules exact to an ulp.
    fn add_time(&mut self, dt: f64) {
        let t = self.time + dt;
        if self.time.abs() >= dt.abs() {
            self.time_carry += (self.time - t) + dt;
        } else {
            self.time_carry += (dt - t) + self.time;
        }
        self.time = t;
    }

    /// Records `n` samples spaced by `dt`, starting with the current value.
    pub fn record_trace(&mut self, dt: f64, n: usize) -> Result<Trace> {
        let mut trace = Trace::default();
        for k in 0..n {
            if k > 0 {
                self.step(dt)?;
            }
            let s = self.current();
            trace.time_s.push(self.time());
            trace.delta_v.push(s.delta_v);
            trace.delta_bz.push(s.delta_bz);
        }
        Ok(trace)
    }
}

/// A sampled noise trace.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub time_s: Vec<f64>,
    /// Volts.
    pub delta_v: Vec<f64>,
    /// Hertz.
    pub delta_bz: Vec<f64>,
}

impl Trace {
    /// Writes `time_s,value` rows for one axis.
    pub fn write_csv<W: Write>(&self, axis: Axis, mut w: W) -> Result<()> {
        writeln!(w, "time_s,value")?;
        let values = match axis {
            Axis::Charge => &self.delta_v,
            Axis::Magnetic => &self.delta_bz,
        };
        for (t, v) in self.time_s.iter().zip(values) {
            writeln!(w, "{t},{v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::OuComponent;

    fn single(p: f64, f: f64) -> NoiseModel {
        NoiseModel::new(
            "single",
            vec![OuComponent::new(Axis::Charge, p, f, "c").unwrap()],
        )
        .unwrap()
    }

    fn two_axis() -> NoiseModel {
        NoiseModel::empty("two")
            .with_ladder(Axis::Charge, 1e-3, 1e3, 1.0)
            .unwrap()
            .with_ladder(Axis::Magnetic, 1.0, 1e2, 4.0)
            .unwrap()
    }

    #[test]
    fn zero_step_leaves_state_untouched() {
        let m = two_axis();
        let mut c = TrajectoryCursor::new(&m, 1, 0);
        let before = c.values().to_vec();
        let s0 = c.current();
        assert_eq!(c.advance(0.0).unwrap(), s0);
        c.fast_forward(0.0).unwrap();
        assert_eq!(c.values(), &before[..]);
        assert_eq!(c.time(), 0.0);
        // no randomness consumed either
        let mut d = TrajectoryCursor::new(&m, 1, 0);
        c.advance(1e-9).unwrap();
        d.advance(1e-9).unwrap();
        assert_eq!(c.values(), d.values());
    }

    #[test]
    fn negative_or_nan_steps_rejected() {
        let mut c = TrajectoryCursor::new(&single(1.0, 1.0), 1, 0);
        assert!(matches!(c.advance(-1e-9), Err(Error::InvalidSchedule(_))));
        assert!(c.fast_forward(f64::NAN).is_err());
    }

    #[test]
    fn sums_follow_the_mask() {
        let m = two_axis();
        let mut c = TrajectoryCursor::new(&m, 5, 3);
        c.advance(1e-6).unwrap();
        let v = c.values().to_vec();
        let all = c.current();
        let charge: f64 = v[..7].iter().sum();
        let magnetic: f64 = v[7..].iter().sum();
        assert!((all.delta_v - charge).abs() < 1e-12);
        assert!((all.delta_bz - magnetic).abs() < 1e-12);
        c.set_mask(ComponentMask::axis(&m, Axis::Magnetic)).unwrap();
        assert_eq!(c.current().delta_v, 0.0);
        assert_eq!(c.current().delta_bz, all.delta_bz);
        assert!(c.set_mask(ComponentMask::all(&single(1.0, 1.0))).is_err());
    }

    #[test]
    fn masked_runs_evolve_identically() {
        let m = two_axis();
        let mut parent = TrajectoryCursor::new(&m, 9, 2);
        let mut part = TrajectoryCursor::new(&m, 9, 2);
        part.set_mask(ComponentMask::from_labels(&m, ["charge-1e-3", "magnetic-1e1"]).unwrap())
            .unwrap();
        for k in 0..1000 {
            let dt = if k % 100 == 0 { 5e-5 } else { 1e-9 };
            parent.advance(dt).unwrap();
            part.advance(dt).unwrap();
            assert_eq!(parent.values(), part.values());
        }
        assert!(ComponentMask::from_labels(&m, ["nope"]).is_err());
    }

    #[test]
    fn stationary_limit_decorrelates() {
        // dt >> 1/f: the transition forgets its start, variance p/2.
        let m = single(2.0, 1.0);
        let n = 20_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        let mut cross = 0.0;
        for s in 0..n {
            let mut c = TrajectoryCursor::new(&m, 11, s);
            let x0 = c.values()[0];
            c.fast_forward(100.0).unwrap();
            let x1 = c.values()[0];
            sum += x1;
            sum2 += x1 * x1;
            cross += x0 * x1;
        }
        let nf = n as f64;
        let var = sum2 / nf - (sum / nf).powi(2);
        // var of the sample variance of N(0,1): 2σ⁴/n
        assert!((var - 1.0).abs() < 4.0 * (2.0 / nf).sqrt(), "var = {var}");
        assert!((cross / nf).abs() < 4.0 / nf.sqrt());
    }

    #[test]
    fn time_accumulates_exactly() {
        let mut c = TrajectoryCursor::new(&NoiseModel::empty("e"), 0, 0);
        for _ in 0..1_000_000 {
            c.advance(1e-9).unwrap();
        }
        assert!((c.time() - 1e-3).abs() <= f64::EPSILON * 1e-3);
    }

    #[test]
    fn trace_csv_has_header_and_rows() {
        let mut c = TrajectoryCursor::new(&two_axis(), 1, 1);
        let trace = c.record_trace(1e-9, 4).unwrap();
        assert_eq!(trace.time_s.len(), 4);
        let mut buf = Vec::new();
        trace.write_csv(Axis::Magnetic, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("time_s,value\n"));
        assert_eq!(text.lines().count(), 5);
    }
}
