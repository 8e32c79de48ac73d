//! Free-induction decay: analytic envelopes, T2*, power calibration and the
//! Monte Carlo cross-check.
//!
//! Charge FID: `Δb_z = 0`, the qubit starts in `|+⟩` and precesses about `z`
//! at `J_FID/h`. Magnetic FID: exchange off, the qubit starts in `|0⟩` and
//! precesses about `x` at `Δb_z/h`. In both cases the phase variance is
//! `σ² = K Σ_i p_i c_i(t)` with `c_i(t) = g(2π f_i t) / f_i²`,
//! `g(x) = e^{-x} + x - 1`, `K = (J_FID / I)²` for charge and `K = 1` for
//! magnetic noise.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{Axis, NoiseModel, TrajectoryCursor};
use crate::qubit::QubitParams;

/// Which FID experiment, with its drive frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidConfig {
    pub mode: Axis,
    /// `J_FID/h` (charge) or `Δb_z/h` (magnetic), MHz.
    pub drive_mhz: f64,
    /// Evaluation times, s.
    pub times_s: Vec<f64>,
    pub realizations: usize,
}

impl FidConfig {
    /// Charge FID driven at 12 MHz.
    pub fn charge(times_s: Vec<f64>, realizations: usize) -> Self {
        Self {
            mode: Axis::Charge,
            drive_mhz: 12.0,
            times_s,
            realizations,
        }
    }

    /// Magnetic FID at the device's static gradient.
    pub fn magnetic(params: &QubitParams, times_s: Vec<f64>, realizations: usize) -> Self {
        Self {
            mode: Axis::Magnetic,
            drive_mhz: params.dbz_mhz,
            times_s,
            realizations,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.drive_mhz > 0.0 && self.drive_mhz.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "drive {} MHz",
                self.drive_mhz
            )));
        }
        if self.times_s.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(Error::InvalidArgument(
                "FID times must be finite and >= 0".into(),
            ));
        }
        if self.times_s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "FID times must be increasing".into(),
            ));
        }
        Ok(())
    }

    fn prefactor(&self, params: &QubitParams) -> f64 {
        match self.mode {
            Axis::Charge => (self.drive_mhz * 1e6 / (params.insensitivity_mv * 1e-3)).powi(2),
            Axis::Magnetic => 1.0,
        }
    }
}

/// `e^{-x} + x - 1`, accurate for small `x`.
pub fn fid_kernel(x: f64) -> f64 {
    if x < 1e-2 {
        let x2 = x * x;
        x2 * (0.5 - x / 6.0 + x2 / 24.0 - x2 * x / 120.0)
    } else {
        (-x).exp_m1() + x
    }
}

/// Coefficient of `p` in the phase variance of one component, without the
/// charge prefactor: `g(2π f t) / f²`.
pub fn variance_coefficient(frequency: f64, t: f64) -> f64 {
    fid_kernel(2.0 * PI * frequency * t) / (frequency * frequency)
}

fn axis_sum(model: &NoiseModel, axis: Axis, t: f64) -> f64 {
    model
        .components()
        .iter()
        .filter(|c| c.axis == axis)
        .map(|c| c.power * variance_coefficient(c.frequency, t))
        .sum()
}

/// Phase variance from the charge components, rad². `j_fid_mhz` is `J_FID/h`.
pub fn sigma2_charge(t: f64, model: &NoiseModel, j_fid_mhz: f64, insensitivity_mv: f64) -> f64 {
    (j_fid_mhz * 1e6 / (insensitivity_mv * 1e-3)).powi(2) * axis_sum(model, Axis::Charge, t)
}

/// Phase variance from the magnetic components, rad².
pub fn sigma2_magnetic(t: f64, model: &NoiseModel) -> f64 {
    axis_sum(model, Axis::Magnetic, t)
}

pub fn sigma2(t: f64, model: &NoiseModel, config: &FidConfig, params: &QubitParams) -> f64 {
    match config.mode {
        Axis::Charge => sigma2_charge(t, model, config.drive_mhz, params.insensitivity_mv),
        Axis::Magnetic => sigma2_magnetic(t, model),
    }
}

/// `½(1 + e^{-σ²/2} cos(2π f_drive t))`.
pub fn analytic_return_probability(
    t: f64,
    config: &FidConfig,
    model: &NoiseModel,
    params: &QubitParams,
) -> f64 {
    let s2 = sigma2(t, model, config, params);
    0.5 * (1.0 + (-0.5 * s2).exp() * (2.0 * PI * config.drive_mhz * 1e6 * t).cos())
}

/// Analytic curve on the configured times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeResult {
    pub times_s: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub t2star_s: f64,
}

pub fn analytic_envelope(
    model: &NoiseModel,
    config: &FidConfig,
    params: &QubitParams,
) -> Result<EnvelopeResult> {
    config.validate()?;
    Ok(EnvelopeResult {
        times_s: config.times_s.clone(),
        probabilities: config
            .times_s
            .iter()
            .map(|&t| analytic_return_probability(t, config, model, params))
            .collect(),
        sigma2: config
            .times_s
            .iter()
            .map(|&t| sigma2(t, model, config, params))
            .collect(),
        t2star_s: solve_t2star(model, config, params)?,
    })
}

/// Solves `σ²(T2*)/2 = 1` by bisection in log-time. Returns infinity when the
/// model has no power on the probed axis.
pub fn solve_t2star(model: &NoiseModel, config: &FidConfig, params: &QubitParams) -> Result<f64> {
    config.validate()?;
    let f = |t: f64| 0.5 * sigma2(t, model, config, params) - 1.0;
    let (mut lo, mut hi) = (1e-9, 1e-2);
    if model
        .components()
        .iter()
        .filter(|c| c.axis == config.mode)
        .all(|c| c.power == 0.0)
    {
        return Ok(f64::INFINITY);
    }
    // σ² is increasing; widen the bracket if the root lies outside it.
    while f(lo) > 0.0 {
        lo *= 1e-3;
        if lo < 1e-30 {
            return Err(Error::InvalidArgument("T2* below 1e-30 s".into()));
        }
    }
    while f(hi) < 0.0 {
        hi *= 1e3;
        if hi > 1e30 {
            return Ok(f64::INFINITY);
        }
    }
    while hi / lo - 1.0 > 1e-13 {
        let mid = (lo * hi).sqrt();
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

/// Equal per-component power `p = 2 / (K Σ_i c_i(T2*))` that places T2* at
/// the target. Powers are V² for charge and Hz² for magnetic noise.
pub fn calibrate_power(
    target_t2star_s: f64,
    frequencies_hz: &[f64],
    config: &FidConfig,
    params: &QubitParams,
) -> Result<f64> {
    if frequencies_hz.is_empty() {
        return Err(Error::InvalidArgument(
            "no component frequencies to calibrate".into(),
        ));
    }
    if !(target_t2star_s > 0.0 && target_t2star_s.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "T2* target {target_t2star_s} s"
        )));
    }
    config.validate()?;
    let sum: f64 = frequencies_hz
        .iter()
        .map(|&f| variance_coefficient(f, target_t2star_s))
        .sum();
    Ok(2.0 / (config.prefactor(params) * sum))
}

/// Calibration outcome for one axis of one model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub frequencies_hz: Vec<f64>,
    pub power: f64,
    pub sqrt_power: f64,
    pub t2star_target_s: f64,
    pub t2star_achieved_s: f64,
}

/// Calibrates and re-solves T2* on the resulting model as a check.
pub fn calibration_report(
    target_t2star_s: f64,
    frequencies_hz: &[f64],
    config: &FidConfig,
    params: &QubitParams,
) -> Result<CalibrationReport> {
    let power = calibrate_power(target_t2star_s, frequencies_hz, config, params)?;
    let mut model = NoiseModel::empty("calibration");
    for &f in frequencies_hz {
        let label = crate::noise::OuComponent::default_label(config.mode, f);
        let c = crate::noise::OuComponent::new(config.mode, power, f, label)?;
        model = NoiseModel::new("calibration", [model.components(), &[c]].concat())?;
    }
    Ok(CalibrationReport {
        frequencies_hz: frequencies_hz.to_vec(),
        power,
        sqrt_power: power.sqrt(),
        t2star_target_s: target_t2star_s,
        t2star_achieved_s: solve_t2star(&model, config, params)?,
    })
}

/// Monte Carlo average of the return probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidSimulation {
    pub times_s: Vec<f64>,
    pub p_analytic: Vec<f64>,
    pub p_montecarlo: Vec<f64>,
    pub sigma2: Vec<f64>,
    /// Envelope extrema used by the fit.
    pub extrema_times_s: Vec<f64>,
    pub extrema_envelope: Vec<f64>,
    /// Gaussian-envelope T2*; infinite if the data do not decay.
    pub fitted_t2star_s: f64,
}

impl FidSimulation {
    pub fn max_deviation(&self) -> f64 {
        self.p_analytic
            .iter()
            .zip(&self.p_montecarlo)
            .map(|(a, m)| (a - m).abs())
            .fold(0.0, f64::max)
    }

    /// Writes `time_s,p_analytic,p_montecarlo,sigma2`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "time_s,p_analytic,p_montecarlo,sigma2")?;
        for i in 0..self.times_s.len() {
            writeln!(
                w,
                "{},{},{},{}",
                self.times_s[i], self.p_analytic[i], self.p_montecarlo[i], self.sigma2[i]
            )?;
        }
        Ok(())
    }
}

/// Averages the exact return probability over `config.realizations` noise
/// trajectories (seed indices `0..N`) and fits a Gaussian envelope to the
/// oscillation extrema `t_k = k / (2 f_drive)`.
///
/// Noise is held over each `1/f_s` step. Charge noise enters through the full
/// exponential `J_0 e^{(V_FID + δV)/I}`; only the model's components on the
/// probed axis are active.
pub fn simulate_fid(
    model: &NoiseModel,
    config: &FidConfig,
    params: &QubitParams,
    master_seed: u64,
) -> Result<FidSimulation> {
    config.validate()?;
    params.validate()?;
    if config.realizations < 100 {
        return Err(Error::InvalidArgument(format!(
            "{} realizations, need at least 100",
            config.realizations
        )));
    }
    let t_end = config.times_s.last().copied().unwrap_or(0.0);
    let f_drive = config.drive_mhz * 1e6;
    let half_period = 0.5 / f_drive;
    let extrema: Vec<f64> = (0..)
        .map(|k| k as f64 * half_period)
        .take_while(|&t| t <= t_end * (1.0 + 1e-12))
        .collect();
    let probe = model.on_axis(config.mode);
    let dt = params.dt();
    let steps = (t_end / dt).ceil() as usize + 1;

    let phase_rate = |noise: f64| -> f64 {
        match config.mode {
            Axis::Charge => {
                let v_fid = params.insensitivity_mv * (config.drive_mhz / params.j0_mhz).ln();
                2.0 * PI
                    * params.j0_mhz
                    * 1e6
                    * ((v_fid + 1e3 * noise) / params.insensitivity_mv).exp()
            }
            Axis::Magnetic => 2.0 * PI * (f_drive + noise),
        }
    };
    let eval_at = |times: &[f64], phases: &[f64], rates: &[f64], out: &mut [f64]| {
        for (o, &t) in out.iter_mut().zip(times) {
            let j = ((t / dt).floor() as usize).min(phases.len() - 1);
            let theta = phases[j] + rates[j] * (t - j as f64 * dt);
            *o += (0.5 * theta).cos().powi(2);
        }
    };

    let n_t = config.times_s.len();
    let per_realization: Vec<Vec<f64>> = (0..config.realizations as u64)
        .into_par_iter()
        .map(|s| {
            let mut cursor = TrajectoryCursor::new(&probe, master_seed, s);
            // phases[j] = θ(j dt); rates[j] is the held angular rate on [j dt, (j+1) dt).
            let mut phases = Vec::with_capacity(steps);
            let mut rates = Vec::with_capacity(steps);
            let mut theta = 0.0;
            for _ in 0..steps {
                let s = cursor.current();
                let noise = match config.mode {
                    Axis::Charge => s.delta_v,
                    Axis::Magnetic => s.delta_bz,
                };
                let w = phase_rate(noise);
                phases.push(theta);
                rates.push(w);
                theta += w * dt;
                cursor.advance(dt).expect("positive step");
            }
            let mut out = vec![0.0; n_t + extrema.len()];
            let (a, b) = out.split_at_mut(n_t);
            eval_at(&config.times_s, &phases, &rates, a);
            eval_at(&extrema, &phases, &rates, b);
            out
        })
        .collect();

    let mut sums = vec![0.0; n_t + extrema.len()];
    for r in &per_realization {
        for (s, v) in sums.iter_mut().zip(r) {
            *s += v;
        }
    }
    let n = config.realizations as f64;
    let p_montecarlo: Vec<f64> = sums[..n_t].iter().map(|s| s / n).collect();
    let extrema_envelope: Vec<f64> = sums[n_t..]
        .iter()
        .enumerate()
        .map(|(k, s)| if k % 2 == 0 { 1.0 } else { -1.0 } * (2.0 * s / n - 1.0))
        .collect();
    let fitted = fit_gaussian_envelope(&extrema, &extrema_envelope)?;
    Ok(FidSimulation {
        times_s: config.times_s.clone(),
        p_analytic: config
            .times_s
            .iter()
            .map(|&t| analytic_return_probability(t, config, model, params))
            .collect(),
        p_montecarlo,
        sigma2: config
            .times_s
            .iter()
            .map(|&t| sigma2(t, model, config, params))
            .collect(),
        extrema_times_s: extrema,
        extrema_envelope,
        fitted_t2star_s: fitted,
    })
}

/// Least-squares `T` of `E(t) = exp(-(t/T)²)` through envelope samples.
///
/// Returns infinity when the best fit runs off the slow end of the search
/// range (no visible decay).
pub fn fit_gaussian_envelope(times_s: &[f64], envelope: &[f64]) -> Result<f64> {
    if times_s.len() != envelope.len() || times_s.len() < 3 {
        return Err(Error::Fit("envelope fit needs at least 3 points".into()));
    }
    let t_max = times_s.iter().copied().fold(0.0, f64::max);
    let t_min = times_s
        .iter()
        .copied()
        .filter(|&t| t > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !(t_max > 0.0) {
        return Err(Error::Fit("envelope times are all zero".into()));
    }
    let sse = |log_t: f64| -> f64 {
        let tt = log_t.exp();
        times_s
            .iter()
            .zip(envelope)
            .map(|(&t, &e)| (e - (-(t / tt).powi(2)).exp()).powi(2))
            .sum()
    };
    let (lo, hi) = ((0.1 * t_min).ln(), (1e4 * t_max).ln());
    let grid = 400;
    let xs: Vec<f64> = (0..=grid)
        .map(|k| lo + (hi - lo) * k as f64 / grid as f64)
        .collect();
    let vals: Vec<f64> = xs.iter().map(|&x| sse(x)).collect();
    let k = (0..=grid)
        .min_by(|&a, &b| vals[a].total_cmp(&vals[b]))
        .expect("nonempty grid");
    if k == grid {
        return Ok(f64::INFINITY);
    }
    // golden-section refinement around the grid minimum
    let (mut a, mut b) = (xs[k.saturating_sub(1)], xs[(k + 1).min(grid)]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    for _ in 0..200 {
        if sse(c) < sse(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
        if (b - a).abs() < 1e-12 {
            break;
        }
    }
    Ok((0.5 * (a + b)).exp())
}
