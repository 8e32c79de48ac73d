use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{depth_means, fit_rb, RbCircuit, RbFit, RbSchedule};
use crate::error::{Error, Result};
use crate::noise::{ComponentMask, NoiseModel, TrajectoryCursor};
use crate::qubit::{propagate_views, survival_probability, BasisState, QubitParams};
use crate::seeds;

/// Execution switches.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Keys the noise streams.
    pub master_seed: u64,
    /// Draw one shot per circuit per pass and fit on the shot outcomes.
    pub shots: bool,
}

/// One execution of the full circuit set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PassResult {
    pub pass_index: usize,
    /// Start of each circuit's gate sequence (after state preparation), s.
    pub t_start_s: Vec<f64>,
    /// `|⟨0|U|0⟩|²` per circuit.
    pub p_survive: Vec<f64>,
    /// `|⟨1|U|0⟩|²` per circuit.
    pub p_bitflip: Vec<f64>,
    /// Single-shot outcomes (1 = returned to `|0⟩`) in shots mode.
    pub shots: Option<Vec<u8>>,
    pub fit: RbFit,
}

/// All passes of one noise trajectory under one component view.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbRun {
    pub model_id: String,
    pub seed: u64,
    /// Name of the component view (`all` for the full model).
    pub view: String,
    pub circuit_ids: Vec<String>,
    pub circuit_depths: Vec<usize>,
    pub passes: Vec<PassResult>,
    /// Total laboratory time in samples of `1/f_s`.
    pub lab_time_samples: u64,
    pub lab_time_s: f64,
    pub spam_time_s: f64,
    pub gate_time_s: f64,
    pub idle_time_s: f64,
    /// Cursor time at the end of the run.
    pub cursor_time_s: f64,
}

impl RbRun {
    pub fn r_series(&self) -> Vec<f64> {
        self.passes.iter().map(|p| p.fit.r).collect()
    }

    /// Per-pass bitflip probability of one circuit.
    pub fn bitflip_series(&self, circuit_id: &str) -> Result<Vec<f64>> {
        let i = self
            .circuit_ids
            .iter()
            .position(|c| c == circuit_id)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown circuit {circuit_id}")))?;
        Ok(self.passes.iter().map(|p| p.p_bitflip[i]).collect())
    }

    /// Writes `pass,circuit_id,depth,t_start_s,p_survive,p_bitflip`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "pass,circuit_id,depth,t_start_s,p_survive,p_bitflip")?;
        for p in &self.passes {
            for i in 0..self.circuit_ids.len() {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    p.pass_index,
                    self.circuit_ids[i],
                    self.circuit_depths[i],
                    p.t_start_s[i],
                    p.p_survive[i],
                    p.p_bitflip[i]
                )?;
            }
        }
        Ok(())
    }
}

/// Integer-sample wall clock of a run.
struct Clock {
    fs: f64,
    samples: u64,
    spam: u64,
    gates: u64,
    idle: u64,
}

impl Clock {
    fn now(&self) -> f64 {
        self.samples as f64 / self.fs
    }
}

struct Windows {
    prep: u64,
    meas: u64,
    idle: u64,
}

fn check_inputs(
    circuits: &[RbCircuit],
    schedule: &RbSchedule,
    params: &QubitParams,
) -> Result<Windows> {
    schedule.validate()?;
    params.validate()?;
    if circuits.is_empty() {
        return Err(Error::MissingGate("no compiled circuits".into()));
    }
    for c in circuits {
        if c.timeline.sample_rate_hz() != params.sample_rate_hz {
            return Err(Error::SampleRateMismatch {
                timeline_hz: c.timeline.sample_rate_hz(),
                params_hz: params.sample_rate_hz,
            });
        }
    }
    let fs = params.sample_rate_hz;
    Ok(Windows {
        prep: RbSchedule::window_samples(schedule.spam_prep_us, fs)?,
        meas: RbSchedule::window_samples(schedule.spam_meas_us, fs)?,
        idle: RbSchedule::window_samples(schedule.inter_pass_idle_us, fs)?,
    })
}

/// Runs one pass for several views of the same trajectory; returns per view
/// `(t_start, p_survive, p_bitflip)` per circuit.
fn execute_pass(
    circuits: &[RbCircuit],
    cursor: &mut TrajectoryCursor,
    windows: &Windows,
    params: &QubitParams,
    views: &[ComponentMask],
    clock: &mut Clock,
) -> Result<Vec<(Vec<f64>, Vec<f64>, Vec<f64>)>> {
    let mut out = vec![(Vec::new(), Vec::new(), Vec::new()); views.len()];
    for c in circuits {
        cursor.fast_forward(windows.prep as f64 / clock.fs)?;
        clock.samples += windows.prep;
        clock.spam += windows.prep;
        let start = clock.now();
        let us = propagate_views(&c.timeline, cursor, params, start, views)?;
        clock.samples += c.timeline.len() as u64;
        clock.gates += c.timeline.len() as u64;
        for (o, u) in out.iter_mut().zip(&us) {
            o.0.push(start);
            o.1.push(survival_probability(u, BasisState::Zero, BasisState::Zero));
            o.2.push(survival_probability(u, BasisState::Zero, BasisState::One));
        }
        cursor.fast_forward(windows.meas as f64 / clock.fs)?;
        clock.samples += windows.meas;
        clock.spam += windows.meas;
    }
    cursor.fast_forward(windows.idle as f64 / clock.fs)?;
    clock.samples += windows.idle;
    clock.idle += windows.idle;
    Ok(out)
}

fn finish_pass(
    pass_index: usize,
    (t_start_s, p_survive, p_bitflip): (Vec<f64>, Vec<f64>, Vec<f64>),
    circuits: &[RbCircuit],
    schedule: &RbSchedule,
    shot_rng: Option<&mut ChaCha8Rng>,
) -> Result<PassResult> {
    let shots: Option<Vec<u8>> = shot_rng.map(|rng| {
        p_survive
            .iter()
            .map(|&p| u8::from(rng.random::<f64>() < p))
            .collect()
    });
    let fit_data: Vec<f64> = match &shots {
        Some(s) => s.iter().map(|&b| b as f64).collect(),
        None => p_survive.clone(),
    };
    let fit = fit_rb(
        &schedule.depths,
        &depth_means(&schedule.depths, circuits, &fit_data),
    )?;
    Ok(PassResult {
        pass_index,
        t_start_s,
        p_survive,
        p_bitflip,
        shots,
        fit,
    })
}

/// Executes one pass on `cursor` (with its own mask), which must sit at
/// `pass_start_s`.
///
/// Each circuit, in the given order: fast-forward through preparation,
/// propagate the gate sequence against live noise, record the exact survival
/// probability from `|0⟩`, fast-forward through measurement. An optional
/// inter-pass idle follows the last circuit.
pub fn run_pass(
    circuits: &[RbCircuit],
    cursor: &mut TrajectoryCursor,
    schedule: &RbSchedule,
    params: &QubitParams,
    pass_index: usize,
    pass_start_s: f64,
) -> Result<PassResult> {
    let windows = check_inputs(circuits, schedule, params)?;
    let fs = params.sample_rate_hz;
    let samples = (pass_start_s * fs).round() as u64;
    let mut clock = Clock {
        fs,
        samples,
        spam: 0,
        gates: 0,
        idle: 0,
    };
    let mask = cursor.mask().clone();
    let mut res = execute_pass(
        circuits,
        cursor,
        &windows,
        params,
        std::slice::from_ref(&mask),
        &mut clock,
    )?;
    finish_pass(pass_index, res.remove(0), circuits, schedule, None)
}

/// Runs every pass of one noise trajectory under several component views at
/// once; all views share the same per-component realisation.
pub fn run_seed_views(
    model: &NoiseModel,
    seed: u64,
    circuits: &[RbCircuit],
    schedule: &RbSchedule,
    params: &QubitParams,
    views: &[(String, ComponentMask)],
    opts: &RunOptions,
) -> Result<Vec<RbRun>> {
    let windows = check_inputs(circuits, schedule, params)?;
    for (name, v) in views {
        if v.len() != model.len() {
            return Err(Error::InvalidPartition(format!(
                "view {name} does not match model {}",
                model.id
            )));
        }
    }
    let masks: Vec<ComponentMask> = views.iter().map(|(_, m)| m.clone()).collect();
    let mut cursor = TrajectoryCursor::new(model, opts.master_seed, seed);
    let mut clock = Clock {
        fs: params.sample_rate_hz,
        samples: 0,
        spam: 0,
        gates: 0,
        idle: 0,
    };
    let seed_str = seed.to_string();
    let mut shot_rngs: Vec<Option<ChaCha8Rng>> = views
        .iter()
        .map(|(name, _)| {
            opts.shots.then(|| {
                seeds::derive_rng(opts.master_seed, &["shots", &model.id, &seed_str, name])
            })
        })
        .collect();
    let mut passes: Vec<Vec<PassResult>> = vec![Vec::with_capacity(schedule.passes); views.len()];
    for pass in 0..schedule.passes {
        let res = execute_pass(circuits, &mut cursor, &windows, params, &masks, &mut clock)?;
        for ((data, out), rng) in res
            .into_iter()
            .zip(passes.iter_mut())
            .zip(shot_rngs.iter_mut())
        {
            out.push(finish_pass(pass, data, circuits, schedule, rng.as_mut())?);
        }
    }
    let fs = params.sample_rate_hz;
    Ok(views
        .iter()
        .zip(passes)
        .map(|((name, _), passes)| RbRun {
            model_id: model.id.clone(),
            seed,
            view: name.clone(),
            circuit_ids: circuits.iter().map(|c| c.id.clone()).collect(),
            circuit_depths: circuits.iter().map(|c| c.depth).collect(),
            passes,
            lab_time_samples: clock.samples,
            lab_time_s: clock.samples as f64 / fs,
            spam_time_s: clock.spam as f64 / fs,
            gate_time_s: clock.gates as f64 / fs,
            idle_time_s: clock.idle as f64 / fs,
            cursor_time_s: cursor.time(),
        })
        .collect())
}

/// Runs every pass of one trajectory with all components active.
pub fn run_seed(
    model: &NoiseModel,
    seed: u64,
    circuits: &[RbCircuit],
    schedule: &RbSchedule,
    params: &QubitParams,
    opts: &RunOptions,
) -> Result<RbRun> {
    let views = [("all".to_string(), ComponentMask::all(model))];
    Ok(run_seed_views(model, seed, circuits, schedule, params, &views, opts)?.remove(0))
}

/// One run per seed, in parallel; results are in seed order.
pub fn run_experiment(
    model: &NoiseModel,
    seeds: &[u64],
    circuits: &[RbCircuit],
    schedule: &RbSchedule,
    params: &QubitParams,
    opts: &RunOptions,
) -> Result<Vec<RbRun>> {
    check_inputs(circuits, schedule, params)?;
    seeds
        .par_iter()
        .map(|&s| run_seed(model, s, circuits, schedule, params, opts))
        .collect()
}
