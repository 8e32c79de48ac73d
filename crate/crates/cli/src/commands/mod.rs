//! One module per verb, plus the prerequisites they share.

pub mod attribute;
pub mod calibrate;
pub mod compile;
pub mod fid;
pub mod psd;
pub mod rb;
pub mod validate;

use anyhow::{bail, Context, Result};
use driftlab_core::noise::{Axis, NoiseModel};
use driftlab_core::pulse::{CliffordGroup, GateCache, GateSet};
use driftlab_core::rb::{sample_circuits, RbCircuit};
use driftlab_core::seeds;

use crate::config::{ExperimentConfig, ModelConfig};
use crate::manifest::OutputSet;

pub use calibrate::{CalibratedAxis, CalibratedModel, CalibrationFile, CALIBRATION_FILE};
pub use compile::GATES_FILE;

/// Buffers CSV text in memory before it is written and hashed.
pub(crate) fn csv_bytes<F>(f: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut Vec<u8>) -> driftlab_core::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn exists(out: &OutputSet, rel: &str) -> bool {
    out.path(rel).is_file()
}

fn axis_model(id: &str, model: &ModelConfig, powers: [Option<f64>; 2]) -> Result<NoiseModel> {
    let mut m = NoiseModel::empty(id);
    for (axis, power) in [Axis::Charge, Axis::Magnetic].into_iter().zip(powers) {
        if let (Some(a), Some(p)) = (model.axis(axis), power) {
            m = m
                .with_ladder(axis, a.ir_hz, a.uv_hz, p)
                .with_context(|| format!("model {id}: {axis} ladder"))?;
        }
    }
    Ok(m)
}

/// Noise models in config order, with calibrated powers filled in.
///
/// Explicit powers pass straight through. Any T2* target requires a
/// `calibration.json` made from the same model definitions.
pub fn resolve_models(cfg: &ExperimentConfig, out: &mut OutputSet) -> Result<Vec<NoiseModel>> {
    if !cfg.models.iter().any(ModelConfig::has_targets) {
        return cfg
            .models
            .iter()
            .map(|m| {
                axis_model(
                    &m.id,
                    m,
                    [Axis::Charge, Axis::Magnetic]
                        .map(|a| m.axis(a).and_then(|c| c.explicit_power(a))),
                )
            })
            .collect();
    }
    if !exists(out, CALIBRATION_FILE) {
        bail!(
            "missing prerequisite {CALIBRATION_FILE} in {}: run `driftlab calibrate` first",
            out.root().display()
        );
    }
    let bytes = out.read_input(CALIBRATION_FILE)?;
    let file: CalibrationFile =
        serde_json::from_slice(&bytes).with_context(|| format!("parsing {CALIBRATION_FILE}"))?;
    if file.calibration_hash != cfg.calibration_hash() {
        bail!("{CALIBRATION_FILE} was made for different models or qubit parameters: rerun `driftlab calibrate`");
    }
    cfg.models
        .iter()
        .map(|m| {
            let c =
                file.models.iter().find(|c| c.id == m.id).with_context(|| {
                    format!("{CALIBRATION_FILE} has no entry for model {}", m.id)
                })?;
            if let Some(e) = &c.error {
                bail!("model {} failed calibration: {e}", m.id);
            }
            axis_model(
                &m.id,
                m,
                [
                    c.charge.as_ref().map(|a| a.power),
                    c.magnetic.as_ref().map(|a| a.power),
                ],
            )
        })
        .collect()
}

/// Selects models by id, keeping config order; empty means all.
pub fn select_models(models: Vec<NoiseModel>, ids: &[String]) -> Result<Vec<NoiseModel>> {
    for id in ids {
        if !models.iter().any(|m| &m.id == id) {
            bail!("model {id} is not defined in the config");
        }
    }
    Ok(models
        .into_iter()
        .filter(|m| ids.is_empty() || ids.contains(&m.id))
        .collect())
}

/// The compiled gates from `gates.json`.
pub fn load_gates(cfg: &ExperimentConfig, out: &mut OutputSet) -> Result<GateSet> {
    if !exists(out, GATES_FILE) {
        bail!(
            "missing prerequisite {GATES_FILE} in {}: run `driftlab compile` first",
            out.root().display()
        );
    }
    let bytes = out.read_input(GATES_FILE)?;
    let cache: GateCache =
        serde_json::from_slice(&bytes).with_context(|| format!("parsing {GATES_FILE}"))?;
    cache
        .to_gates(&cfg.qubit.params(), &cfg.compile)
        .with_context(|| {
            format!("{GATES_FILE} does not match the config: rerun `driftlab compile`")
        })
}

/// The circuit set every model and seed shares.
pub fn circuits(cfg: &ExperimentConfig, gates: &GateSet) -> Result<Vec<RbCircuit>> {
    let group = CliffordGroup::build()?;
    let circuit_seed = seeds::derive_u64(cfg.master_seed, &["circuits"]);
    Ok(sample_circuits(
        &cfg.schedule.schedule(),
        &group,
        gates,
        circuit_seed,
    )?)
}

pub fn rb_run_path(model: &str, seed: u64) -> String {
    format!("rb/{model}/seed-{seed}.json")
}
