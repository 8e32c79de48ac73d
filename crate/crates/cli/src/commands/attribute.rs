//! Correlated re-execution under trajectory partitions and bootstrap curves.

use std::fmt::Write as _;

use anyhow::{bail, Result};
use driftlab_core::attribution::{
    per_circuit_attribution, rb_attribution, split_experiment, AttributionResult, BandSummary,
    BootstrapOptions, Curve, TrajectoryPartition,
};
use driftlab_core::noise::{Axis, NoiseModel};
use driftlab_core::rb::RunOptions;
use driftlab_core::seeds;
use serde::Serialize;

use super::{circuits, csv_bytes, load_gates, resolve_models};
use crate::config::{ExperimentConfig, PartitionConfig};
use crate::manifest::OutputSet;

/// Percentile bands reported for the additivity gap.
pub const GAP_BANDS: [(&str, f64, f64); 3] = [
    ("bottom_decile", 0.0, 10.0),
    ("median", 45.0, 55.0),
    ("top_decile", 90.0, 100.0),
];

#[derive(Serialize)]
struct GapBand {
    name: &'static str,
    lo_percentile: f64,
    hi_percentile: f64,
    ranks: Vec<usize>,
    gap: BandSummary,
    contains_zero: bool,
}

#[derive(Serialize)]
struct Summary<'a> {
    model: &'a str,
    partition: &'a str,
    partition_kind: driftlab_core::attribution::PartitionKind,
    parts: Vec<(String, Vec<String>)>,
    metric: &'a str,
    seeds: Vec<u64>,
    passes: usize,
    bootstrap_replicates: usize,
    percentiles: &'a [f64],
    parent: &'a Curve,
    part_curves: &'a [Curve],
    gap: &'a Curve,
    gap_bands: Vec<GapBand>,
    ordering_consistent: bool,
}

fn partition_for(
    p: &PartitionConfig,
    model: &NoiseModel,
) -> Result<(NoiseModel, TrajectoryPartition)> {
    Ok(match p {
        PartitionConfig::Axis { .. } => (model.clone(), TrajectoryPartition::axis(model)),
        PartitionConfig::Frequency {
            bands, charge_only, ..
        } => {
            let m = if *charge_only {
                model.on_axis(Axis::Charge)
            } else {
                model.clone()
            };
            let part = TrajectoryPartition::frequency(&m, bands)?;
            (m, part)
        }
        PartitionConfig::Custom { parts, .. } => {
            (model.clone(), TrajectoryPartition::custom(parts.clone()))
        }
    })
}

fn gap_bands(result: &AttributionResult) -> Result<Vec<GapBand>> {
    GAP_BANDS
        .iter()
        .map(|&(name, lo, hi)| {
            let gap = result.band_gap(lo, hi)?;
            Ok(GapBand {
                name,
                lo_percentile: lo,
                hi_percentile: hi,
                ranks: result.band_ranks(lo, hi),
                gap,
                contains_zero: gap.contains_zero(),
            })
        })
        .collect()
}

pub fn run(cfg: &ExperimentConfig, out: &mut OutputSet, only: &[String]) -> Result<()> {
    let a = &cfg.attribution;
    for name in only {
        if !a.partitions.iter().any(|p| p.name() == name) {
            bail!("partition {name} is not defined in the config");
        }
    }
    let gates = load_gates(cfg, out)?;
    let models = resolve_models(cfg, out)?;
    let model_id = a.model.clone().unwrap_or_else(|| cfg.models[0].id.clone());
    let base = models
        .into_iter()
        .find(|m| m.id == model_id)
        .expect("validated")
        .scaled(a.noise_scale);
    let circuits = circuits(cfg, &gates)?;
    let schedule = cfg.schedule.schedule();
    let params = cfg.qubit.params();
    let opts = RunOptions {
        master_seed: cfg.master_seed,
        shots: false,
    };
    let seeds = a.seeds.unwrap_or(cfg.run.seeds).seeds();
    for &s in &seeds {
        out.add_run(&model_id, s);
    }

    for pc in a
        .partitions
        .iter()
        .filter(|p| only.is_empty() || only.iter().any(|n| n == p.name()))
    {
        let name = pc.name();
        eprintln!(
            "attribute: {name} on {model_id} over {} realisations",
            seeds.len()
        );
        let (model, partition) = partition_for(pc, &base)?;
        let runs = split_experiment(
            &model, &seeds, &partition, &circuits, &schedule, &params, &opts,
        )?;
        let boot = BootstrapOptions {
            replicates: a.bootstrap_replicates,
            seed: seeds::derive_u64(cfg.master_seed, &["bootstrap", name]),
        };
        let dir = format!("attribute/{name}");

        let result = rb_attribution(&runs, &boot)?;
        out.write(
            &format!("{dir}/r.csv"),
            &csv_bytes(|w| result.write_csv(w))?,
        )?;
        let summary = Summary {
            model: &model_id,
            partition: name,
            partition_kind: partition.kind,
            parts: partition
                .parts
                .iter()
                .map(|p| (p.name.clone(), p.labels.clone()))
                .collect(),
            metric: &result.metric,
            seeds: seeds.clone(),
            passes: result.passes(),
            bootstrap_replicates: result.replicates,
            percentiles: &result.percentiles,
            parent: &result.parent,
            part_curves: &result.parts,
            gap: &result.gap,
            gap_bands: gap_bands(&result)?,
            ordering_consistent: result.check_ordering(),
        };
        out.write_json(&format!("{dir}/summary.json"), &summary)?;

        let mut raw = String::from("seed,view,pass,r\n");
        for run in &runs {
            for view in std::iter::once(&run.parent).chain(&run.parts) {
                for (k, r) in view.r_series().iter().enumerate() {
                    let _ = writeln!(raw, "{},{},{k},{r}", view.seed, view.view);
                }
            }
        }
        out.write(&format!("{dir}/realisations.csv"), raw.as_bytes())?;

        for id in &a.circuits {
            let res = per_circuit_attribution(id, &runs, &boot)?;
            out.write(
                &format!("{dir}/bitflip_{id}.csv"),
                &csv_bytes(|w| res.write_csv(w))?,
            )?;
        }
        for b in &summary.gap_bands {
            println!(
                "{name}: gap over percentiles [{}, {}] = {:.3e} (95% CI {:.3e} .. {:.3e})",
                b.lo_percentile, b.hi_percentile, b.gap.mean, b.gap.lo, b.gap.hi
            );
        }
    }
    Ok(())
}
