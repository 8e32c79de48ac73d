//! K-S error grids over stored RB runs or external datasets.

use std::path::Path;

use anyhow::{bail, Context, Result};
use driftlab_core::rb::RbRun;
use driftlab_core::seeds;
use driftlab_core::stats::{
    error_grid_with, per_circuit_grid, read_datasets_csv, write_datasets_csv, GridOptions, KsGrid,
    Metric, MetricDataset,
};

use super::{csv_bytes, rb_run_path};
use crate::config::ExperimentConfig;
use crate::manifest::OutputSet;

fn load_runs(cfg: &ExperimentConfig, out: &mut OutputSet, models: &[String]) -> Result<Vec<RbRun>> {
    let seeds = cfg.validation.seeds.unwrap_or(cfg.run.seeds).seeds();
    let mut runs = Vec::new();
    for m in cfg
        .models
        .iter()
        .filter(|m| models.is_empty() || models.contains(&m.id))
    {
        for &s in &seeds {
            let rel = rb_run_path(&m.id, s);
            if !out.path(&rel).is_file() {
                bail!(
                    "missing prerequisite {rel} in {}: run `driftlab rb` for model {} seed {s}",
                    out.root().display(),
                    m.id
                );
            }
            let bytes = out.read_input(&rel)?;
            runs.push(serde_json::from_slice(&bytes).with_context(|| format!("parsing {rel}"))?);
        }
    }
    Ok(runs)
}

fn datasets_from_runs(cfg: &ExperimentConfig, runs: &[RbRun]) -> Result<Vec<MetricDataset>> {
    let mut out = Vec::new();
    for run in runs {
        match cfg.validation.metric {
            Metric::R => out.push(MetricDataset::r_from_run(run)?),
            Metric::DeltaR => out.push(MetricDataset::delta_r_from_run(run)?),
            Metric::Bitflip => {
                let ids: Vec<&String> = run
                    .circuit_ids
                    .iter()
                    .zip(&run.circuit_depths)
                    .filter(|(_, &d)| d == cfg.validation.circuit_depth)
                    .map(|(id, _)| id)
                    .collect();
                if ids.is_empty() {
                    bail!(
                        "no circuits of depth {} in the RB runs",
                        cfg.validation.circuit_depth
                    );
                }
                for id in ids {
                    out.push(MetricDataset::bitflip_from_run(run, id)?);
                }
            }
        }
    }
    Ok(out)
}

fn write_grid(out: &mut OutputSet, stem: &str, grid: &KsGrid) -> Result<()> {
    out.write_json(&format!("{stem}.json"), grid)?;
    out.write(&format!("{stem}.csv"), &csv_bytes(|w| grid.write_csv(w))?)
}

pub fn run(
    cfg: &ExperimentConfig,
    out: &mut OutputSet,
    external: Option<&Path>,
    models: &[String],
) -> Result<()> {
    if external.is_none() {
        for id in models {
            cfg.model(id)?;
        }
    }
    let metric = cfg.validation.metric;
    let datasets: Vec<MetricDataset> = match external {
        Some(path) => {
            let bytes = out.external_input(path)?;
            read_datasets_csv(bytes.as_slice())?
                .into_iter()
                .filter(|d| {
                    d.metric == metric && (models.is_empty() || models.contains(&d.model_id))
                })
                .collect()
        }
        None => datasets_from_runs(cfg, &load_runs(cfg, out, models)?)?,
    };
    if datasets.is_empty() {
        bail!("no {} datasets to compare", metric.as_str());
    }
    for d in &datasets {
        out.add_run(&d.model_id, d.seed);
    }
    let name = metric.as_str();
    out.write(
        &format!("validate/datasets_{name}.csv"),
        &csv_bytes(|w| write_datasets_csv(&datasets, w))?,
    )?;
    let p_x = cfg.validation.p_x;
    if metric == Metric::Bitflip {
        let grids = per_circuit_grid(&datasets, p_x)?;
        for (id, g) in grids.circuits.iter().zip(&grids.grids) {
            write_grid(out, &format!("validate/bitflip/grid_{id}"), g)?;
        }
        write_grid(out, "validate/grid_bitflip_best", &grids.best)?;
        write_grid(out, "validate/grid_bitflip_median", &grids.median)?;
        write_grid(out, "validate/grid_bitflip_worst", &grids.worst)?;
        print!(
            "{}",
            String::from_utf8(csv_bytes(|w| grids.median.write_csv(w))?)?
        );
    } else {
        let opts = GridOptions {
            max_cross_pairs: cfg.validation.max_cross_pairs,
            subsample_seed: seeds::derive_u64(cfg.master_seed, &["cross-pairs"]),
        };
        let grid = error_grid_with(&datasets, p_x, &opts)?;
        write_grid(out, &format!("validate/grid_{name}"), &grid)?;
        print!("{}", String::from_utf8(csv_bytes(|w| grid.write_csv(w))?)?);
    }
    Ok(())
}
