//! Monte Carlo FID against the analytic envelope.

use anyhow::Result;
use driftlab_core::fid::{simulate_fid, solve_t2star, FidConfig};
use driftlab_core::noise::Axis;
use serde::Serialize;

use super::calibrate::fid_config;
use super::{csv_bytes, resolve_models, select_models};
use crate::config::ExperimentConfig;
use crate::manifest::OutputSet;

#[derive(Serialize)]
struct FidSummary {
    model: String,
    axis: Axis,
    realizations: usize,
    t2star_analytic_s: f64,
    /// `None` if the Monte Carlo envelope does not decay.
    t2star_fitted_s: Option<f64>,
    max_deviation: f64,
}

pub fn run(cfg: &ExperimentConfig, out: &mut OutputSet, model_ids: &[String]) -> Result<()> {
    let params = cfg.qubit.params();
    let models = select_models(resolve_models(cfg, out)?, model_ids)?;
    let mut summary = Vec::new();
    for model in &models {
        for axis in [Axis::Charge, Axis::Magnetic] {
            let probe = model.on_axis(axis);
            let base = fid_config(cfg, axis);
            let t2 = solve_t2star(&probe, &base, &params)?;
            if probe.is_empty() || !t2.is_finite() {
                continue;
            }
            let n = cfg.fid.points.max(2);
            let t_end = cfg.fid.span_t2star * t2;
            let times = (0..n).map(|k| t_end * k as f64 / (n - 1) as f64).collect();
            let fc = FidConfig {
                times_s: times,
                realizations: cfg.fid.realizations,
                ..base
            };
            eprintln!("fid: {} {axis}", model.id);
            let sim = simulate_fid(model, &fc, &params, cfg.master_seed)?;
            out.write(
                &format!("fid/{}_{axis}.csv", model.id),
                &csv_bytes(|w| sim.write_csv(w))?,
            )?;
            let fitted = sim
                .fitted_t2star_s
                .is_finite()
                .then_some(sim.fitted_t2star_s);
            println!(
                "{} {axis}: analytic T2* {:.4} us, fitted {} us, max deviation {:.4}",
                model.id,
                t2 * 1e6,
                fitted
                    .map(|t| format!("{:.4}", t * 1e6))
                    .unwrap_or_else(|| "n/a".into()),
                sim.max_deviation()
            );
            summary.push(FidSummary {
                model: model.id.clone(),
                axis,
                realizations: fc.realizations,
                t2star_analytic_s: t2,
                t2star_fitted_s: fitted,
                max_deviation: sim.max_deviation(),
            });
        }
    }
    out.write_json("fid/summary.json", &summary)
}
