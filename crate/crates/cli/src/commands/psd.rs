//! Continuous, aliased and folded spectra of the configured models.

use std::fmt::Write as _;

use anyhow::Result;
use driftlab_core::noise::{psd_continuous, psd_discrete, psd_folded_sum, Axis, NoiseModel};

use super::{resolve_models, select_models};
use crate::config::ExperimentConfig;
use crate::manifest::OutputSet;

/// Log-spaced grid with both endpoints.
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let n = ((hi / lo).log10() * per_decade as f64).round() as usize;
    (0..=n)
        .map(|k| lo * (hi / lo).powf(k as f64 / n.max(1) as f64))
        .collect()
}

fn table(cfg: &ExperimentConfig, rows: &[(String, NoiseModel)]) -> Result<String> {
    let p = &cfg.psd;
    let freqs = log_grid(p.f_min_hz, p.f_max_hz, p.points_per_decade);
    let mut s =
        String::from("axis,sample_rate_hz,frequency_hz,psd_continuous,psd_discrete,psd_folded\n");
    for (axis, model) in rows {
        for &fs in &p.sample_rates_hz {
            for &f in &freqs {
                let cont = psd_continuous(model, f);
                let _ = write!(s, "{axis},{fs},{f},{cont}");
                if f <= fs / 2.0 {
                    let _ = writeln!(
                        s,
                        ",{},{}",
                        psd_discrete(model, f, fs)?,
                        psd_folded_sum(model, f, fs, p.folded_images)
                    );
                } else {
                    s.push_str(",,\n");
                }
            }
        }
    }
    Ok(s)
}

pub fn run(cfg: &ExperimentConfig, out: &mut OutputSet, model_ids: &[String]) -> Result<()> {
    let models = select_models(resolve_models(cfg, out)?, model_ids)?;
    for model in &models {
        let rows: Vec<(String, NoiseModel)> = [Axis::Charge, Axis::Magnetic]
            .into_iter()
            .map(|a| (a.to_string(), model.on_axis(a)))
            .filter(|(_, m)| !m.is_empty())
            .collect();
        out.write(
            &format!("psd/{}.csv", model.id),
            table(cfg, &rows)?.as_bytes(),
        )?;
    }
    if let Some(l) = &cfg.psd.reference_ladder {
        let m =
            NoiseModel::empty("reference").with_ladder(Axis::Charge, l.ir_hz, l.uv_hz, l.power)?;
        out.write(
            "psd/reference.csv",
            table(cfg, &[("reference".into(), m)])?.as_bytes(),
        )?;
    }
    Ok(())
}
