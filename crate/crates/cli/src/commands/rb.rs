//! Wall-clock RB passes for every selected model and seed.

use std::fmt::Write as _;

use anyhow::Result;
use driftlab_core::rb::{run_experiment, RbRun, RunOptions};

use super::{circuits, csv_bytes, load_gates, rb_run_path, resolve_models, select_models};
use crate::config::ExperimentConfig;
use crate::manifest::OutputSet;

fn r_table(run: &RbRun) -> String {
    let mut s = String::from("pass,r,sigma,ci_low,ci_high,sse,converged,at_boundary\n");
    for p in &run.passes {
        let f = &p.fit;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            p.pass_index, f.r, f.sigma, f.ci_low, f.ci_high, f.sse, f.converged, f.at_boundary
        );
    }
    s
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn run(cfg: &ExperimentConfig, out: &mut OutputSet, model_ids: &[String]) -> Result<()> {
    let gates = load_gates(cfg, out)?;
    let models = select_models(resolve_models(cfg, out)?, model_ids)?;
    let circuits = circuits(cfg, &gates)?;
    let schedule = cfg.schedule.schedule();
    let params = cfg.qubit.params();
    let opts = RunOptions {
        master_seed: cfg.master_seed,
        shots: cfg.run.shots,
    };
    let seeds = cfg.run.seeds.seeds();

    let mut listing = String::from("circuit_id,depth,duration_ns,cliffords\n");
    for c in &circuits {
        let words: Vec<String> = c.cliffords.iter().map(|k| k.to_string()).collect();
        let _ = writeln!(
            listing,
            "{},{},{},{}",
            c.id,
            c.depth,
            c.duration_s() * 1e9,
            words.join(" ")
        );
    }
    out.write("rb/circuits.csv", listing.as_bytes())?;

    for model in &models {
        eprintln!("rb: {} over seeds {}", model.id, cfg.run.seeds);
        let runs = run_experiment(model, &seeds, &circuits, &schedule, &params, &opts)?;
        let mut summary =
            String::from("seed,lab_time_s,spam_time_s,gate_time_s,idle_time_s,median_r\n");
        for run in &runs {
            let base = format!("rb/{}/seed-{}", model.id, run.seed);
            out.write_json(&rb_run_path(&model.id, run.seed), run)?;
            out.write(
                &format!("{base}_circuits.csv"),
                &csv_bytes(|w| run.write_csv(w))?,
            )?;
            out.write(&format!("{base}_r.csv"), r_table(run).as_bytes())?;
            let _ = writeln!(
                summary,
                "{},{},{},{},{},{}",
                run.seed,
                run.lab_time_s,
                run.spam_time_s,
                run.gate_time_s,
                run.idle_time_s,
                median(run.r_series())
            );
            out.add_run(&model.id, run.seed);
        }
        out.write(&format!("rb/{}/summary.csv", model.id), summary.as_bytes())?;
    }
    Ok(())
}
