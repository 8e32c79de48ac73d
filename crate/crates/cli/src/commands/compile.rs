//! Gate compilation with an on-disk cache.

use std::fmt::Write as _;

use anyhow::{Context, Result};
use driftlab_core::pulse::{compile_all, CliffordGroup, GateCache, GateSet};

use crate::config::ExperimentConfig;
use crate::manifest::OutputSet;

pub const GATES_FILE: &str = "gates.json";

/// Returns the cached gate set if `gates.json` matches the config.
fn warm(cfg: &ExperimentConfig, out: &OutputSet) -> Option<GateSet> {
    let text = std::fs::read_to_string(out.path(GATES_FILE)).ok()?;
    let cache: GateCache = serde_json::from_str(&text).ok()?;
    cache.to_gates(&cfg.qubit.params(), &cfg.compile).ok()
}

fn report(gates: &GateSet, group: &CliffordGroup) -> Result<String> {
    let mut s = String::from("gate,duration_ns,samples,infidelity\n");
    for g in gates.gates() {
        let _ = writeln!(
            s,
            "{},{},{},{:e}",
            g.generator,
            g.duration_ns,
            g.timeline.len(),
            g.infidelity
        );
    }
    let _ = writeln!(
        s,
        "clifford_max,,,{:e}",
        group.max_compiled_infidelity(gates)?
    );
    Ok(s)
}

/// Compiles the generators unless a matching cache exists. A warm cache is
/// left untouched.
pub fn run(cfg: &ExperimentConfig, out: &mut OutputSet, force: bool) -> Result<()> {
    let group = CliffordGroup::build()?;
    let gates = match (force, warm(cfg, out)) {
        (false, Some(g)) => {
            eprintln!("{GATES_FILE} is current, not recompiling");
            out.keep(GATES_FILE)?;
            g
        }
        _ => {
            let gates =
                compile_all(&cfg.qubit.params(), &cfg.compile).context("compiling generators")?;
            out.write_json(GATES_FILE, &GateCache::from_gates(&gates, &cfg.compile))?;
            gates
        }
    };
    let text = report(&gates, &group)?;
    out.write("compile_report.csv", text.as_bytes())?;
    out.write_json("clifford_group.json", &group)?;
    print!("{text}");
    Ok(())
}
