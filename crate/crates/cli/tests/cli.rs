use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use driftlab::config::{AxisConfig, ExperimentConfig, ModelConfig, SeedRange};
use driftlab::manifest::{sha256_hex, Manifest};
use driftlab_core::stats::KsGrid;
use serde_json::Value;

fn driftlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_driftlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = driftlab(args);
    assert!(
        out.status.success(),
        "driftlab {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, cfg.to_json()).unwrap();
    p
}

fn desk_config() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.models.retain(|m| m.id == "model-1" || m.id == "model-7");
    c.schedule.depths = vec![2, 4, 8, 16, 32, 64];
    c.schedule.passes = 20;
    c.run.seeds = SeedRange::new(0, 10);
    c
}

/// Relative path to contents of every non-manifest file under `root`.
fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                if !rel.starts_with("manifest-") && rel != "config.json" {
                    out.insert(rel, fs::read(&p).unwrap());
                }
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

#[test]
fn power_and_target_together_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = desk_config();
    cfg.models[0].charge.as_mut().unwrap().sqrt_power_uv = Some(150.0);
    let path = write_config(dir.path(), &cfg);
    let out = driftlab(&[
        "calibrate",
        "--config",
        path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("both a T2* target and an explicit power"),
        "{err}"
    );
    assert!(!dir.path().join("calibration.json").exists());
}

#[test]
fn explicit_powers_pass_through() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::default();
    cfg.models = vec![ModelConfig {
        id: "fixed".into(),
        charge: Some(AxisConfig {
            ir_hz: 1.0,
            uv_hz: 1e3,
            t2star_us: None,
            sqrt_power_uv: Some(150.0),
            sqrt_power_khz: None,
        }),
        magnetic: Some(AxisConfig {
            ir_hz: 1e-3,
            uv_hz: 1e0,
            t2star_us: None,
            sqrt_power_uv: None,
            sqrt_power_khz: Some(30.0),
        }),
    }];
    let path = write_config(dir.path(), &cfg);
    let (c, o) = (path.to_str().unwrap(), dir.path().to_str().unwrap());

    // No targets, so nothing needs calibrating first.
    ok(&["psd", "--config", c, "--out", o]);
    assert!(dir.path().join("psd/fixed.csv").is_file());

    ok(&["calibrate", "--config", c, "--out", o]);
    let cal: Value =
        serde_json::from_slice(&fs::read(dir.path().join("calibration.json")).unwrap()).unwrap();
    let m = &cal["models"][0];
    assert_eq!(m["charge"]["source"], "explicit");
    assert_eq!(m["charge"]["power"].as_f64().unwrap(), (150e-6f64).powi(2));
    assert_eq!(m["magnetic"]["power"].as_f64().unwrap(), (30e3f64).powi(2));
    assert!(m["charge"].get("t2star_target_s").is_none());
}

#[test]
fn missing_prerequisites_are_named() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &desk_config());
    let (c, o) = (path.to_str().unwrap(), dir.path().to_str().unwrap());
    let err = String::from_utf8(driftlab(&["rb", "--config", c, "--out", o]).stderr).unwrap();
    assert!(
        err.contains("gates.json") && err.contains("driftlab compile"),
        "{err}"
    );
    let err = String::from_utf8(driftlab(&["psd", "--config", c, "--out", o]).stderr).unwrap();
    assert!(
        err.contains("calibration.json") && err.contains("driftlab calibrate"),
        "{err}"
    );
    let err = String::from_utf8(driftlab(&["validate", "--config", c, "--out", o]).stderr).unwrap();
    assert!(err.contains("rb/model-1/seed-0.json"), "{err}");

    // A calibration made for other models is refused.
    ok(&["calibrate", "--config", c, "--out", o]);
    let mut other = desk_config();
    other.models[0].charge.as_mut().unwrap().t2star_us = Some(1.0);
    let path = write_config(dir.path(), &other);
    let err = String::from_utf8(
        driftlab(&["psd", "--config", path.to_str().unwrap(), "--out", o]).stderr,
    )
    .unwrap();
    assert!(err.contains("rerun `driftlab calibrate`"), "{err}");
}

#[test]
fn warm_gate_cache_is_a_no_op() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &desk_config());
    let (c, o) = (path.to_str().unwrap(), dir.path().to_str().unwrap());
    let gates = dir.path().join("gates.json");
    ok(&["compile", "--config", c, "--out", o]);
    let before = (
        fs::read(&gates).unwrap(),
        fs::metadata(&gates).unwrap().modified().unwrap(),
    );
    let second = ok(&["compile", "--config", c, "--out", o]);
    assert!(String::from_utf8_lossy(&second.stderr).contains("is current"));
    let after = (
        fs::read(&gates).unwrap(),
        fs::metadata(&gates).unwrap().modified().unwrap(),
    );
    assert_eq!(before, after);
    let manifest = Manifest::load(&dir.path().join("manifest-compile.json")).unwrap();
    let rec = manifest
        .outputs
        .iter()
        .find(|r| r.path == "gates.json")
        .unwrap();
    assert_eq!(rec.sha256, sha256_hex(&after.0));

    // Changing a compiler setting invalidates the cache.
    let mut cfg = desk_config();
    cfg.compile.optimizer_seed = 1;
    let path = write_config(dir.path(), &cfg);
    let err =
        String::from_utf8(driftlab(&["rb", "--config", path.to_str().unwrap(), "--out", o]).stderr)
            .unwrap();
    assert!(err.contains("rerun `driftlab compile`"), "{err}");
}

fn pipeline(dir: &Path) {
    let path = write_config(dir, &desk_config());
    let (c, o) = (path.to_str().unwrap(), dir.to_str().unwrap());
    ok(&["calibrate", "--config", c, "--out", o]);
    ok(&["compile", "--config", c, "--out", o]);
    ok(&["rb", "--config", c, "--out", o]);
    ok(&["validate", "--config", c, "--out", o]);
}

#[test]
fn desk_scale_pipeline_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path());

    let grid: KsGrid =
        serde_json::from_slice(&fs::read(a.path().join("validate/grid_r.json")).unwrap()).unwrap();
    assert_eq!(grid.models, vec!["model-1", "model-7"]);
    assert_eq!(grid.alpha.len(), 2);
    assert!(grid.beta[0][0].is_none() && grid.beta[0][1].is_some());
    for j in 0..2 {
        assert!(
            grid.alpha[j] <= 0.25 + 1e-12,
            "alpha {} at p_x = 75",
            grid.alpha[j]
        );
    }

    let m = Manifest::load(&a.path().join("manifest-rb.json")).unwrap();
    assert_eq!(m.runs.len(), 20);
    assert_eq!(m.config.schedule.passes, 20);
    assert_eq!(m.config_hash, desk_config().hash());
    for rec in &m.outputs {
        let bytes = fs::read(a.path().join(&rec.path)).unwrap();
        assert_eq!(rec.sha256, sha256_hex(&bytes), "{}", rec.path);
    }
    assert!(
        m.inputs.iter().any(|r| r.path == "gates.json")
            && m.inputs.iter().any(|r| r.path == "calibration.json")
    );

    pipeline(b.path());
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    assert_eq!(ta.keys().collect::<Vec<_>>(), tb.keys().collect::<Vec<_>>());
    for (k, v) in &ta {
        assert!(v == &tb[k], "{k} differs between reruns");
    }
}

#[test]
fn overrides_reach_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &desk_config());
    let (c, o) = (path.to_str().unwrap(), dir.path().to_str().unwrap());
    ok(&["calibrate", "--config", c, "--out", o]);
    ok(&["compile", "--config", c, "--out", o]);
    ok(&[
        "rb",
        "--config",
        c,
        "--out",
        o,
        "--model",
        "model-7",
        "--seed-range",
        "3..4",
        "--passes",
        "3",
        "--depths",
        "2,4,8",
        "--spam-us",
        "10",
        "--jobs",
        "1",
    ]);
    let m = Manifest::load(&dir.path().join("manifest-rb.json")).unwrap();
    assert_eq!(m.runs.len(), 1);
    assert_eq!((m.runs[0].model.as_str(), m.runs[0].seed), ("model-7", 3));
    assert_eq!(m.config.schedule.depths, vec![2, 4, 8]);
    assert_ne!(m.config_hash, desk_config().hash());
    let run: driftlab_core::rb::RbRun =
        serde_json::from_slice(&fs::read(dir.path().join("rb/model-7/seed-3.json")).unwrap())
            .unwrap();
    assert_eq!(run.passes.len(), 3);
    assert!((run.spam_time_s - 3.0 * 30.0 * 20e-6).abs() < 1e-12);
    assert!(!dir.path().join("rb/model-1").exists());
}
