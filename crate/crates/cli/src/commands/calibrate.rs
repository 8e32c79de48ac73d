//! Closed-form power calibration against the configured T2* targets.

use std::fmt::Write as _;

use anyhow::{bail, Result};
use driftlab_core::fid::{calibration_report, solve_t2star, FidConfig};
use driftlab_core::noise::{decade_ladder, Axis, NoiseModel};
use driftlab_core::qubit::QubitParams;
use serde::{Deserialize, Serialize};

use crate::config::{AxisConfig, ExperimentConfig};
use crate::manifest::OutputSet;

pub const CALIBRATION_FILE: &str = "calibration.json";
pub const CALIBRATION_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerSource {
    Target,
    Explicit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibratedAxis {
    pub source: PowerSource,
    pub frequencies_hz: Vec<f64>,
    /// Per component: V² for charge, Hz² for magnetic.
    pub power: f64,
    pub sqrt_power: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2star_target_s: Option<f64>,
    /// `None` when the axis does not decay.
    pub t2star_achieved_s: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibratedModel {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub charge: Option<CalibratedAxis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub magnetic: Option<CalibratedAxis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFile {
    pub schema_version: u32,
    pub calibration_hash: String,
    pub qubit: QubitParams,
    pub models: Vec<CalibratedModel>,
}

pub fn fid_config(cfg: &ExperimentConfig, axis: Axis) -> FidConfig {
    match axis {
        Axis::Charge => FidConfig {
            drive_mhz: cfg.fid.charge_drive_mhz,
            ..FidConfig::charge(Vec::new(), 0)
        },
        Axis::Magnetic => FidConfig::magnetic(&cfg.qubit.params(), Vec::new(), 0),
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn calibrate_axis(cfg: &ExperimentConfig, axis: Axis, a: &AxisConfig) -> Result<CalibratedAxis> {
    let params = cfg.qubit.params();
    let fc = fid_config(cfg, axis);
    let freqs = decade_ladder(a.ir_hz, a.uv_hz)?;
    if let Some(power) = a.explicit_power(axis) {
        let model = NoiseModel::empty("explicit").with_ladder(axis, a.ir_hz, a.uv_hz, power)?;
        return Ok(CalibratedAxis {
            source: PowerSource::Explicit,
            frequencies_hz: freqs,
            power,
            sqrt_power: power.sqrt(),
            t2star_target_s: None,
            t2star_achieved_s: finite(solve_t2star(&model, &fc, &params)?),
        });
    }
    let target = a.t2star_us.expect("validated") * 1e-6;
    let r = calibration_report(target, &freqs, &fc, &params)?;
    if (r.t2star_achieved_s / target - 1.0).abs() > 1e-6 {
        bail!(
            "calibrated power gives T2* = {} s instead of {target} s",
            r.t2star_achieved_s
        );
    }
    Ok(CalibratedAxis {
        source: PowerSource::Target,
        frequencies_hz: r.frequencies_hz,
        power: r.power,
        sqrt_power: r.sqrt_power,
        t2star_target_s: Some(target),
        t2star_achieved_s: finite(r.t2star_achieved_s),
    })
}

pub fn calibrate_model(cfg: &ExperimentConfig, id: &str) -> CalibratedModel {
    let m = cfg.model(id).expect("model exists");
    let mut out = CalibratedModel {
        id: id.to_string(),
        charge: None,
        magnetic: None,
        error: None,
    };
    for axis in [Axis::Charge, Axis::Magnetic] {
        let Some(a) = m.axis(axis) else { continue };
        match calibrate_axis(cfg, axis, a) {
            Ok(c) if axis == Axis::Charge => out.charge = Some(c),
            Ok(c) => out.magnetic = Some(c),
            Err(e) => {
                out.error = Some(format!("{axis}: {e:#}"));
                out.charge = None;
                out.magnetic = None;
                break;
            }
        }
    }
    out
}

fn display_sqrt(axis: Axis, c: &CalibratedAxis) -> f64 {
    match axis {
        Axis::Charge => c.sqrt_power * 1e6,
        Axis::Magnetic => c.sqrt_power * 1e-3,
    }
}

/// One row per model: `√p_V` in μV and `√p_bz` in kHz with their bands.
fn table(cfg: &ExperimentConfig, models: &[CalibratedModel]) -> String {
    let mut s = String::from("model,charge_sqrt_power_uv,charge_ir_hz,charge_uv_hz,charge_t2star_us,magnetic_sqrt_power_khz,magnetic_ir_hz,magnetic_uv_hz,magnetic_t2star_us,status\n");
    for c in models {
        let m = cfg.model(&c.id).expect("model exists");
        let _ = write!(s, "{}", c.id);
        for axis in [Axis::Charge, Axis::Magnetic] {
            let cal = match axis {
                Axis::Charge => c.charge.as_ref(),
                Axis::Magnetic => c.magnetic.as_ref(),
            };
            match (m.axis(axis), cal) {
                (Some(a), Some(cal)) => {
                    let t2 = cal
                        .t2star_achieved_s
                        .map(|t| (t * 1e6).to_string())
                        .unwrap_or_else(|| "inf".into());
                    let _ = write!(
                        s,
                        ",{},{},{},{t2}",
                        display_sqrt(axis, cal),
                        a.ir_hz,
                        a.uv_hz
                    );
                }
                (Some(a), None) => {
                    let _ = write!(s, ",,{},{},", a.ir_hz, a.uv_hz);
                }
                (None, _) => s.push_str(",,,,"),
            }
        }
        match &c.error {
            Some(e) => {
                let _ = writeln!(s, ",\"failed: {}\"", e.replace('"', "'"));
            }
            None => s.push_str(",ok\n"),
        }
    }
    s
}

pub fn run(cfg: &ExperimentConfig, out: &mut OutputSet) -> Result<()> {
    let models: Vec<CalibratedModel> = cfg
        .models
        .iter()
        .map(|m| calibrate_model(cfg, &m.id))
        .collect();
    let file = CalibrationFile {
        schema_version: CALIBRATION_SCHEMA_VERSION,
        calibration_hash: cfg.calibration_hash(),
        qubit: cfg.qubit.params(),
        models,
    };
    out.write_json(CALIBRATION_FILE, &file)?;
    let csv = table(cfg, &file.models);
    out.write("calibration.csv", csv.as_bytes())?;
    print!("{csv}");
    let failed: Vec<&str> = file
        .models
        .iter()
        .filter(|m| m.error.is_some())
        .map(|m| m.id.as_str())
        .collect();
    if !failed.is_empty() {
        bail!("calibration failed for {}", failed.join(", "));
    }
    Ok(())
}
