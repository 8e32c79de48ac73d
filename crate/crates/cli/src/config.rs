//! Experiment configuration.
//!
//! Configs are JSON. Every dimensional field carries its unit in its name.
//! Unknown fields are rejected, and each noise axis gives either a T2*
//! target or an explicit power, never both.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, ensure, Context, Result};
use driftlab_core::attribution::{FrequencyBand, Part};
use driftlab_core::noise::Axis;
use driftlab_core::pulse::CompileOptions;
use driftlab_core::qubit::QubitParams;
use driftlab_core::rb::RbSchedule;
use driftlab_core::stats::Metric;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Half-open range of seed indices, written `A..B`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedRange {
    pub start: u64,
    pub end: u64,
}

impl SeedRange {
    pub fn new(start: u64, end: u64) -> Self {
        Self { start, end }
    }

    pub fn seeds(&self) -> Vec<u64> {
        (self.start..self.end).collect()
    }

    pub fn len(&self) -> usize {
        (self.end - self.start) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

impl fmt::Display for SeedRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

impl FromStr for SeedRange {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once("..")
            .with_context(|| format!("seed range {s:?} is not of the form A..B"))?;
        let start: u64 = a
            .trim()
            .parse()
            .with_context(|| format!("bad seed range start {a:?}"))?;
        let end: u64 = b
            .trim()
            .parse()
            .with_context(|| format!("bad seed range end {b:?}"))?;
        ensure!(end > start, "seed range {s} is empty");
        Ok(Self { start, end })
    }
}

impl Serialize for SeedRange {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SeedRange {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QubitConfig {
    pub j0_mhz: f64,
    pub insensitivity_mv: f64,
    pub dbz_mhz: f64,
    pub sample_rate_hz: f64,
}

impl Default for QubitConfig {
    fn default() -> Self {
        let p = QubitParams::default();
        Self {
            j0_mhz: p.j0_mhz,
            insensitivity_mv: p.insensitivity_mv,
            dbz_mhz: p.dbz_mhz,
            sample_rate_hz: p.sample_rate_hz,
        }
    }
}

impl QubitConfig {
    pub fn params(&self) -> QubitParams {
        QubitParams {
            j0_mhz: self.j0_mhz,
            insensitivity_mv: self.insensitivity_mv,
            dbz_mhz: self.dbz_mhz,
            sample_rate_hz: self.sample_rate_hz,
        }
    }
}

/// One noise axis of a model: a one-per-decade ladder from `ir_hz` to
/// `uv_hz` with equal powers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub ir_hz: f64,
    pub uv_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2star_us: Option<f64>,
    /// Charge only: `√p` in μV.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sqrt_power_uv: Option<f64>,
    /// Magnetic only: `√p / h` in kHz.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sqrt_power_khz: Option<f64>,
}

impl AxisConfig {
    pub fn target(ir_hz: f64, uv_hz: f64, t2star_us: f64) -> Self {
        Self {
            ir_hz,
            uv_hz,
            t2star_us: Some(t2star_us),
            sqrt_power_uv: None,
            sqrt_power_khz: None,
        }
    }

    /// Explicit power in SI units (V² or Hz²), if given.
    pub fn explicit_power(&self, axis: Axis) -> Option<f64> {
        match axis {
            Axis::Charge => self.sqrt_power_uv.map(|s| (s * 1e-6).powi(2)),
            Axis::Magnetic => self.sqrt_power_khz.map(|s| (s * 1e3).powi(2)),
        }
    }

    fn validate(&self, model: &str, axis: Axis) -> Result<()> {
        let (own, other) = match axis {
            Axis::Charge => (self.sqrt_power_uv, self.sqrt_power_khz),
            Axis::Magnetic => (self.sqrt_power_khz, self.sqrt_power_uv),
        };
        ensure!(
            other.is_none(),
            "model {model}: {axis} power must be given as {}",
            if axis == Axis::Charge {
                "sqrt_power_uv"
            } else {
                "sqrt_power_khz"
            }
        );
        match (self.t2star_us, own) {
            (Some(_), Some(_)) => {
                bail!("model {model}: {axis} axis gives both a T2* target and an explicit power")
            }
            (None, None) => {
                bail!("model {model}: {axis} axis needs either t2star_us or an explicit power")
            }
            (Some(t), None) => ensure!(
                t > 0.0 && t.is_finite(),
                "model {model}: {axis} t2star_us must be > 0"
            ),
            (None, Some(p)) => ensure!(
                p >= 0.0 && p.is_finite(),
                "model {model}: {axis} power must be >= 0"
            ),
        }
        ensure!(
            self.ir_hz > 0.0 && self.uv_hz.is_finite(),
            "model {model}: {axis} band [{}, {}] Hz is invalid",
            self.ir_hz,
            self.uv_hz
        );
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub charge: Option<AxisConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub magnetic: Option<AxisConfig>,
}

impl ModelConfig {
    pub fn axis(&self, axis: Axis) -> Option<&AxisConfig> {
        match axis {
            Axis::Charge => self.charge.as_ref(),
            Axis::Magnetic => self.magnetic.as_ref(),
        }
    }

    /// True when some axis needs calibration.
    pub fn has_targets(&self) -> bool {
        [&self.charge, &self.magnetic]
            .into_iter()
            .flatten()
            .any(|a| a.t2star_us.is_some())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FidSettings {
    /// Exchange drive of the charge FID.
    pub charge_drive_mhz: f64,
    pub realizations: usize,
    pub points: usize,
    /// Simulated span in units of the analytic T2*.
    pub span_t2star: f64,
}

impl Default for FidSettings {
    fn default() -> Self {
        Self {
            charge_drive_mhz: 12.0,
            realizations: 1000,
            points: 400,
            span_t2star: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub depths: Vec<usize>,
    pub circuits_per_depth: usize,
    pub passes: usize,
    pub spam_prep_us: f64,
    pub spam_meas_us: f64,
    pub inter_pass_idle_us: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        let s = RbSchedule::default();
        Self {
            depths: s.depths,
            circuits_per_depth: s.circuits_per_depth,
            passes: s.passes,
            spam_prep_us: s.spam_prep_us,
            spam_meas_us: s.spam_meas_us,
            inter_pass_idle_us: s.inter_pass_idle_us,
        }
    }
}

impl ScheduleConfig {
    pub fn schedule(&self) -> RbSchedule {
        RbSchedule {
            depths: self.depths.clone(),
            circuits_per_depth: self.circuits_per_depth,
            passes: self.passes,
            spam_prep_us: self.spam_prep_us,
            spam_meas_us: self.spam_meas_us,
            inter_pass_idle_us: self.inter_pass_idle_us,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    pub seeds: SeedRange,
    /// Fit on one sampled shot per circuit instead of exact probabilities.
    pub shots: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            seeds: SeedRange::new(0, 10),
            shots: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    pub metric: Metric,
    pub p_x: f64,
    /// Seeds to compare; defaults to the run seeds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<SeedRange>,
    /// Depth of the circuits compared by the per-circuit test.
    pub circuit_depth: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_cross_pairs: Option<usize>,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            metric: Metric::R,
            p_x: 75.0,
            seeds: None,
            circuit_depth: 256,
            max_cross_pairs: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PartitionConfig {
    Axis {
        name: String,
    },
    Frequency {
        name: String,
        bands: Vec<FrequencyBand>,
        /// Run on the charge components only, magnetic noise off.
        #[serde(default)]
        charge_only: bool,
    },
    Custom {
        name: String,
        parts: Vec<Part>,
    },
}

impl PartitionConfig {
    pub fn name(&self) -> &str {
        match self {
            PartitionConfig::Axis { name }
            | PartitionConfig::Frequency { name, .. }
            | PartitionConfig::Custom { name, .. } => name,
        }
    }

    pub fn defaults() -> Vec<PartitionConfig> {
        vec![
            PartitionConfig::Axis {
                name: "axis".into(),
            },
            PartitionConfig::Frequency {
                name: "frequency-1ms".into(),
                bands: FrequencyBand::millisecond_split(),
                charge_only: true,
            },
            PartitionConfig::Frequency {
                name: "frequency-1s".into(),
                bands: FrequencyBand::second_split(),
                charge_only: true,
            },
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttributionConfig {
    /// Defaults to the first model.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// Realisations; defaults to the run seeds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<SeedRange>,
    pub partitions: Vec<PartitionConfig>,
    pub bootstrap_replicates: usize,
    /// Circuits for per-circuit attribution, e.g. `L128-2`.
    pub circuits: Vec<String>,
    /// Multiplies every component power before running.
    pub noise_scale: f64,
}

impl Default for AttributionConfig {
    fn default() -> Self {
        Self {
            model: None,
            seeds: None,
            partitions: PartitionConfig::defaults(),
            bootstrap_replicates: 1000,
            circuits: Vec::new(),
            noise_scale: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderConfig {
    pub ir_hz: f64,
    pub uv_hz: f64,
    pub power: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsdConfig {
    pub sample_rates_hz: Vec<f64>,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub points_per_decade: usize,
    /// Images per side in the truncated folded sum.
    pub folded_images: u32,
    /// Extra unit-free ladder written as `reference`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_ladder: Option<LadderConfig>,
}

impl Default for PsdConfig {
    fn default() -> Self {
        Self {
            sample_rates_hz: vec![1e5, 1e6, 1e7, 1e9],
            f_min_hz: 1e-3,
            f_max_hz: 1e7,
            points_per_decade: 10,
            folded_images: 20_000,
            reference_ladder: Some(LadderConfig {
                ir_hz: 1e-3,
                uv_hz: 1e7,
                power: 1.0,
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub master_seed: u64,
    /// Defaults to the `--out` argument or `out`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub qubit: QubitConfig,
    #[serde(default)]
    pub fid: FidSettings,
    pub models: Vec<ModelConfig>,
    #[serde(default)]
    pub compile: CompileOptions,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub run: RunSettings,
    #[serde(default)]
    pub validation: ValidationConfig,
    #[serde(default)]
    pub attribution: AttributionConfig,
    #[serde(default)]
    pub psd: PsdConfig,
}

/// Ten ladders sharing charge T2* = 1.2 μs and magnetic T2* = 4.2 μs.
pub fn standard_models() -> Vec<ModelConfig> {
    let bands: [((f64, f64), (f64, f64)); 10] = [
        ((1e-3, 1e0), (1e-3, 1e0)),
        ((1e-3, 1e0), (1e-3, 1e4)),
        ((1e-3, 1e4), (1e-3, 1e0)),
        ((1e-3, 1e4), (1e-3, 1e4)),
        ((1e-3, 1e0), (1e0, 1e3)),
        ((1e-3, 1e4), (1e0, 1e3)),
        ((1e-3, 1e7), (1e1, 1e7)),
        ((1e0, 1e3), (1e-3, 1e0)),
        ((1e0, 1e3), (1e-3, 1e4)),
        ((1e0, 1e3), (1e0, 1e3)),
    ];
    bands
        .iter()
        .enumerate()
        .map(|(i, &((cir, cuv), (mir, muv)))| ModelConfig {
            id: format!("model-{}", i + 1),
            charge: Some(AxisConfig::target(cir, cuv, 1.2)),
            magnetic: Some(AxisConfig::target(mir, muv, 4.2)),
        })
        .collect()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            master_seed: 0,
            output_dir: None,
            qubit: QubitConfig::default(),
            fid: FidSettings::default(),
            models: standard_models(),
            compile: CompileOptions::default(),
            schedule: ScheduleConfig::default(),
            run: RunSettings::default(),
            validation: ValidationConfig::default(),
            attribution: AttributionConfig::default(),
            psd: PsdConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).context("config does not match the schema")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serialisable") + "\n"
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.schema_version == CONFIG_SCHEMA_VERSION,
            "config schema version {} is not supported (expected {CONFIG_SCHEMA_VERSION})",
            self.schema_version
        );
        self.qubit.params().validate()?;
        ensure!(!self.models.is_empty(), "config has no models");
        let mut ids = std::collections::BTreeSet::new();
        for m in &self.models {
            ensure!(
                !m.id.is_empty() && !m.id.contains(['/', '\\', ',']),
                "model id {:?} is not usable as a file name",
                m.id
            );
            ensure!(ids.insert(m.id.as_str()), "model id {} repeated", m.id);
            for axis in [Axis::Charge, Axis::Magnetic] {
                if let Some(a) = m.axis(axis) {
                    a.validate(&m.id, axis)?;
                }
            }
        }
        self.schedule.schedule().validate()?;
        ensure!(
            self.fid.charge_drive_mhz > 0.0,
            "fid.charge_drive_mhz must be > 0"
        );
        ensure!(
            (0.0..=100.0).contains(&self.validation.p_x),
            "validation.p_x must be in [0, 100]"
        );
        ensure!(
            self.attribution.noise_scale >= 0.0,
            "attribution.noise_scale must be >= 0"
        );
        ensure!(
            self.psd.f_min_hz > 0.0 && self.psd.f_max_hz > self.psd.f_min_hz,
            "psd frequency range is invalid"
        );
        ensure!(
            self.psd.points_per_decade > 0,
            "psd.points_per_decade must be > 0"
        );
        if let Some(id) = &self.attribution.model {
            ensure!(
                ids.contains(id.as_str()),
                "attribution model {id} is not defined"
            );
        }
        let mut names = std::collections::BTreeSet::new();
        for p in &self.attribution.partitions {
            ensure!(
                names.insert(p.name()),
                "partition name {} repeated",
                p.name()
            );
        }
        Ok(())
    }

    pub fn model(&self, id: &str) -> Result<&ModelConfig> {
        self.models
            .iter()
            .find(|m| m.id == id)
            .with_context(|| format!("model {id} is not defined in the config"))
    }

    /// SHA-256 of the canonical JSON, ignoring the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let value = serde_json::to_value(&c).expect("serialisable");
        hex(&Sha256::digest(
            serde_json::to_vec(&value).expect("serialisable"),
        ))
    }

    /// Hash of the fields that determine calibrated powers.
    pub fn calibration_hash(&self) -> String {
        let value = serde_json::json!({
            "qubit": self.qubit,
            "charge_drive_mhz": self.fid.charge_drive_mhz,
            "models": self.models,
        });
        hex(&Sha256::digest(
            serde_json::to_vec(&value).expect("serialisable"),
        ))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        let back = ExperimentConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn seed_ranges_parse() {
        assert_eq!("3..7".parse::<SeedRange>().unwrap(), SeedRange::new(3, 7));
        assert!("7..3".parse::<SeedRange>().is_err());
        assert!("7".parse::<SeedRange>().is_err());
        assert_eq!(SeedRange::new(0, 3).seeds(), vec![0, 1, 2]);
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let c = ExperimentConfig::from_json(
            r#"{"schema_version": 1, "models": [{"id": "m", "charge": {"ir_hz": 1, "uv_hz": 1000, "sqrt_power_uv": 100}}]}"#,
        )
        .unwrap();
        assert_eq!(c.schedule, ScheduleConfig::default());
        assert!(c.magnetic_free());
    }

    impl ExperimentConfig {
        fn magnetic_free(&self) -> bool {
            self.models.iter().all(|m| m.magnetic.is_none())
        }
    }

    #[test]
    fn conflicting_power_and_target_rejected() {
        let text = r#"{"schema_version": 1, "models": [{"id": "m", "charge": {"ir_hz": 1, "uv_hz": 1000, "sqrt_power_uv": 100, "t2star_us": 1.2}}]}"#;
        let err = ExperimentConfig::from_json(text).unwrap_err();
        assert!(format!("{err:#}").contains("both"), "{err:#}");
        let wrong_unit = r#"{"schema_version": 1, "models": [{"id": "m", "charge": {"ir_hz": 1, "uv_hz": 1000, "sqrt_power_khz": 30}}]}"#;
        assert!(ExperimentConfig::from_json(wrong_unit).is_err());
        let unknown = r#"{"schema_version": 1, "models": [], "spam_s": 1}"#;
        assert!(ExperimentConfig::from_json(unknown).is_err());
    }

    #[test]
    fn hash_tracks_semantic_changes_only() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.output_dir = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.master_seed = 1;
        assert_ne!(a.hash(), b.hash());
        let mut c = a.clone();
        c.schedule.passes = 20;
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.calibration_hash(), c.calibration_hash());
    }
}
