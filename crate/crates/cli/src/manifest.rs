//! Run manifests and hashed file output.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{hex, ExperimentConfig};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RunRecord {
    pub model: String,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub command: String,
    pub code_version: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub config: ExperimentConfig,
    pub runs: Vec<RunRecord>,
    pub started_unix_s: u64,
    pub finished_unix_s: u64,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Writes files under an output directory and remembers what it touched.
pub struct OutputSet {
    root: PathBuf,
    command: String,
    started: u64,
    runs: Vec<RunRecord>,
    inputs: Vec<FileRecord>,
    outputs: Vec<FileRecord>,
}

impl OutputSet {
    pub fn new(root: &Path, command: &str) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            command: command.to_string(),
            started: unix_now(),
            runs: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn record(&self, rel: &str, bytes: &[u8]) -> FileRecord {
        FileRecord {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        }
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        let rec = self.record(rel, bytes);
        self.outputs.push(rec);
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)? + "\n";
        self.write(rel, text.as_bytes())
    }

    /// Records an existing file as an output without rewriting it.
    pub fn keep(&mut self, rel: &str) -> Result<()> {
        let bytes = fs::read(self.path(rel)).with_context(|| format!("reading {rel}"))?;
        let rec = self.record(rel, &bytes);
        self.outputs.push(rec);
        Ok(())
    }

    /// Reads a file under the output directory and records its hash.
    pub fn read_input(&mut self, rel: &str) -> Result<Vec<u8>> {
        let bytes = fs::read(self.path(rel))
            .with_context(|| format!("reading {}", self.path(rel).display()))?;
        let rec = self.record(rel, &bytes);
        self.inputs.push(rec);
        Ok(bytes)
    }

    /// Records a file outside the output directory.
    pub fn external_input(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let rec = FileRecord {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
            bytes: bytes.len() as u64,
        };
        self.inputs.push(rec);
        Ok(bytes)
    }

    pub fn add_run(&mut self, model: &str, seed: u64) {
        self.runs.push(RunRecord {
            model: model.to_string(),
            seed,
        });
    }

    /// Writes `manifest-<command>.json` and returns its path.
    pub fn finish(mut self, config: &ExperimentConfig) -> Result<PathBuf> {
        self.runs.sort();
        self.runs.dedup();
        self.outputs.sort_by(|a, b| a.path.cmp(&b.path));
        self.inputs.sort_by(|a, b| a.path.cmp(&b.path));
        self.inputs.dedup();
        let manifest = Manifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            command: self.command.clone(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config.hash(),
            master_seed: config.master_seed,
            config: config.clone(),
            runs: self.runs,
            started_unix_s: self.started,
            finished_unix_s: unix_now(),
            inputs: self.inputs,
            outputs: self.outputs,
        };
        let path = self.root.join(format!("manifest-{}.json", self.command));
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
