use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CompileOptions, CompiledGate, GateSet, Generator};
use crate::error::{Error, Result};
use crate::qubit::QubitParams;

pub const CACHE_SCHEMA_VERSION: u32 = 1;

/// One cached waveform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateRecord {
    pub params_hash: String,
    pub word: Vec<Generator>,
    #[serde(rename = "samples_mV")]
    pub samples_mv: Vec<f64>,
    pub duration_ns: f64,
    pub infidelity: f64,
}

/// On-disk gate cache.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateCache {
    pub schema_version: u32,
    pub params_hash: String,
    pub records: Vec<GateRecord>,
}

/// Lower-case hex SHA-256 of the JSON serialisation of `value`.
pub fn json_sha256<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("serialisable");
    hex_digest(&bytes)
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl GateCache {
    /// Key of a compilation: device parameters plus compiler settings.
    pub fn params_hash(params: &QubitParams, opts: &CompileOptions) -> String {
        json_sha256(&(params, opts))
    }

    pub fn from_gates(gates: &GateSet, opts: &CompileOptions) -> Self {
        let params_hash = Self::params_hash(&gates.params, opts);
        let records = gates
            .gates()
            .map(|g| GateRecord {
                params_hash: params_hash.clone(),
                word: vec![g.generator],
                samples_mv: g.timeline.samples().to_vec(),
                duration_ns: g.duration_ns,
                infidelity: g.infidelity,
            })
            .collect();
        Self {
            schema_version: CACHE_SCHEMA_VERSION,
            params_hash,
            records,
        }
    }

    /// Rebuilds the gate set, refusing caches made for other parameters.
    pub fn to_gates(&self, params: &QubitParams, opts: &CompileOptions) -> Result<GateSet> {
        let expected = Self::params_hash(params, opts);
        if self.schema_version != CACHE_SCHEMA_VERSION {
            return Err(Error::InvalidArgument(format!(
                "gate cache schema {}",
                self.schema_version
            )));
        }
        if self.params_hash != expected {
            return Err(Error::MissingGate(format!(
                "cache was compiled for parameters {}",
                self.params_hash
            )));
        }
        let mut gates = Vec::new();
        for r in &self.records {
            let [g] = r.word.as_slice() else {
                return Err(Error::InvalidArgument(
                    "cache record is not a single generator".into(),
                ));
            };
            let gate = CompiledGate::from_samples(*g, r.samples_mv.clone(), params)?;
            if (gate.infidelity - r.infidelity).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "cached {g} infidelity {} does not reproduce ({})",
                    r.infidelity, gate.infidelity
                )));
            }
            gates.push(gate);
        }
        GateSet::new(*params, gates)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("serialisable");
        fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_sensitive() {
        let p = QubitParams::default();
        let o = CompileOptions::default();
        assert_eq!(
            GateCache::params_hash(&p, &o),
            GateCache::params_hash(&p, &o)
        );
        let q = QubitParams { dbz_mhz: 10.5, ..p };
        assert_ne!(
            GateCache::params_hash(&p, &o),
            GateCache::params_hash(&q, &o)
        );
        assert_eq!(GateCache::params_hash(&p, &o).len(), 64);
    }

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(
            hex_digest(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
