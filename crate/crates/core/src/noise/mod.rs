//! Sums of independent Ornstein-Uhlenbeck processes on the charge and magnetic axes.
//!
//! Units are SI throughout this module: charge components carry voltage noise
//! in volts (power in V²), magnetic components carry gradient noise
//! `δb_z/h` in hertz (power in Hz²). Each component `i` is a stationary
//! Gaussian process with autocorrelation `(p_i / 2) exp(-2π f_i |τ|)`.

mod cursor;
mod spectrum;

pub use cursor::{ComponentMask, NoiseSample, Trace, TrajectoryCursor};
pub use spectrum::{psd_continuous, psd_discrete, psd_folded_sum};

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Charge,
    Magnetic,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::Charge => f.write_str("charge"),
            Axis::Magnetic => f.write_str("magnetic"),
        }
    }
}

/// One OU process of a noise model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuComponent {
    /// `p_i`; the stationary variance is `p_i / 2`.
    pub power: f64,
    /// Characteristic frequency `f_i` in Hz.
    pub frequency: f64,
    pub axis: Axis,
    pub label: String,
}

impl OuComponent {
    pub fn new(axis: Axis, power: f64, frequency: f64, label: impl Into<String>) -> Result<Self> {
        if !(power >= 0.0 && power.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "power must be finite and >= 0, got {power}"
            )));
        }
        if !(frequency > 0.0 && frequency.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "frequency must be finite and > 0, got {frequency}"
            )));
        }
        Ok(Self {
            power,
            frequency,
            axis,
            label: label.into(),
        })
    }

    /// Default label, e.g. `charge-1e-3` for a 1 mHz charge component.
    pub fn default_label(axis: Axis, frequency: f64) -> String {
        format!("{axis}-{frequency:e}")
    }
}

/// Frequencies of a one-per-decade ladder from `ir` to `uv` inclusive.
pub fn decade_ladder(ir: f64, uv: f64) -> Result<Vec<f64>> {
    if !(ir > 0.0 && uv >= ir && uv.is_finite()) {
        return Err(Error::InvalidModel(format!("invalid band [{ir}, {uv}] Hz")));
    }
    let lo = ir.log10();
    let hi = uv.log10();
    let decades = (hi - lo).round();
    if ((hi - lo) - decades).abs() > 1e-9 {
        return Err(Error::InvalidModel(format!(
            "band [{ir}, {uv}] Hz is not a whole number of decades"
        )));
    }
    let aligned = (lo - lo.round()).abs() < 1e-12;
    Ok((0..=decades as i32)
        .map(|k| {
            if aligned {
                // Parse the decimal literal so 1e-3 stays exactly 0.001.
                format!("1e{}", lo.round() as i32 + k)
                    .parse()
                    .expect("float literal")
            } else {
                ir * 10f64.powi(k)
            }
        })
        .collect())
}

/// An ordered collection of OU components with a model id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub id: String,
    components: Vec<OuComponent>,
}

impl NoiseModel {
    pub fn new(id: impl Into<String>, components: Vec<OuComponent>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for c in &components {
            if !seen.insert(c.label.as_str()) {
                return Err(Error::InvalidModel(format!(
                    "duplicate component label {}",
                    c.label
                )));
            }
        }
        Ok(Self {
            id: id.into(),
            components,
        })
    }

    pub fn empty(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            components: Vec::new(),
        }
    }

    /// Appends an equal-power, one-per-decade ladder on `axis`.
    pub fn with_ladder(mut self, axis: Axis, ir: f64, uv: f64, power: f64) -> Result<Self> {
        for f in decade_ladder(ir, uv)? {
            let c = OuComponent::new(axis, power, f, OuComponent::default_label(axis, f))?;
            self.components.push(c);
        }
        Self::new(self.id, self.components)
    }

    pub fn components(&self) -> &[OuComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.components.iter().map(|c| c.label.as_str())
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.components.iter().position(|c| c.label == label)
    }

    /// Copy keeping only the components on `axis` (same id).
    pub fn on_axis(&self, axis: Axis) -> Self {
        Self {
            id: self.id.clone(),
            components: self
                .components
                .iter()
                .filter(|c| c.axis == axis)
                .cloned()
                .collect(),
        }
    }

    /// Copy with every power multiplied by `factor` (same id, same labels).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            id: self.id.clone(),
            components: self
                .components
                .iter()
                .map(|c| OuComponent {
                    power: c.power * factor,
                    ..c.clone()
                })
                .collect(),
        }
    }

    /// Stationary variance of the summed signal on `axis`: `Σ p_i / 2`.
    pub fn stationary_variance(&self, axis: Axis) -> f64 {
        self.components
            .iter()
            .filter(|c| c.axis == axis)
            .map(|c| 0.5 * c.power)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_has_one_component_per_decade() {
        let f = decade_ladder(1e-3, 1e7).unwrap();
        assert_eq!(f.len(), 11);
        assert_eq!(f[0], 0.001);
        assert_eq!(f[3], 1.0);
        assert_eq!(f[10], 1e7);
        for w in f.windows(2) {
            assert!((w[1] / w[0] - 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ladder_rejects_fractional_decades() {
        assert!(decade_ladder(1e-3, 5e-1).is_err());
        assert!(decade_ladder(1.0, 0.1).is_err());
    }

    #[test]
    fn component_invariants() {
        assert!(OuComponent::new(Axis::Charge, -1.0, 1.0, "a").is_err());
        assert!(OuComponent::new(Axis::Charge, 1.0, 0.0, "a").is_err());
        assert!(OuComponent::new(Axis::Charge, 0.0, 1.0, "a").is_ok());
    }

    #[test]
    fn duplicate_labels_rejected() {
        let m = NoiseModel::empty("m")
            .with_ladder(Axis::Charge, 1.0, 10.0, 1.0)
            .unwrap();
        assert!(m.clone().with_ladder(Axis::Charge, 1.0, 1.0, 1.0).is_err());
        let m = m.with_ladder(Axis::Magnetic, 1.0, 10.0, 2.0).unwrap();
        assert_eq!(m.len(), 4);
        assert_eq!(m.on_axis(Axis::Magnetic).len(), 2);
        assert_eq!(m.stationary_variance(Axis::Magnetic), 2.0);
        assert_eq!(m.scaled(0.5).stationary_variance(Axis::Charge), 0.5);
    }
}
