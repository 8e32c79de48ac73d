use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{exchange_from_voltage, QubitParams};
use crate::error::{Error, Result};

/// A labelled stretch of a timeline: `gate_len` active samples followed by
/// `idle_len` samples held at 0 mV (residual exchange only).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub label: String,
    pub start: usize,
    pub gate_len: usize,
    pub idle_len: usize,
}

impl Segment {
    pub fn end(&self) -> usize {
        self.start + self.gate_len + self.idle_len
    }
}

/// Programmed voltage `V0(t)` in mV sampled at `1/sample_rate_hz`
/// (zero-order hold: sample `k` holds on `[kΔt, (k+1)Δt)`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlTimeline {
    samples_mv: Vec<f64>,
    sample_rate_hz: f64,
    segments: Vec<Segment>,
}

impl ControlTimeline {
    pub fn new(samples_mv: Vec<f64>, sample_rate_hz: f64, label: impl Into<String>) -> Self {
        let n = samples_mv.len();
        Self {
            samples_mv,
            sample_rate_hz,
            segments: vec![Segment {
                label: label.into(),
                start: 0,
                gate_len: n,
                idle_len: 0,
            }],
        }
    }

    pub fn empty(sample_rate_hz: f64) -> Self {
        Self {
            samples_mv: Vec::new(),
            sample_rate_hz,
            segments: Vec::new(),
        }
    }

    /// `n` samples at 0 mV.
    pub fn idle(n: usize, sample_rate_hz: f64) -> Self {
        Self::new(vec![0.0; n], sample_rate_hz, "idle")
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples_mv
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.samples_mv.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples_mv.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples_mv.len() as f64 / self.sample_rate_hz
    }

    /// Appends `other`'s segments shifted to the current end, followed by
    /// `idle_samples` of 0 mV attributed to the last appended segment.
    pub fn append(&mut self, other: &ControlTimeline, idle_samples: usize) -> Result<()> {
        if other.sample_rate_hz != self.sample_rate_hz {
            return Err(Error::SampleRateMismatch {
                timeline_hz: other.sample_rate_hz,
                params_hz: self.sample_rate_hz,
            });
        }
        let offset = self.samples_mv.len();
        self.samples_mv.extend_from_slice(&other.samples_mv);
        if other.segments.is_empty() {
            if idle_samples > 0 {
                self.segments.push(Segment {
                    label: "idle".into(),
                    start: offset,
                    gate_len: 0,
                    idle_len: idle_samples,
                });
            }
        } else {
            self.segments.extend(other.segments.iter().map(|s| Segment {
                start: s.start + offset,
                ..s.clone()
            }));
            self.segments.last_mut().expect("non-empty").idle_len += idle_samples;
        }
        self.samples_mv
            .extend(std::iter::repeat_n(0.0, idle_samples));
        Ok(())
    }

    /// Concatenates timelines back to back with no idling between them.
    pub fn concat<'a, I>(parts: I, sample_rate_hz: f64) -> Result<Self>
    where
        I: IntoIterator<Item = &'a ControlTimeline>,
    {
        let mut out = Self::empty(sample_rate_hz);
        for p in parts {
            out.append(p, 0)?;
        }
        Ok(out)
    }

    /// Writes `time_ns,V_mV,J_MHz` rows.
    pub fn write_csv<W: Write>(&self, params: &QubitParams, mut w: W) -> Result<()> {
        writeln!(w, "time_ns,V_mV,J_MHz")?;
        let dt_ns = 1e9 / self.sample_rate_hz;
        for (k, v) in self.samples_mv.iter().enumerate() {
            writeln!(
                w,
                "{},{},{}",
                k as f64 * dt_ns,
                v,
                exchange_from_voltage(*v, params)
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concatenation_tracks_boundaries() {
        let a = ControlTimeline::new(vec![1.0, 2.0, 3.0], 1e9, "a");
        let b = ControlTimeline::new(vec![4.0, 5.0], 1e9, "b");
        let mut t = ControlTimeline::empty(1e9);
        t.append(&a, 2).unwrap();
        t.append(&b, 0).unwrap();
        assert_eq!(t.samples(), &[1.0, 2.0, 3.0, 0.0, 0.0, 4.0, 5.0]);
        assert_eq!(
            t.segments()[0],
            Segment {
                label: "a".into(),
                start: 0,
                gate_len: 3,
                idle_len: 2
            }
        );
        assert_eq!(t.segments()[1].start, 5);
        assert_eq!(t.segments()[1].end(), t.len());
        assert!((t.duration_s() - 7e-9).abs() < 1e-24);
        let c = ControlTimeline::new(vec![1.0], 2e9, "c");
        assert!(t.append(&c, 0).is_err());
    }

    #[test]
    fn csv_dump() {
        let t = ControlTimeline::new(vec![0.0, 18.0], 1e9, "x");
        let mut buf = Vec::new();
        t.write_csv(&QubitParams::default(), &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "time_ns,V_mV,J_MHz");
        assert_eq!(lines[1], "0,0,0.075");
        assert!(lines[2].starts_with("1,18,0.203"));
    }
}
