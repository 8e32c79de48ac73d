use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    gate_infidelity, nelder_mead, render_into, render_pulse, Generator, Pulse, PulseShapeParams,
    SimplexOptions, AMPLITUDE_RANGE_MV, EDGE_MARGIN_SIGMAS, WIDTH_RANGE_NS,
};
use crate::error::{Error, Result};
use crate::noise::NoiseSample;
use crate::qubit::{propagate_static, ControlTimeline, QubitParams, Unitary2};
use crate::seeds;

/// Compiler settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompileOptions {
    /// Number of starts: the seed shape plus deterministic perturbations of it.
    pub starts: usize,
    /// Infidelity a compiled gate must reach.
    pub threshold: f64,
    /// Infidelity at which a start stops early.
    pub target: f64,
    /// Simplex restarts per start.
    pub rounds: usize,
    pub evals_per_round: usize,
    /// Seed of the perturbation stream.
    pub optimizer_seed: u64,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self {
            starts: 8,
            threshold: 1e-5,
            target: 1e-14,
            rounds: 8,
            evals_per_round: 4000,
            optimizer_seed: 0,
        }
    }
}

/// A generator realised as a sampled voltage waveform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompiledGate {
    pub generator: Generator,
    /// `None` for the zero-duration identity.
    pub shape: Option<PulseShapeParams>,
    pub timeline: ControlTimeline,
    pub duration_ns: f64,
    /// Noiseless infidelity of `timeline` against the generator's target.
    pub infidelity: f64,
}

impl CompiledGate {
    fn identity(fs: f64) -> Self {
        Self {
            generator: Generator::Identity,
            shape: None,
            timeline: ControlTimeline::empty(fs),
            duration_ns: 0.0,
            infidelity: 0.0,
        }
    }

    /// Builds a gate from given samples, recomputing its noiseless infidelity.
    pub fn from_samples(
        generator: Generator,
        samples_mv: Vec<f64>,
        params: &QubitParams,
    ) -> Result<Self> {
        let fs = params.sample_rate_hz;
        let timeline = ControlTimeline::new(samples_mv, fs, generator.as_str());
        let u = propagate_static(&timeline, params, NoiseSample::default())?;
        Ok(Self {
            generator,
            shape: None,
            duration_ns: timeline.len() as f64 * 1e9 / fs,
            infidelity: gate_infidelity(&generator.target(), &u),
            timeline,
        })
    }

    /// Noiseless unitary of the waveform.
    pub fn unitary(&self, params: &QubitParams) -> Result<Unitary2> {
        propagate_static(&self.timeline, params, NoiseSample::default())
    }
}

/// Default seed shape per generator, on a 1 ns grid.
///
/// `X(±π/2)` is a near-2π exchange pulse followed by free precession about the
/// gradient axis; `Z(±π/2)` is two Hadamard-like π pulses around a free
/// gradient rotation.
pub fn default_seed(generator: Generator) -> Option<PulseShapeParams> {
    let p = |start_ns, width_ns, amplitude_mv| Pulse {
        start_ns,
        width_ns,
        amplitude_mv,
    };
    let (pulses, sigma_ns, total_ns) = match generator {
        Generator::Identity => return None,
        Generator::XPlus => (vec![p(10.8, 49.5, 99.9)], 1.6, 71.0),
        Generator::XMinus => (vec![p(55.0, 45.0, 100.0)], 1.6, 110.0),
        Generator::ZPlus => (vec![p(6.4, 30.6, 94.0), p(67.7, 30.4, 94.0)], 2.05, 105.0),
        Generator::ZMinus => (vec![p(6.6, 30.0, 91.1), p(122.5, 30.5, 88.7)], 1.7, 158.0),
    };
    Some(PulseShapeParams {
        pulses,
        sigma_ns,
        total_ns,
    })
}

/// Maps an unconstrained parameter vector onto the feasible shape set.
struct Layout {
    n_pulses: usize,
    total_ns: f64,
    sigma_range: (f64, f64),
}

impl Layout {
    fn encode(shape: &PulseShapeParams) -> Vec<f64> {
        let mut x: Vec<f64> = shape
            .pulses
            .iter()
            .flat_map(|p| [p.start_ns, p.width_ns, p.amplitude_mv])
            .collect();
        x.push(shape.sigma_ns);
        x
    }

    /// Clamps `x` in place and returns the squared distance moved.
    fn project(&self, x: &mut [f64]) -> f64 {
        let mut moved = 0.0;
        let mut clamp = |v: &mut f64, lo: f64, hi: f64| {
            let c = v.max(lo).min(hi.max(lo));
            moved += (c - *v) * (c - *v);
            *v = c;
        };
        let s = 3 * self.n_pulses;
        clamp(&mut x[s], self.sigma_range.0, self.sigma_range.1);
        let margin = EDGE_MARGIN_SIGMAS * x[s];
        let mut lo = margin;
        for i in 0..self.n_pulses {
            clamp(&mut x[3 * i + 1], WIDTH_RANGE_NS.0, WIDTH_RANGE_NS.1);
            clamp(
                &mut x[3 * i + 2],
                AMPLITUDE_RANGE_MV.0,
                AMPLITUDE_RANGE_MV.1,
            );
            let later: f64 = (i + 1..self.n_pulses).map(|j| x[3 * j + 1]).sum();
            let hi = self.total_ns - margin - later - x[3 * i + 1];
            clamp(&mut x[3 * i], lo, hi);
            lo = x[3 * i] + x[3 * i + 1];
        }
        moved
    }

    fn decode(&self, x: &[f64]) -> PulseShapeParams {
        PulseShapeParams {
            pulses: (0..self.n_pulses)
                .map(|i| Pulse {
                    start_ns: x[3 * i],
                    width_ns: x[3 * i + 1],
                    amplitude_mv: x[3 * i + 2],
                })
                .collect(),
            sigma_ns: x[3 * self.n_pulses],
            total_ns: self.total_ns,
        }
    }
}

const PENALTY_PER_UNIT2: f64 = 1e-2;

struct Objective<'a> {
    layout: Layout,
    params: &'a QubitParams,
    target: Unitary2,
    buf: Vec<f64>,
    dt_ns: f64,
}

impl Objective<'_> {
    fn feasible_infidelity(&mut self, x: &[f64]) -> f64 {
        let n = self.layout.n_pulses;
        let pulses: Vec<Pulse> = (0..n)
            .map(|i| Pulse {
                start_ns: x[3 * i],
                width_ns: x[3 * i + 1],
                amplitude_mv: x[3 * i + 2],
            })
            .collect();
        render_into(&pulses, x[3 * n], self.dt_ns, &mut self.buf);
        let u = crate::qubit::propagate_samples(&self.buf, self.params, NoiseSample::default());
        gate_infidelity(&self.target, &u)
    }

    fn value(&mut self, raw: &[f64]) -> f64 {
        let mut x = raw.to_vec();
        let moved = self.layout.project(&mut x);
        self.feasible_infidelity(&x) + PENALTY_PER_UNIT2 * moved
    }
}

/// Optimises the waveform of `generator` in the noiseless setting.
///
/// Start 0 is `seed`; the remaining starts shift the window by whole samples
/// and jitter pulse positions, widths and amplitudes from a stream keyed by
/// the optimizer seed. Each start runs the simplex repeatedly from its best
/// point until `target` is met or the rounds run out. The best start wins,
/// earliest on ties.
pub fn compile_generator(
    generator: Generator,
    params: &QubitParams,
    seed: Option<&PulseShapeParams>,
    opts: &CompileOptions,
) -> Result<CompiledGate> {
    params.validate()?;
    let fs = params.sample_rate_hz;
    if generator == Generator::Identity {
        return Ok(CompiledGate::identity(fs));
    }
    let seed = match seed {
        Some(s) => s.clone(),
        None => default_seed(generator).expect("rotation generators have seeds"),
    };
    let n_samples = seed.sample_count(fs)?;
    if seed.pulses.is_empty() {
        return Err(Error::InvalidPulse("seed shape has no pulses".into()));
    }
    let dt_ns = 1e9 / fs;
    let mut rng = seeds::derive_rng(opts.optimizer_seed, &["compile", generator.as_str()]);

    let mut best: Option<(f64, PulseShapeParams)> = None;
    for start in 0..opts.starts.max(1) {
        let shift = shift_for_start(start);
        let total_samples = (n_samples as i64 + shift).max(1) as usize;
        let total_ns = total_samples as f64 * dt_ns;
        let layout = Layout {
            n_pulses: seed.pulses.len(),
            total_ns,
            sigma_range: PulseShapeParams::sigma_range_ns(),
        };
        let mut x = Layout::encode(&seed);
        if start > 0 {
            for (i, v) in x.iter_mut().enumerate() {
                let scale = if i == 3 * layout.n_pulses {
                    0.1
                } else {
                    [1.0, 1.0, 2.0][i % 3]
                };
                *v += scale * rng.random_range(-1.0..1.0);
            }
        }
        layout.project(&mut x);
        let mut obj = Objective {
            layout,
            params,
            target: generator.target(),
            buf: vec![0.0; total_samples],
            dt_ns,
        };

        let base_step: Vec<f64> = (0..x.len())
            .map(|i| {
                if i == 3 * obj.layout.n_pulses {
                    0.1
                } else {
                    [1.0, 1.0, 2.0][i % 3]
                }
            })
            .collect();
        let simplex = SimplexOptions {
            max_evals: opts.evals_per_round,
            target: opts.target,
            f_tol: 0.0,
            x_tol: 1e-11,
        };
        let mut value = obj.value(&x);
        for round in 0..opts.rounds {
            if value <= opts.target {
                break;
            }
            let shrink = 0.5f64.powi(round as i32);
            let step: Vec<f64> = base_step.iter().map(|s| s * shrink).collect();
            let r = nelder_mead(|v| obj.value(v), &x, &step, &simplex);
            if r.value < value {
                value = r.value;
                x = r.x;
            }
        }
        obj.layout.project(&mut x);
        let infidelity = obj.feasible_infidelity(&x);
        let shape = obj.layout.decode(&x);
        if best.as_ref().is_none_or(|(b, _)| infidelity < *b) {
            best = Some((infidelity, shape));
        }
    }
    let (_, shape) = best.expect("at least one start");
    let timeline = render_pulse(&shape, fs)?;
    let gate = CompiledGate::from_samples(generator, timeline.samples().to_vec(), params)?;
    if !(gate.infidelity <= opts.threshold) {
        return Err(Error::CompilationFailed {
            generator: generator.to_string(),
            best_infidelity: gate.infidelity,
            threshold: opts.threshold,
        });
    }
    Ok(CompiledGate {
        shape: Some(shape),
        ..gate
    })
}

/// Window shift, in samples, of each start: 0, +1, -1, +2, -2, ...
fn shift_for_start(start: usize) -> i64 {
    let k = start.div_ceil(2) as i64;
    if start % 2 == 1 {
        k
    } else {
        -k
    }
}

/// The compiled native gate set for one set of device parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateSet {
    pub params: QubitParams,
    gates: BTreeMap<Generator, CompiledGate>,
}

impl GateSet {
    pub fn new(params: QubitParams, gates: Vec<CompiledGate>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for g in gates {
            if g.timeline.sample_rate_hz() != params.sample_rate_hz {
                return Err(Error::SampleRateMismatch {
                    timeline_hz: g.timeline.sample_rate_hz(),
                    params_hz: params.sample_rate_hz,
                });
            }
            map.insert(g.generator, g);
        }
        map.entry(Generator::Identity)
            .or_insert_with(|| CompiledGate::identity(params.sample_rate_hz));
        for g in Generator::ROTATIONS {
            if !map.contains_key(&g) {
                return Err(Error::MissingGate(g.to_string()));
            }
        }
        Ok(Self { params, gates: map })
    }

    pub fn get(&self, g: Generator) -> &CompiledGate {
        &self.gates[&g]
    }

    pub fn gates(&self) -> impl Iterator<Item = &CompiledGate> {
        self.gates.values()
    }

    /// Back-to-back waveform of a word, in time order.
    pub fn word_timeline(&self, word: &[Generator]) -> ControlTimeline {
        let mut t = ControlTimeline::empty(self.params.sample_rate_hz);
        for g in word {
            t.append(&self.get(*g).timeline, 0)
                .expect("gate set shares one sample rate");
        }
        t
    }

    pub fn max_infidelity(&self) -> f64 {
        self.gates
            .values()
            .map(|g| g.infidelity)
            .fold(0.0, f64::max)
    }
}

/// Compiles the four rotations (in parallel) and adds the identity.
pub fn compile_all(params: &QubitParams, opts: &CompileOptions) -> Result<GateSet> {
    use rayon::prelude::*;
    let gates: Result<Vec<CompiledGate>> = Generator::ROTATIONS
        .par_iter()
        .map(|&g| compile_generator(g, params, None, opts))
        .collect();
    GateSet::new(*params, gates?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubit::exchange_from_voltage;

    #[test]
    fn identity_is_zero_duration() {
        let g = compile_generator(
            Generator::Identity,
            &QubitParams::default(),
            None,
            &CompileOptions::default(),
        )
        .unwrap();
        assert_eq!(g.duration_ns, 0.0);
        assert_eq!(g.infidelity, 0.0);
        assert!(g.timeline.is_empty());
    }

    #[test]
    fn analytic_z_pi_without_gradient() {
        // Δb_z → 0: a 30 ns square pulse with 2π J T = π needs J = 16.67 MHz.
        let p = QubitParams {
            dbz_mhz: 1e-300,
            ..QubitParams::default()
        };
        let j = 1.0 / (2.0 * 30e-9) / 1e6;
        let v = p.voltage_for_exchange(j);
        assert!((v - 97.2).abs() < 0.1, "v = {v}");
        assert!((exchange_from_voltage(v, &p) - 16.667).abs() < 1e-3);
        let shape = PulseShapeParams {
            pulses: vec![Pulse {
                start_ns: 0.0,
                width_ns: 30.0,
                amplitude_mv: v,
            }],
            sigma_ns: 0.0,
            total_ns: 30.0,
        };
        let t = render_pulse(&shape, 1e9).unwrap();
        let u = propagate_static(&t, &p, NoiseSample::default()).unwrap();
        assert!(gate_infidelity(&Unitary2::rz(std::f64::consts::PI), &u) < 1e-20);
    }

    #[test]
    fn projection_is_idempotent_and_feasible() {
        let layout = Layout {
            n_pulses: 2,
            total_ns: 120.0,
            sigma_range: PulseShapeParams::sigma_range_ns(),
        };
        let mut x = vec![-5.0, 10.0, 200.0, 20.0, 70.0, 60.0, 9.0];
        assert!(layout.project(&mut x) > 0.0);
        layout.decode(&x).check_invariants().unwrap();
        let mut y = x.clone();
        assert_eq!(layout.project(&mut y), 0.0);
        assert_eq!(x, y);
    }

    #[test]
    fn start_shifts_alternate() {
        let s: Vec<i64> = (0..6).map(shift_for_start).collect();
        assert_eq!(s, vec![0, 1, -1, 2, -2, 3]);
    }
}
