//! Error attribution by correlated re-execution.
//!
//! The parent run and every part run consume the same per-component noise
//! realisation; a part only changes which components enter the Hamiltonian.
//! Passes are ordered by the parent metric within each realisation and the
//! same ordering is applied to every part before bootstrapping across
//! realisations.

use std::collections::BTreeSet;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{Axis, ComponentMask, NoiseModel};
use crate::qubit::QubitParams;
use crate::rb::{run_seed_views, RbCircuit, RbRun, RbSchedule, RunOptions};
use crate::seeds;
use crate::stats::percentile_nearest_rank;

/// View name of the unsplit trajectory.
pub const PARENT: &str = "parent";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionKind {
    Axis,
    Frequency,
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Part {
    pub name: String,
    pub labels: Vec<String>,
}

/// Closed frequency interval `[lo_hz, hi_hz]` defining one part.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyBand {
    pub name: String,
    pub lo_hz: f64,
    pub hi_hz: f64,
}

impl FrequencyBand {
    pub fn new(name: impl Into<String>, lo_hz: f64, hi_hz: f64) -> Self {
        Self {
            name: name.into(),
            lo_hz,
            hi_hz,
        }
    }

    fn contains(&self, f: f64) -> bool {
        let tol = 1e-9 * f;
        f >= self.lo_hz - tol && f <= self.hi_hz + tol
    }

    /// Low up to 1 kHz, high from 10 kHz: splits at the duration of the
    /// deepest circuits.
    pub fn millisecond_split() -> Vec<FrequencyBand> {
        vec![Self::new("low", 1e-3, 1e3), Self::new("high", 1e4, 1e7)]
    }

    /// Low up to 1 Hz, high from 10 Hz: splits at the duration of one pass.
    pub fn second_split() -> Vec<FrequencyBand> {
        vec![Self::new("low", 1e-3, 1e0), Self::new("high", 1e1, 1e7)]
    }
}

/// Named, disjoint sets of component labels covering a model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPartition {
    pub kind: PartitionKind,
    pub parts: Vec<Part>,
}

impl TrajectoryPartition {
    pub fn custom(parts: Vec<Part>) -> Self {
        Self {
            kind: PartitionKind::Custom,
            parts,
        }
    }

    /// `charge` and `magnetic` parts.
    pub fn axis(model: &NoiseModel) -> Self {
        let part = |axis: Axis| Part {
            name: axis.to_string(),
            labels: model
                .components()
                .iter()
                .filter(|c| c.axis == axis)
                .map(|c| c.label.clone())
                .collect(),
        };
        Self {
            kind: PartitionKind::Axis,
            parts: vec![part(Axis::Charge), part(Axis::Magnetic)],
        }
    }

    /// Assigns every component to the band containing its frequency.
    pub fn frequency(model: &NoiseModel, bands: &[FrequencyBand]) -> Result<Self> {
        let mut parts: Vec<Part> = bands
            .iter()
            .map(|b| Part {
                name: b.name.clone(),
                labels: Vec::new(),
            })
            .collect();
        for c in model.components() {
            let hits: Vec<usize> = (0..bands.len())
                .filter(|&i| bands[i].contains(c.frequency))
                .collect();
            match hits.as_slice() {
                [i] => parts[*i].labels.push(c.label.clone()),
                [] => {
                    return Err(Error::InvalidPartition(format!(
                        "component {} at {} Hz is in no band",
                        c.label, c.frequency
                    )))
                }
                _ => {
                    return Err(Error::InvalidPartition(format!(
                        "component {} at {} Hz is in several bands",
                        c.label, c.frequency
                    )))
                }
            }
        }
        Ok(Self {
            kind: PartitionKind::Frequency,
            parts,
        })
    }

    /// One part holding everything.
    pub fn trivial(model: &NoiseModel) -> Self {
        Self::custom(vec![Part {
            name: "all".into(),
            labels: model.labels().map(String::from).collect(),
        }])
    }

    pub fn names(&self) -> Vec<String> {
        self.parts.iter().map(|p| p.name.clone()).collect()
    }

    /// Parts must be named uniquely, be pairwise disjoint and cover the model.
    pub fn validate(&self, model: &NoiseModel) -> Result<()> {
        if self.parts.is_empty() {
            return Err(Error::InvalidPartition("no parts".into()));
        }
        let mut names = BTreeSet::new();
        let mut seen = BTreeSet::new();
        for p in &self.parts {
            if p.name == PARENT || !names.insert(p.name.as_str()) {
                return Err(Error::InvalidPartition(format!(
                    "part name {} is reserved or repeated",
                    p.name
                )));
            }
            for l in &p.labels {
                if model.index_of(l).is_none() {
                    return Err(Error::InvalidPartition(format!(
                        "model {} has no component {l}",
                        model.id
                    )));
                }
                if !seen.insert(l.as_str()) {
                    return Err(Error::InvalidPartition(format!(
                        "component {l} is in more than one part"
                    )));
                }
            }
        }
        if let Some(missing) = model.labels().find(|l| !seen.contains(l)) {
            return Err(Error::InvalidPartition(format!(
                "component {missing} is in no part"
            )));
        }
        Ok(())
    }

    /// Parent view followed by one view per part.
    pub fn views(&self, model: &NoiseModel) -> Result<Vec<(String, ComponentMask)>> {
        self.validate(model)?;
        let mut v = vec![(PARENT.to_string(), ComponentMask::all(model))];
        for p in &self.parts {
            v.push((
                p.name.clone(),
                ComponentMask::from_labels(model, p.labels.iter().map(String::as_str))?,
            ));
        }
        Ok(v)
    }
}

/// The parent run and the part runs of one realisation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRun {
    pub parent: RbRun,
    pub parts: Vec<RbRun>,
}

impl SplitRun {
    pub fn part(&self, name: &str) -> Option<&RbRun> {
        self.parts.iter().find(|r| r.view == name)
    }
}

/// Runs one realisation under the parent trajectory and every part.
pub fn split_run(
    model: &NoiseModel,
    seed: u64,
    partition: &TrajectoryPartition,
    circuits: &[RbCircuit],
    schedule: &RbSchedule,
    params: &QubitParams,
    opts: &RunOptions,
) -> Result<SplitRun> {
    let views = partition.views(model)?;
    let mut runs = run_seed_views(model, seed, circuits, schedule, params, &views, opts)?;
    let parent = runs.remove(0);
    Ok(SplitRun {
        parent,
        parts: runs,
    })
}

/// [`split_run`] over many seeds, in parallel, in seed order.
pub fn split_experiment(
    model: &NoiseModel,
    seeds: &[u64],
    partition: &TrajectoryPartition,
    circuits: &[RbCircuit],
    schedule: &RbSchedule,
    params: &QubitParams,
    opts: &RunOptions,
) -> Result<Vec<SplitRun>> {
    partition.validate(model)?;
    seeds
        .par_iter()
        .map(|&s| split_run(model, s, partition, circuits, schedule, params, opts))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOptions {
    pub replicates: usize,
    pub seed: u64,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self {
            replicates: 1000,
            seed: 0,
        }
    }
}

/// Bootstrap mean and 95% percentile interval per rank.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub mean: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Bootstrap summary of one statistic over a band of ranks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandSummary {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

impl BandSummary {
    pub fn contains_zero(&self) -> bool {
        self.lo <= 0.0 && 0.0 <= self.hi
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributionResult {
    /// `r`, or `bitflip:<circuit id>`.
    pub metric: String,
    pub part_names: Vec<String>,
    /// Percentile of each rank, `100 k / (n - 1)`.
    pub percentiles: Vec<f64>,
    /// Per realisation, the argsort of the parent values.
    pub orders: Vec<Vec<usize>>,
    /// Per realisation, in pass order.
    pub parent_raw: Vec<Vec<f64>>,
    /// `[part][realisation]`, in pass order.
    pub parts_raw: Vec<Vec<Vec<f64>>>,
    pub parent_sorted: Vec<Vec<f64>>,
    /// `[part][realisation]`, co-ordered with the parent.
    pub parts_sorted: Vec<Vec<Vec<f64>>>,
    pub parent: Curve,
    pub parts: Vec<Curve>,
    /// `parent - Σ parts` of the per-replicate medians.
    pub gap: Curve,
    pub replicates: usize,
    #[serde(skip)]
    gap_replicates: Vec<Vec<f64>>,
}

fn stable_argsort(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    idx
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn summarize(reps: &[Vec<f64>], ranks: usize) -> Result<Curve> {
    let b = reps.len() as f64;
    let mut curve = Curve {
        mean: Vec::with_capacity(ranks),
        lo: Vec::with_capacity(ranks),
        hi: Vec::with_capacity(ranks),
    };
    for k in 0..ranks {
        let col: Vec<f64> = reps.iter().map(|r| r[k]).collect();
        curve.mean.push(col.iter().sum::<f64>() / b);
        curve.lo.push(percentile_nearest_rank(&col, 2.5)?);
        curve.hi.push(percentile_nearest_rank(&col, 97.5)?);
    }
    Ok(curve)
}

/// Sorts every realisation by its parent values, carries the permutation to
/// the parts, and bootstraps the per-rank median over realisations.
///
/// `parent[s]` holds the pass series of realisation `s`; `parts[p][s]` the
/// series of part `p` for the same realisation.
pub fn sorted_percentile_curves(
    metric: &str,
    part_names: &[String],
    parent: &[Vec<f64>],
    parts: &[Vec<Vec<f64>>],
    opts: &BootstrapOptions,
) -> Result<AttributionResult> {
    let n_real = parent.len();
    if n_real < 10 {
        return Err(Error::InvalidDataset(format!(
            "need at least 10 realisations, got {n_real}"
        )));
    }
    let n_pass = parent[0].len();
    if n_pass < 10 {
        return Err(Error::InvalidDataset(format!(
            "need at least 10 passes, got {n_pass}"
        )));
    }
    if parts.len() != part_names.len() {
        return Err(Error::InvalidDataset(
            "part names and part series differ in count".into(),
        ));
    }
    if opts.replicates == 0 {
        return Err(Error::InvalidArgument(
            "need at least one bootstrap replicate".into(),
        ));
    }
    let all_series = parent.iter().chain(parts.iter().flatten());
    if parts.iter().any(|p| p.len() != n_real) || all_series.clone().any(|s| s.len() != n_pass) {
        return Err(Error::InvalidDataset(
            "mismatched realisation or pass counts".into(),
        ));
    }
    if all_series.flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidDataset("non-finite metric value".into()));
    }

    let orders: Vec<Vec<usize>> = parent.iter().map(|p| stable_argsort(p)).collect();
    let apply = |series: &[Vec<f64>]| -> Vec<Vec<f64>> {
        series
            .iter()
            .zip(&orders)
            .map(|(s, o)| o.iter().map(|&i| s[i]).collect())
            .collect()
    };
    let parent_sorted = apply(parent);
    let parts_sorted: Vec<Vec<Vec<f64>>> = parts.iter().map(|p| apply(p)).collect();

    let mut rng = seeds::derive_rng(opts.seed, &["bootstrap", metric]);
    let draws: Vec<Vec<usize>> = (0..opts.replicates)
        .map(|_| (0..n_real).map(|_| rng.random_range(0..n_real)).collect())
        .collect();
    let medians = |sorted: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        draws
            .par_iter()
            .map(|idx| {
                let mut col = vec![0.0; idx.len()];
                (0..n_pass)
                    .map(|k| {
                        for (c, &s) in col.iter_mut().zip(idx) {
                            *c = sorted[s][k];
                        }
                        median(&mut col)
                    })
                    .collect()
            })
            .collect()
    };
    let parent_reps = medians(&parent_sorted);
    let part_reps: Vec<Vec<Vec<f64>>> = parts_sorted.iter().map(medians).collect();
    let gap_replicates: Vec<Vec<f64>> = (0..opts.replicates)
        .map(|b| {
            (0..n_pass)
                .map(|k| parent_reps[b][k] - part_reps.iter().map(|p| p[b][k]).sum::<f64>())
                .collect()
        })
        .collect();

    let denom = (n_pass - 1) as f64;
    Ok(AttributionResult {
        metric: metric.to_string(),
        part_names: part_names.to_vec(),
        percentiles: (0..n_pass).map(|k| 100.0 * k as f64 / denom).collect(),
        orders,
        parent_raw: parent.to_vec(),
        parts_raw: parts.to_vec(),
        parent: summarize(&parent_reps, n_pass)?,
        parts: part_reps
            .iter()
            .map(|r| summarize(r, n_pass))
            .collect::<Result<_>>()?,
        gap: summarize(&gap_replicates, n_pass)?,
        parent_sorted,
        parts_sorted,
        replicates: opts.replicates,
        gap_replicates,
    })
}

fn collect_series(
    runs: &[SplitRun],
    metric: impl Fn(&RbRun) -> Result<Vec<f64>>,
) -> Result<(Vec<String>, Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>)> {
    let first = runs
        .first()
        .ok_or_else(|| Error::InvalidDataset("no runs".into()))?;
    let names: Vec<String> = first.parts.iter().map(|r| r.view.clone()).collect();
    let mut parent = Vec::with_capacity(runs.len());
    let mut parts = vec![Vec::with_capacity(runs.len()); names.len()];
    for run in runs {
        let these: Vec<&str> = run.parts.iter().map(|r| r.view.as_str()).collect();
        if these != names {
            return Err(Error::InvalidDataset(
                "realisations use different partitions".into(),
            ));
        }
        if run.parent.circuit_ids != first.parent.circuit_ids {
            return Err(Error::InvalidDataset(
                "realisations use different circuits".into(),
            ));
        }
        parent.push(metric(&run.parent)?);
        for (p, r) in parts.iter_mut().zip(&run.parts) {
            p.push(metric(r)?);
        }
    }
    Ok((names, parent, parts))
}

/// Attribution of the per-pass RB number.
pub fn rb_attribution(runs: &[SplitRun], opts: &BootstrapOptions) -> Result<AttributionResult> {
    let (names, parent, parts) = collect_series(runs, |r| Ok(r.r_series()))?;
    sorted_percentile_curves("r", &names, &parent, &parts, opts)
}

/// Attribution of one circuit's per-pass bitflip probability.
pub fn per_circuit_attribution(
    circuit_id: &str,
    runs: &[SplitRun],
    opts: &BootstrapOptions,
) -> Result<AttributionResult> {
    let (names, parent, parts) = collect_series(runs, |r| r.bitflip_series(circuit_id))?;
    sorted_percentile_curves(
        &format!("bitflip:{circuit_id}"),
        &names,
        &parent,
        &parts,
        opts,
    )
}

/// The signed additivity gap `parent - Σ parts` with its bootstrap interval.
pub fn additivity_gap(result: &AttributionResult) -> &Curve {
    &result.gap
}

impl AttributionResult {
    pub fn passes(&self) -> usize {
        self.percentiles.len()
    }

    pub fn realisations(&self) -> usize {
        self.parent_raw.len()
    }

    pub fn part_index(&self, name: &str) -> Option<usize> {
        self.part_names.iter().position(|n| n == name)
    }

    /// Ranks whose percentile lies in `[lo, hi]`.
    pub fn ranks_in(&self, lo: f64, hi: f64) -> Vec<usize> {
        let eps = 1e-9;
        (0..self.passes())
            .filter(|&k| self.percentiles[k] >= lo - eps && self.percentiles[k] <= hi + eps)
            .collect()
    }

    /// Ranks in `[lo, hi]`, or the rank(s) nearest its midpoint when the
    /// rank grid is too coarse to land inside.
    pub fn band_ranks(&self, lo: f64, hi: f64) -> Vec<usize> {
        let inside = self.ranks_in(lo, hi);
        if !inside.is_empty() || self.passes() == 0 {
            return inside;
        }
        let mid = 0.5 * (lo + hi);
        let dist: Vec<f64> = self.percentiles.iter().map(|p| (p - mid).abs()).collect();
        let best = dist.iter().cloned().fold(f64::INFINITY, f64::min);
        (0..self.passes())
            .filter(|&k| dist[k] <= best + 1e-9)
            .collect()
    }

    /// Bootstrap summary of the gap averaged over [`band_ranks`](Self::band_ranks).
    pub fn band_gap(&self, lo: f64, hi: f64) -> Result<BandSummary> {
        let ranks = self.band_ranks(lo, hi);
        if ranks.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "no ranks between percentiles {lo} and {hi}"
            )));
        }
        if self.gap_replicates.is_empty() {
            return Err(Error::InvalidDataset(
                "bootstrap replicates are not available".into(),
            ));
        }
        let vals: Vec<f64> = self
            .gap_replicates
            .iter()
            .map(|rep| ranks.iter().map(|&k| rep[k]).sum::<f64>() / ranks.len() as f64)
            .collect();
        Ok(BandSummary {
            mean: vals.iter().sum::<f64>() / vals.len() as f64,
            lo: percentile_nearest_rank(&vals, 2.5)?,
            hi: percentile_nearest_rank(&vals, 97.5)?,
        })
    }

    /// Per realisation and rank, `parent - Σ parts` without bootstrapping.
    pub fn realisation_gaps(&self) -> Vec<Vec<f64>> {
        (0..self.realisations())
            .map(|s| {
                (0..self.passes())
                    .map(|k| {
                        self.parent_sorted[s][k]
                            - self.parts_sorted.iter().map(|p| p[s][k]).sum::<f64>()
                    })
                    .collect()
            })
            .collect()
    }

    /// Re-derives the sorted series from the raw ones and the stored orders.
    pub fn check_ordering(&self) -> bool {
        let sorted_ok = self
            .parent_sorted
            .iter()
            .all(|s| s.windows(2).all(|w| w[0] <= w[1]));
        let same = |raw: &[Vec<f64>], sorted: &[Vec<f64>]| {
            raw.iter()
                .zip(sorted)
                .zip(&self.orders)
                .all(|((r, s), o)| o.iter().zip(s).all(|(&i, &v)| r[i] == v))
        };
        sorted_ok
            && same(&self.parent_raw, &self.parent_sorted)
            && self
                .parts_raw
                .iter()
                .zip(&self.parts_sorted)
                .all(|(r, s)| same(r, s))
    }

    /// `percentile,parent_mean,parent_lo,parent_hi,part_<name>_mean,...,gap_mean,gap_lo,gap_hi`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "percentile,parent_mean,parent_lo,parent_hi")?;
        for n in &self.part_names {
            write!(w, ",part_{n}_mean,part_{n}_lo,part_{n}_hi")?;
        }
        writeln!(w, ",gap_mean,gap_lo,gap_hi")?;
        for k in 0..self.passes() {
            write!(
                w,
                "{},{},{},{}",
                self.percentiles[k], self.parent.mean[k], self.parent.lo[k], self.parent.hi[k]
            )?;
            for c in &self.parts {
                write!(w, ",{},{},{}", c.mean[k], c.lo[k], c.hi[k])?;
            }
            writeln!(
                w,
                ",{},{},{}",
                self.gap.mean[k], self.gap.lo[k], self.gap.hi[k]
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{OuComponent, TrajectoryCursor};
    use crate::pulse::{test_gates, CliffordGroup};
    use crate::rb::sample_circuits;

    fn model() -> NoiseModel {
        NoiseModel::empty("m")
            .with_ladder(Axis::Charge, 1e-3, 1e7, 4e-8)
            .unwrap()
            .with_ladder(Axis::Magnetic, 1e-3, 1e0, 1e9)
            .unwrap()
    }

    fn synthetic(n_real: usize, n_pass: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = seeds::derive_rng(seed, &["test"]);
        (0..n_real)
            .map(|_| (0..n_pass).map(|_| rng.random::<f64>() * 0.01).collect())
            .collect()
    }

    #[test]
    fn partitions_validate() {
        let m = model();
        TrajectoryPartition::axis(&m).validate(&m).unwrap();
        TrajectoryPartition::trivial(&m).validate(&m).unwrap();
        let charge = m.on_axis(Axis::Charge);
        let f =
            TrajectoryPartition::frequency(&charge, &FrequencyBand::millisecond_split()).unwrap();
        f.validate(&charge).unwrap();
        assert_eq!(f.parts[0].labels.len(), 7);
        assert_eq!(f.parts[1].labels.len(), 4);
        let g = TrajectoryPartition::frequency(&charge, &FrequencyBand::second_split()).unwrap();
        assert_eq!(g.parts[0].labels.len(), 4);
        assert!(
            TrajectoryPartition::frequency(&charge, &[FrequencyBand::new("a", 1e-3, 1.0)]).is_err()
        );

        let overlap = TrajectoryPartition::custom(vec![
            Part {
                name: "a".into(),
                labels: m.labels().map(String::from).collect(),
            },
            Part {
                name: "b".into(),
                labels: vec![m.components()[0].label.clone()],
            },
        ]);
        assert!(overlap.validate(&m).is_err());
        let missing = TrajectoryPartition::custom(vec![Part {
            name: "a".into(),
            labels: vec![],
        }]);
        assert!(missing.validate(&m).is_err());
        let reserved = TrajectoryPartition::custom(vec![Part {
            name: PARENT.into(),
            labels: m.labels().map(String::from).collect(),
        }]);
        assert!(reserved.validate(&m).is_err());
    }

    #[test]
    fn part_sums_reproduce_parent_noise() {
        let m = model();
        let views = TrajectoryPartition::axis(&m).views(&m).unwrap();
        let mut cursor = TrajectoryCursor::new(&m, 1, 0);
        for _ in 0..1000 {
            let v = cursor.values().to_vec();
            let parent = views[0].1.sample(&v);
            let (mut dv, mut db) = (0.0, 0.0);
            for (_, mask) in &views[1..] {
                let s = mask.sample(&v);
                dv += s.delta_v;
                db += s.delta_bz;
            }
            assert!((dv - parent.delta_v).abs() <= 1e-15 * parent.delta_v.abs().max(1e-12));
            assert!((db - parent.delta_bz).abs() <= 1e-15 * parent.delta_bz.abs().max(1.0));
            cursor.advance(1e-6).unwrap();
        }
    }

    #[test]
    fn invalid_partition_rejected_before_running() {
        let m = model();
        let bad = TrajectoryPartition::custom(vec![Part {
            name: "x".into(),
            labels: vec!["nope".into()],
        }]);
        let s = RbSchedule {
            depths: vec![2, 4, 8],
            circuits_per_depth: 1,
            passes: 1,
            ..Default::default()
        };
        let err = split_run(
            &m,
            0,
            &bad,
            &[],
            &s,
            &QubitParams::default(),
            &RunOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidPartition(_)));
    }

    #[test]
    fn trivial_and_empty_parts() {
        let m = NoiseModel::new(
            "q",
            vec![
                OuComponent::new(Axis::Charge, 4e-8, 1e3, "c").unwrap(),
                OuComponent::new(Axis::Magnetic, 1e10, 1e2, "b").unwrap(),
            ],
        )
        .unwrap();
        let group = CliffordGroup::build().unwrap();
        let s = RbSchedule {
            depths: vec![2, 4, 8],
            circuits_per_depth: 2,
            passes: 2,
            spam_prep_us: 1.0,
            spam_meas_us: 1.0,
            ..Default::default()
        };
        let cs = sample_circuits(&s, &group, test_gates(), 3).unwrap();
        let p = QubitParams::default();
        let o = RunOptions::default();

        let t = split_run(&m, 5, &TrajectoryPartition::trivial(&m), &cs, &s, &p, &o).unwrap();
        assert_eq!(t.parent.passes, t.parts[0].passes);

        let empty = TrajectoryPartition::custom(vec![
            Part {
                name: "everything".into(),
                labels: vec!["c".into(), "b".into()],
            },
            Part {
                name: "nothing".into(),
                labels: vec![],
            },
        ]);
        let e = split_run(&m, 5, &empty, &cs, &s, &p, &o).unwrap();
        assert_eq!(e.parent.passes, e.part("everything").unwrap().passes);
        assert!(e
            .part("nothing")
            .unwrap()
            .r_series()
            .iter()
            .all(|&r| r <= 1e-5));
    }

    #[test]
    fn identical_part_gives_zero_gap() {
        let parent = synthetic(12, 15, 1);
        let r = sorted_percentile_curves(
            "r",
            &["copy".into()],
            &parent,
            &[parent.clone()],
            &BootstrapOptions {
                replicates: 200,
                seed: 1,
            },
        )
        .unwrap();
        assert_eq!(r.parent, r.parts[0]);
        assert!(r
            .gap
            .mean
            .iter()
            .chain(&r.gap.lo)
            .chain(&r.gap.hi)
            .all(|&g| g == 0.0));
        assert!(r.check_ordering());
    }

    #[test]
    fn constant_part_is_flat() {
        let parent = synthetic(10, 12, 2);
        let constant = vec![vec![0.004; 12]; 10];
        let r = sorted_percentile_curves(
            "r",
            &["c".into()],
            &parent,
            &[constant],
            &BootstrapOptions {
                replicates: 100,
                seed: 0,
            },
        )
        .unwrap();
        assert!(r.parts[0].mean.iter().all(|&m| (m - 0.004).abs() < 1e-15));
        // the parent curve is nondecreasing in rank
        assert!(r.parent.mean.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn ordering_follows_parent() {
        let parent = vec![vec![3.0, 1.0, 2.0, 0.0, 5.0, 4.0, 9.0, 8.0, 7.0, 6.0]; 10];
        let part = vec![(0..10).map(|i| i as f64).collect::<Vec<_>>(); 10];
        let r = sorted_percentile_curves(
            "r",
            &["p".into()],
            &parent,
            &[part],
            &BootstrapOptions {
                replicates: 10,
                seed: 0,
            },
        )
        .unwrap();
        assert_eq!(r.orders[0], vec![3, 1, 2, 0, 5, 4, 9, 8, 7, 6]);
        assert_eq!(
            r.parts_sorted[0][0],
            vec![3.0, 1.0, 2.0, 0.0, 5.0, 4.0, 9.0, 8.0, 7.0, 6.0]
        );
        assert!(r.check_ordering());
        assert_eq!(r.percentiles[0], 0.0);
        assert_eq!(r.percentiles[9], 100.0);
    }

    #[test]
    fn rejects_bad_shapes() {
        let opts = BootstrapOptions::default();
        assert!(sorted_percentile_curves("r", &[], &synthetic(9, 10, 0), &[], &opts).is_err());
        assert!(sorted_percentile_curves("r", &[], &synthetic(10, 9, 0), &[], &opts).is_err());
        let mut short = synthetic(10, 10, 0);
        short[3].pop();
        assert!(sorted_percentile_curves(
            "r",
            &["a".into()],
            &synthetic(10, 10, 0),
            &[short],
            &opts
        )
        .is_err());
    }

    #[test]
    fn ci_narrows_with_more_realisations() {
        let width = |n: usize| {
            let parent = synthetic(n, 11, 7);
            let r = sorted_percentile_curves(
                "r",
                &[],
                &parent,
                &[],
                &BootstrapOptions {
                    replicates: 1000,
                    seed: 3,
                },
            )
            .unwrap();
            let k = 5;
            r.parent.hi[k] - r.parent.lo[k]
        };
        let ratio = width(40) / width(160);
        assert!((ratio - 2.0).abs() < 0.6, "{ratio}");
    }

    #[test]
    fn band_gap_and_csv() {
        let parent = synthetic(10, 21, 4);
        let half: Vec<Vec<f64>> = parent
            .iter()
            .map(|s| s.iter().map(|v| 0.5 * v).collect())
            .collect();
        let r = sorted_percentile_curves(
            "r",
            &["a".into(), "b".into()],
            &parent,
            &[half.clone(), half],
            &BootstrapOptions {
                replicates: 50,
                seed: 0,
            },
        )
        .unwrap();
        assert_eq!(r.ranks_in(45.0, 55.0), vec![9, 10, 11]);
        let b = r.band_gap(45.0, 55.0).unwrap();
        assert!(b.mean.abs() < 1e-15 && b.contains_zero());
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("percentile,parent_mean,parent_lo,parent_hi,part_a_mean"));
        assert_eq!(text.lines().count(), 22);
    }

    #[test]
    fn coarse_rank_grid_uses_nearest_ranks() {
        let parent = synthetic(10, 10, 4);
        let r = sorted_percentile_curves(
            "r",
            &["all".into()],
            &parent,
            &[parent.clone()],
            &BootstrapOptions {
                replicates: 20,
                seed: 0,
            },
        )
        .unwrap();
        assert!(r.ranks_in(45.0, 55.0).is_empty());
        assert_eq!(r.band_ranks(45.0, 55.0), vec![4, 5]);
        assert_eq!(r.band_ranks(0.0, 10.0), vec![0]);
        assert!(r.band_gap(45.0, 55.0).unwrap().contains_zero());
    }
}
