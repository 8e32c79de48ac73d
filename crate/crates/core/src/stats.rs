//! Empirical CDFs, two-sample Kolmogorov-Smirnov distances and type I/II
//! error-rate grids over models and seeds.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rb::RbRun;
use crate::seeds;

/// Which quantity a dataset holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Per-pass RB number.
    R,
    /// Pass-to-pass change `r_{i+1} - r_i`.
    DeltaR,
    /// Per-pass bitflip probability of one circuit.
    Bitflip,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::R => "r",
            Metric::DeltaR => "delta_r",
            Metric::Bitflip => "bitflip",
        }
    }

    fn range(self) -> (f64, f64) {
        match self {
            Metric::R => (0.0, 0.5),
            Metric::DeltaR => (-0.5, 0.5),
            Metric::Bitflip => (0.0, 1.0),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "r" => Ok(Metric::R),
            "delta_r" | "dr" => Ok(Metric::DeltaR),
            "bitflip" => Ok(Metric::Bitflip),
            _ => Err(Error::InvalidArgument(format!("unknown metric {s}"))),
        }
    }
}

/// Samples of one metric from one model and seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricDataset {
    pub metric: Metric,
    pub model_id: String,
    pub seed: u64,
    /// Set for per-circuit metrics.
    pub circuit_id: Option<String>,
    values: Vec<f64>,
}

impl MetricDataset {
    pub fn new(
        metric: Metric,
        model_id: impl Into<String>,
        seed: u64,
        circuit_id: Option<String>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let model_id = model_id.into();
        if values.is_empty() {
            return Err(Error::InvalidDataset(format!(
                "{metric} dataset for {model_id}/{seed} is empty"
            )));
        }
        let (lo, hi) = metric.range();
        if let Some(v) = values
            .iter()
            .find(|v| !(v.is_finite() && **v >= lo && **v <= hi))
        {
            return Err(Error::InvalidDataset(format!(
                "{metric} value {v} for {model_id}/{seed} outside [{lo}, {hi}]"
            )));
        }
        Ok(Self {
            metric,
            model_id,
            seed,
            circuit_id,
            values,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn r_from_run(run: &RbRun) -> Result<Self> {
        Self::new(Metric::R, &run.model_id, run.seed, None, run.r_series())
    }

    pub fn delta_r_from_run(run: &RbRun) -> Result<Self> {
        Self::new(
            Metric::DeltaR,
            &run.model_id,
            run.seed,
            None,
            delta_metric(run)?,
        )
    }

    pub fn bitflip_from_run(run: &RbRun, circuit_id: &str) -> Result<Self> {
        Self::new(
            Metric::Bitflip,
            &run.model_id,
            run.seed,
            Some(circuit_id.to_string()),
            run.bitflip_series(circuit_id)?,
        )
    }

    pub fn ecdf(&self) -> Ecdf {
        Ecdf::new(&self.values)
    }
}

/// Pass-to-pass differences of the fitted RB number.
pub fn delta_metric(run: &RbRun) -> Result<Vec<f64>> {
    delta_series(&run.r_series())
}

pub fn delta_series(r: &[f64]) -> Result<Vec<f64>> {
    if r.len() < 2 {
        return Err(Error::InvalidDataset(format!(
            "need at least 2 passes, got {}",
            r.len()
        )));
    }
    Ok(r.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Right-continuous empirical CDF, `F(x) = #{v ≤ x} / n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    /// Panics on NaN.
    pub fn new(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN in eCDF input"));
        Self { sorted }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    /// `sup_x |F_self(x) - F_other(x)|`, evaluated at every jump.
    pub fn ks_distance(&self, other: &Ecdf) -> f64 {
        let (a, b) = (&self.sorted, &other.sorted);
        let (n, m) = (a.len() as f64, b.len() as f64);
        let (mut i, mut j) = (0usize, 0usize);
        let mut d: f64 = 0.0;
        while i < a.len() && j < b.len() {
            let x = a[i].min(b[j]);
            while i < a.len() && a[i] <= x {
                i += 1;
            }
            while j < b.len() && b[j] <= x {
                j += 1;
            }
            d = d.max((i as f64 / n - j as f64 / m).abs());
        }
        // past the end of one sample the gap only shrinks
        d
    }
}

/// Two-sample K-S statistic between raw samples.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidDataset(
            "K-S statistic of an empty sample".into(),
        ));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::InvalidDataset("NaN in K-S input".into()));
    }
    Ok(Ecdf::new(a).ks_distance(&Ecdf::new(b)))
}

pub fn ks_statistic(a: &MetricDataset, b: &MetricDataset) -> Result<f64> {
    ks_distance(&a.values, &b.values)
}

/// Nearest-rank percentile: the smallest value with at least `p`% of the set
/// at or below it.
pub fn percentile_nearest_rank(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidDataset("percentile of an empty set".into()));
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "percentile {p} outside [0, 100]"
        )));
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let rank = (p * v.len() as f64 / 100.0).ceil() as usize;
    Ok(v[rank.clamp(1, v.len()) - 1])
}

/// Rejection threshold `d` from the self-distances of one model.
pub fn threshold(self_distances: &[f64], p_x: f64) -> Result<f64> {
    if self_distances.is_empty() {
        return Err(Error::InvalidDataset(
            "no self-distances; a model needs at least 2 seeds".into(),
        ));
    }
    percentile_nearest_rank(self_distances, p_x)
}

/// K-S distances over all unordered seed pairs `s < s'`.
pub fn self_distances(datasets: &[&MetricDataset]) -> Vec<f64> {
    let ecdfs: Vec<Ecdf> = datasets.iter().map(|d| d.ecdf()).collect();
    pairwise_upper(&ecdfs)
}

fn pairwise_upper(ecdfs: &[Ecdf]) -> Vec<f64> {
    let n = ecdfs.len();
    (0..n)
        .into_par_iter()
        .flat_map_iter(|s| (s + 1..n).map(move |t| (s, t)))
        .map(|(s, t)| ecdfs[s].ks_distance(&ecdfs[t]))
        .collect()
}

/// Cross-pair enumeration for the off-diagonal cells.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GridOptions {
    /// Use at most this many ordered cross pairs per cell, drawn without
    /// replacement; `None` uses all of them.
    pub max_cross_pairs: Option<usize>,
    /// Keys the subsampling stream.
    pub subsample_seed: u64,
}

/// Empirical type I/II error rates.
///
/// Row `j` is the reference model, column `j'` the tested model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsGrid {
    pub metric: Metric,
    pub p_x: f64,
    pub models: Vec<String>,
    pub thresholds: Vec<f64>,
    /// Fraction of self-pairs with `D > d_j`.
    pub alpha: Vec<f64>,
    /// Fraction of cross pairs with `D ≤ d_j`; `None` on the diagonal.
    pub beta: Vec<Vec<Option<f64>>>,
}

impl KsGrid {
    /// `α_j` on the diagonal, `β_jj'` elsewhere.
    pub fn rate(&self, reference: usize, tested: usize) -> f64 {
        if reference == tested {
            self.alpha[reference]
        } else {
            self.beta[reference][tested].expect("off-diagonal cell")
        }
    }

    pub fn index_of(&self, model: &str) -> Option<usize> {
        self.models.iter().position(|m| m == model)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidArgument(e.to_string()))
    }

    /// Square matrix of rates with a header row of tested models and a first
    /// column of reference models, followed by the thresholds row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "reference")?;
        for m in &self.models {
            write!(w, ",{m}")?;
        }
        writeln!(w)?;
        for (j, m) in self.models.iter().enumerate() {
            write!(w, "{m}")?;
            for k in 0..self.models.len() {
                write!(w, ",{}", self.rate(j, k))?;
            }
            writeln!(w)?;
        }
        write!(w, "threshold")?;
        for d in &self.thresholds {
            write!(w, ",{d}")?;
        }
        writeln!(w)?;
        Ok(())
    }
}

/// Groups datasets by model in order of first appearance.
fn group_by_model(
    datasets: &[MetricDataset],
) -> Result<(Metric, Vec<(String, Vec<&MetricDataset>)>)> {
    let first = datasets
        .first()
        .ok_or_else(|| Error::InvalidDataset("no datasets".into()))?;
    let metric = first.metric;
    let mut groups: Vec<(String, Vec<&MetricDataset>)> = Vec::new();
    for d in datasets {
        if d.metric != metric {
            return Err(Error::InvalidDataset(format!(
                "mixed metrics {metric} and {}",
                d.metric
            )));
        }
        match groups.iter_mut().find(|(m, _)| *m == d.model_id) {
            Some((_, g)) => {
                if g.iter().any(|o| o.seed == d.seed) {
                    return Err(Error::InvalidDataset(format!(
                        "duplicate seed {} for {}",
                        d.seed, d.model_id
                    )));
                }
                g.push(d)
            }
            None => groups.push((d.model_id.clone(), vec![d])),
        }
    }
    for (m, g) in &groups {
        if g.len() < 2 {
            return Err(Error::InvalidDataset(format!(
                "model {m} has {} seed(s); need at least 2",
                g.len()
            )));
        }
    }
    Ok((metric, groups))
}

/// Builds the error grid for datasets spanning several models and seeds.
pub fn error_grid(datasets: &[MetricDataset], p_x: f64) -> Result<KsGrid> {
    error_grid_with(datasets, p_x, &GridOptions::default())
}

pub fn error_grid_with(datasets: &[MetricDataset], p_x: f64, opts: &GridOptions) -> Result<KsGrid> {
    let (metric, groups) = group_by_model(datasets)?;
    let ecdfs: Vec<Vec<Ecdf>> = groups
        .iter()
        .map(|(_, g)| g.iter().map(|d| d.ecdf()).collect())
        .collect();
    let n = groups.len();

    let mut thresholds = Vec::with_capacity(n);
    let mut alpha = Vec::with_capacity(n);
    for e in &ecdfs {
        let selfd = pairwise_upper(e);
        let d = threshold(&selfd, p_x)?;
        thresholds.push(d);
        alpha.push(selfd.iter().filter(|&&x| x > d).count() as f64 / selfd.len() as f64);
    }

    let cells: Vec<(usize, usize)> = (0..n)
        .flat_map(|j| (0..n).filter(move |&k| k != j).map(move |k| (j, k)))
        .collect();
    let rates: Vec<f64> = cells
        .par_iter()
        .map(|&(j, k)| {
            let (a, b) = (&ecdfs[j], &ecdfs[k]);
            let total = a.len() * b.len();
            let pairs: Vec<usize> = match opts.max_cross_pairs {
                Some(limit) if limit < total => {
                    let mut rng = seeds::derive_rng(
                        opts.subsample_seed,
                        &["cross-pairs", &groups[j].0, &groups[k].0],
                    );
                    sample(&mut rng, total, limit.max(1)).into_vec()
                }
                _ => (0..total).collect(),
            };
            let hits = pairs
                .iter()
                .filter(|&&p| a[p / b.len()].ks_distance(&b[p % b.len()]) <= thresholds[j])
                .count();
            hits as f64 / pairs.len() as f64
        })
        .collect();

    let mut beta = vec![vec![None; n]; n];
    for (&(j, k), &r) in cells.iter().zip(&rates) {
        beta[j][k] = Some(r);
    }
    Ok(KsGrid {
        metric,
        p_x,
        models: groups.into_iter().map(|(m, _)| m).collect(),
        thresholds,
        alpha,
        beta,
    })
}

/// Best, median and worst case over the per-circuit grids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerCircuitGrids {
    pub circuits: Vec<String>,
    pub grids: Vec<KsGrid>,
    pub best: KsGrid,
    pub median: KsGrid,
    pub worst: KsGrid,
}

/// One grid per circuit, then the cellwise 0th, 50th and 100th percentiles.
///
/// Every model must carry datasets for the same set of circuits.
pub fn per_circuit_grid(datasets: &[MetricDataset], p_x: f64) -> Result<PerCircuitGrids> {
    let mut by_circuit: BTreeMap<&str, Vec<MetricDataset>> = BTreeMap::new();
    for d in datasets {
        let id = d.circuit_id.as_deref().ok_or_else(|| {
            Error::InvalidDataset(format!(
                "dataset {}/{} has no circuit id",
                d.model_id, d.seed
            ))
        })?;
        by_circuit.entry(id).or_default().push(d.clone());
    }
    if by_circuit.is_empty() {
        return Err(Error::InvalidDataset("no datasets".into()));
    }
    let key = |v: &[MetricDataset]| {
        let mut k: Vec<(String, u64)> = v.iter().map(|d| (d.model_id.clone(), d.seed)).collect();
        k.sort();
        k
    };
    let reference = key(by_circuit.values().next().expect("nonempty"));
    for (c, v) in &by_circuit {
        if key(v) != reference {
            return Err(Error::InvalidDataset(format!(
                "circuit {c} is not shared by every model and seed"
            )));
        }
    }
    let circuits: Vec<String> = by_circuit.keys().map(|c| c.to_string()).collect();
    let grids: Vec<KsGrid> = by_circuit
        .values()
        .map(|v| error_grid(v, p_x))
        .collect::<Result<_>>()?;
    for g in &grids[1..] {
        if g.models != grids[0].models {
            return Err(Error::InvalidDataset(
                "model order differs between circuits".into(),
            ));
        }
    }
    let cellwise = |p: f64| -> Result<KsGrid> {
        let n = grids[0].models.len();
        let pick = |f: &dyn Fn(&KsGrid) -> f64| -> Result<f64> {
            percentile_nearest_rank(&grids.iter().map(f).collect::<Vec<_>>(), p)
        };
        let mut out = grids[0].clone();
        for j in 0..n {
            out.thresholds[j] = pick(&|g| g.thresholds[j])?;
            out.alpha[j] = pick(&|g| g.alpha[j])?;
            for k in 0..n {
                if j != k {
                    out.beta[j][k] = Some(pick(&|g| g.rate(j, k))?);
                }
            }
        }
        Ok(out)
    };
    Ok(PerCircuitGrids {
        best: cellwise(0.0)?,
        median: cellwise(50.0)?,
        worst: cellwise(100.0)?,
        circuits,
        grids,
    })
}

/// Writes datasets in long form: `metric,model,seed,circuit_id,index,value`.
pub fn write_datasets_csv<W: Write>(datasets: &[MetricDataset], mut w: W) -> Result<()> {
    writeln!(w, "metric,model,seed,circuit_id,index,value")?;
    for d in datasets {
        let c = d.circuit_id.as_deref().unwrap_or("");
        for (i, v) in d.values.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                d.metric, d.model_id, d.seed, c, i, v
            )?;
        }
    }
    Ok(())
}

/// Reads the long-form CSV written by [`write_datasets_csv`]. Rows of one
/// dataset must be contiguous and in index order.
pub fn read_datasets_csv<R: BufRead>(r: R) -> Result<Vec<MetricDataset>> {
    let mut out = Vec::new();
    let mut current: Option<(Metric, String, u64, Option<String>, Vec<f64>)> = None;
    let bad = |line: usize, m: &str| Error::InvalidDataset(format!("line {line}: {m}"));
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if n == 0 {
            if line.trim() != "metric,model,seed,circuit_id,index,value" {
                return Err(bad(1, "unexpected header"));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(bad(n + 1, "expected 6 fields"));
        }
        let metric: Metric = f[0].parse()?;
        let seed: u64 = f[2].parse().map_err(|_| bad(n + 1, "bad seed"))?;
        let circuit = (!f[3].is_empty()).then(|| f[3].to_string());
        let index: usize = f[4].parse().map_err(|_| bad(n + 1, "bad index"))?;
        let value: f64 = f[5].parse().map_err(|_| bad(n + 1, "bad value"))?;
        let same = matches!(&current, Some((m, model, s, c, _)) if *m == metric && model == f[1] && *s == seed && *c == circuit);
        if !same {
            if let Some((m, model, s, c, v)) = current.take() {
                out.push(MetricDataset::new(m, model, s, c, v)?);
            }
            current = Some((metric, f[1].to_string(), seed, circuit, Vec::new()));
        }
        let values = &mut current.as_mut().expect("set above").4;
        if index != values.len() {
            return Err(bad(n + 1, "index out of order"));
        }
        values.push(value);
    }
    if let Some((m, model, s, c, v)) = current {
        out.push(MetricDataset::new(m, model, s, c, v)?);
    }
    Ok(out)
}
