//! Command-line driver for driftlab.
//!
//! Every verb reads one JSON experiment config, writes its outputs under an
//! output directory and records them in `manifest-<verb>.json`.

pub mod commands;
pub mod config;
pub mod manifest;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use driftlab_core::stats::Metric;

use config::{ExperimentConfig, SeedRange};
use manifest::OutputSet;

#[derive(Debug, Parser)]
#[command(
    name = "driftlab",
    version,
    about = "Wall-clock RB simulation of a drifting singlet-triplet qubit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Experiment config (JSON). Without it the built-in defaults are used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed indices `A..B`, overriding `run.seeds`.
    #[arg(long)]
    pub seeds: Option<SeedRange>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShotsMode {
    Exact,
    Shots,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit per-component powers to the T2* targets.
    Calibrate {
        #[command(flatten)]
        common: Common,
    },
    /// Compile the Clifford generators, reusing a matching gate cache.
    Compile {
        #[command(flatten)]
        common: Common,
        /// Recompile even if the cache matches.
        #[arg(long)]
        force: bool,
    },
    /// Run RB passes on a shared noise trajectory per seed.
    Rb {
        #[command(flatten)]
        common: Common,
        /// Restrict to these models (repeatable).
        #[arg(long = "model")]
        models: Vec<String>,
        /// Alias of `--seeds`.
        #[arg(long)]
        seed_range: Option<SeedRange>,
        #[arg(long)]
        passes: Option<usize>,
        /// Comma-separated depths.
        #[arg(long, value_delimiter = ',')]
        depths: Option<Vec<usize>>,
        /// Preparation and measurement window, each, in μs.
        #[arg(long)]
        spam_us: Option<f64>,
        #[arg(long, value_enum)]
        shots_mode: Option<ShotsMode>,
    },
    /// Type I/II error grids from two-sample K-S distances.
    Validate {
        #[command(flatten)]
        common: Common,
        /// `r`, `delta_r` or `bitflip`.
        #[arg(long)]
        metric: Option<Metric>,
        #[arg(long)]
        p_x: Option<f64>,
        /// Long-form dataset CSV to use instead of stored RB runs.
        #[arg(long)]
        datasets: Option<PathBuf>,
        /// Restrict to these models (repeatable).
        #[arg(long = "model")]
        models: Vec<String>,
    },
    /// Sorted-percentile attribution of RB metrics to noise parts.
    Attribute {
        #[command(flatten)]
        common: Common,
        /// Only these partitions (repeatable).
        #[arg(long = "partition")]
        partitions: Vec<String>,
    },
    /// Continuous and sampled spectra of the models.
    Psd {
        #[command(flatten)]
        common: Common,
        #[arg(long = "model")]
        models: Vec<String>,
    },
    /// Monte Carlo FID against the analytic envelope.
    Fid {
        #[command(flatten)]
        common: Common,
        #[arg(long = "model")]
        models: Vec<String>,
        #[arg(long)]
        realizations: Option<usize>,
    },
    /// Print the default config.
    DefaultConfig,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Calibrate { .. } => "calibrate",
            Command::Compile { .. } => "compile",
            Command::Rb { .. } => "rb",
            Command::Validate { .. } => "validate",
            Command::Attribute { .. } => "attribute",
            Command::Psd { .. } => "psd",
            Command::Fid { .. } => "fid",
            Command::DefaultConfig => "default-config",
        }
    }

    fn common(&self) -> Option<&Common> {
        match self {
            Command::Calibrate { common }
            | Command::Compile { common, .. }
            | Command::Rb { common, .. }
            | Command::Validate { common, .. }
            | Command::Attribute { common, .. }
            | Command::Psd { common, .. }
            | Command::Fid { common, .. } => Some(common),
            Command::DefaultConfig => None,
        }
    }

    /// Applies command-line overrides so the manifest records what ran.
    fn effective_config(&self, mut cfg: ExperimentConfig) -> Result<ExperimentConfig> {
        if let Some(s) = self.common().and_then(|c| c.seeds) {
            cfg.run.seeds = s;
        }
        match self {
            Command::Rb {
                seed_range,
                passes,
                depths,
                spam_us,
                shots_mode,
                ..
            } => {
                if let Some(s) = seed_range {
                    cfg.run.seeds = *s;
                }
                if let Some(p) = passes {
                    cfg.schedule.passes = *p;
                }
                if let Some(d) = depths {
                    cfg.schedule.depths = d.clone();
                }
                if let Some(us) = spam_us {
                    cfg.schedule.spam_prep_us = *us;
                    cfg.schedule.spam_meas_us = *us;
                }
                if let Some(m) = shots_mode {
                    cfg.run.shots = *m == ShotsMode::Shots;
                }
            }
            Command::Validate { metric, p_x, .. } => {
                if let Some(m) = metric {
                    cfg.validation.metric = *m;
                }
                if let Some(p) = p_x {
                    cfg.validation.p_x = *p;
                }
            }
            Command::Fid {
                realizations: Some(n),
                ..
            } => cfg.fid.realizations = *n,
            _ => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs one parsed command and returns the manifest path, if any.
pub fn run(cli: Cli) -> Result<Option<PathBuf>> {
    let Some(common) = cli.command.common().cloned() else {
        print!("{}", ExperimentConfig::default().to_json());
        return Ok(None);
    };
    let base = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let mut cfg = cli.command.effective_config(base)?;
    let out_dir = common
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    cfg.output_dir = Some(out_dir.clone());
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = common.jobs {
        pool = pool.num_threads(n.max(1));
    }
    let pool = pool.build().context("starting worker threads")?;
    pool.install(|| {
        let mut out = OutputSet::new(&out_dir, cli.command.name())?;
        match &cli.command {
            Command::Calibrate { .. } => commands::calibrate::run(&cfg, &mut out)?,
            Command::Compile { force, .. } => commands::compile::run(&cfg, &mut out, *force)?,
            Command::Rb { models, .. } => commands::rb::run(&cfg, &mut out, models)?,
            Command::Validate {
                datasets, models, ..
            } => commands::validate::run(&cfg, &mut out, datasets.as_deref(), models)?,
            Command::Attribute { partitions, .. } => {
                commands::attribute::run(&cfg, &mut out, partitions)?
            }
            Command::Psd { models, .. } => commands::psd::run(&cfg, &mut out, models)?,
            Command::Fid { models, .. } => commands::fid::run(&cfg, &mut out, models)?,
            Command::DefaultConfig => unreachable!(),
        }
        out.finish(&cfg).map(Some)
    })
}
