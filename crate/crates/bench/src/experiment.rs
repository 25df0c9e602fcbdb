//! Multi-trial accuracy experiments.
//!
//! The relative error of a trial is `|estimate - exact| / sd`, where `exact`
//! is the true quantile of the stream after it is mapped onto the universe
//! grid and `sd` the population standard deviation of the stream as
//! ingested. The harness keeps the raw stream to compute both; the
//! library's summary is still built by a single streaming pass.

use std::time::Instant;

use clap::ValueEnum;
use dpq_core::continual::{Continual, ContinualParams};
use dpq_core::histogram::{build_noisy_cdf, hist_quantile, HistogramSpec};
use dpq_core::mechanism::{dp_quantile_full_with, dp_quantile_gk, ExponentDivisor, MechanismConfig, SortedData};
use dpq_core::oracles::ExactDataset;
use dpq_core::{AugmentedSummary, Element, GkSummary, RandomSource, TargetQuantile, Universe};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::source::{generate, ingest_csv, population_stddev, Source};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mechanism {
    GkExp,
    FullExp,
    Hist,
    Continual,
}

impl Mechanism {
    pub fn name(self) -> &'static str {
        match self {
            Mechanism::GkExp => "gk-exp",
            Mechanism::FullExp => "full-exp",
            Mechanism::Hist => "hist",
            Mechanism::Continual => "continual",
        }
    }
}

// labels for splitting the root random source
const DATA_STREAM: u64 = 1;
const MECHANISM_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: Source,
    /// Stream length; `None` takes every CSV row.
    pub n: Option<u64>,
    pub alpha: f64,
    pub eps: f64,
    pub qs: Vec<f64>,
    pub mechanism: Mechanism,
    pub trials: usize,
    pub seed: u64,
    pub universe: Universe,
    pub bins: Option<usize>,
    pub n_max: Option<u64>,
    pub beta: f64,
    pub divisor: ExponentDivisor,
    /// Record wall time. Off by default so output files are reproducible.
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn new(source: Source, n: Option<u64>, universe: Universe) -> Self {
        Self {
            source,
            n,
            alpha: 1e-4,
            eps: 1.0,
            qs: vec![0.5],
            mechanism: Mechanism::GkExp,
            trials: 100,
            seed: 0,
            universe,
            bins: None,
            n_max: None,
            beta: 0.1,
            divisor: ExponentDivisor::TwiceSensitivity,
            timing: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(BenchError::Config("trials must be at least 1".into()));
        }
        if self.qs.is_empty() {
            return Err(BenchError::Config("no quantiles requested".into()));
        }
        if let Some(q) = self.qs.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
            return Err(BenchError::Config(format!("q must lie in (0, 1), got {q}")));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(BenchError::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.eps > 0.0) {
            return Err(BenchError::Config(format!("eps must be positive, got {}", self.eps)));
        }
        if matches!(self.source, Source::Synthetic(_)) && self.n.is_none() {
            return Err(BenchError::Config("synthetic sources need --n".into()));
        }
        if self.n == Some(0) {
            return Err(BenchError::Config("n must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub mechanism: Mechanism,
    pub n: u64,
    pub alpha: f64,
    pub eps: f64,
    pub q: f64,
    pub mean_rel_err: f64,
    pub p10: f64,
    pub p90: f64,
    pub sketch_size: u64,
    pub full_size: u64,
    pub wall_time: f64,
}

/// A stream held in full by the harness for scoring.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub raw: Vec<f64>,
    pub elements: Vec<Element>,
    pub skipped: u64,
}

impl Dataset {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        let (raw, skipped) = match &cfg.source {
            Source::Synthetic(dist) => {
                let n = cfg.n.expect("validated");
                (generate(*dist, data_seed(cfg.seed)).take(n as usize).collect(), 0)
            }
            Source::Csv { path, column, has_header } => {
                let d = ingest_csv(path, column, *has_header)?;
                let mut values = d.values;
                if let Some(n) = cfg.n {
                    if (values.len() as u64) < n {
                        return Err(BenchError::Data(format!("asked for {n} values, file has {}", values.len())));
                    }
                    values.truncate(n as usize);
                }
                (values, d.skipped)
            }
        };
        let elements = raw
            .iter()
            .map(|&x| cfg.universe.encode(x))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { raw, elements, skipped })
    }
}

pub fn data_seed(seed: u64) -> u64 {
    RandomSource::new(seed).derive(DATA_STREAM).seed()
}

/// Summary of a stream fed one item at a time.
pub fn build_sketch<I: IntoIterator<Item = Element>>(alpha: f64, stream: I) -> Result<GkSummary> {
    let mut s = GkSummary::new(alpha)?;
    s.stream_insert(stream);
    Ok(s)
}

/// Linear-interpolated percentile of sorted values, `p` in [0, 1].
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn trial_rng(seed: u64, q: f64, trial: usize) -> RandomSource {
    RandomSource::new(seed)
        .derive(MECHANISM_STREAM)
        .derive(q.to_bits())
        .derive(trial as u64)
}

/// Runs every trial for every `q` in the config; one result per `q`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentResult>> {
    cfg.validate()?;
    let started = Instant::now();
    let data = Dataset::load(cfg)?;
    run_on(cfg, &data, started)
}

/// Like [`run_experiment`] on an already loaded stream.
pub fn run_on(cfg: &ExperimentConfig, data: &Dataset, started: Instant) -> Result<Vec<ExperimentResult>> {
    cfg.validate()?;
    let n = data.elements.len() as u64;
    let sd = population_stddev(&data.raw);
    if !(sd > 0.0) {
        return Err(BenchError::Data("stream has zero variance; relative error undefined".into()));
    }
    let u = &cfg.universe;
    let exact = ExactDataset::new(data.elements.clone());

    enum Prepared {
        Sketch(GkSummary),
        Full(SortedData),
        None,
    }
    let prepared = match cfg.mechanism {
        Mechanism::GkExp | Mechanism::Hist => Prepared::Sketch(build_sketch(cfg.alpha, data.elements.iter().copied())?),
        Mechanism::FullExp => Prepared::Full(SortedData::new(data.elements.clone())),
        Mechanism::Continual => Prepared::None,
    };
    let hist_spec = match cfg.mechanism {
        Mechanism::Hist => Some(match cfg.bins {
            Some(k) => HistogramSpec::uniform(u.lo(), u.hi(), k)?,
            None => HistogramSpec::for_alpha(u, cfg.alpha)?,
        }),
        _ => None,
    };

    let mut results = Vec::with_capacity(cfg.qs.len());
    for &q in &cfg.qs {
        let truth = u.decode(exact.quantile(q)?)?;
        let target = TargetQuantile::new(q, n)?;
        let outcomes: Vec<(f64, u64)> = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| -> Result<(f64, u64)> {
                let mut rng = trial_rng(cfg.seed, q, trial);
                let (estimate, size) = match &prepared {
                    Prepared::Sketch(s) if cfg.mechanism == Mechanism::GkExp => {
                        let mcfg = MechanismConfig::for_summary(s, cfg.eps, q, cfg.divisor)?;
                        let x = dp_quantile_gk(&AugmentedSummary::new(s), u, &mcfg, &mut rng)?;
                        (u.decode(x)?, s.len() as u64)
                    }
                    Prepared::Sketch(s) => {
                        let cdf = build_noisy_cdf(s, u, hist_spec.as_ref().expect("hist spec"), cfg.eps, &mut rng)?;
                        (hist_quantile(&cdf, q, n)?, s.len() as u64)
                    }
                    Prepared::Full(sorted) => {
                        let x = dp_quantile_full_with(sorted, u, target, cfg.eps, cfg.divisor, &mut rng)?;
                        (u.decode(x)?, n)
                    }
                    Prepared::None => {
                        let mut p = ContinualParams::new(cfg.alpha, cfg.eps, q, cfg.n_max.unwrap_or(n), cfg.beta);
                        p.divisor = cfg.divisor;
                        let mut c = Continual::new(p, *u)?;
                        let mut last = None;
                        for &x in &data.elements {
                            last = c.observe(x, &mut rng)?.value();
                        }
                        let x = last.ok_or_else(|| {
                            BenchError::Config(format!("stream of {n} ends before the first checkpoint {}", c.n_min()))
                        })?;
                        (u.decode(x)?, c.summary().len() as u64)
                    }
                };
                Ok(((estimate - truth).abs() / sd, size))
            })
            .collect::<Result<_>>()?;
        let mut errs: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        errs.sort_by(f64::total_cmp);
        results.push(ExperimentResult {
            mechanism: cfg.mechanism,
            n,
            alpha: cfg.alpha,
            eps: cfg.eps,
            q,
            mean_rel_err: mean,
            p10: percentile(&errs, 0.1),
            p90: percentile(&errs, 0.9),
            sketch_size: outcomes[0].1,
            full_size: n,
            wall_time: 0.0,
        });
    }
    if cfg.timing {
        let t = started.elapsed().as_secs_f64();
        for r in &mut results {
            r.wall_time = t;
        }
    }
    Ok(results)
}
