use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use dpq_core::continual::{Continual, ContinualParams, Observation};
use dpq_core::dp::{gk_sensitivity, split_budget, PrivacyParams};
use dpq_core::histogram::{build_noisy_cdf, hist_all_quantiles, HistogramSpec};
use dpq_core::mechanism::{dp_quantile_full_with, dp_quantiles_multi, ExponentDivisor, SortedData};
use dpq_core::universe::DEFAULT_CARDINALITY;
use dpq_core::{AugmentedSummary, RandomSource, TargetQuantile, Universe};

use crate::emit::{emit_results, sort_results, Format, Metadata, Report};
use crate::error::{BenchError, Result};
use crate::experiment::{build_sketch, run_on, Dataset, ExperimentConfig, Mechanism};
use crate::source::{ColumnRef, Dist, Source};

#[derive(Debug, Parser)]
#[command(name = "dpq", version, about = "Differentially private streaming quantiles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Multi-trial accuracy and size experiments.
    Bench(BenchArgs),
    /// Release private quantiles of one stream.
    Quantile(QuantileArgs),
    /// Private quantiles from a noisy histogram of the summary.
    Hist(HistArgs),
    /// Continual release; prints one line per checkpoint.
    Continual(ContinualArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Synthetic distribution.
    #[arg(long, value_enum, conflicts_with = "csv")]
    pub dist: Option<Dist>,
    /// CSV file to read instead of generating data.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Column name, or zero-based index.
    #[arg(long, requires = "csv", default_value = "0")]
    pub col: String,
    /// The CSV file has no header row.
    #[arg(long)]
    pub no_header: bool,
    #[arg(long)]
    pub lo: Option<f64>,
    #[arg(long)]
    pub hi: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_CARDINALITY)]
    pub universe_card: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl DataArgs {
    fn source(&self) -> Result<Source> {
        match (&self.csv, self.dist) {
            (Some(path), _) => Ok(Source::Csv {
                path: path.clone(),
                column: ColumnRef::parse(&self.col),
                has_header: !self.no_header,
            }),
            (None, Some(d)) => Ok(Source::Synthetic(d)),
            (None, None) => Ok(Source::Synthetic(Dist::Uniform)),
        }
    }

    fn universe(&self, source: &Source) -> Result<Universe> {
        let (lo, hi) = match (source, self.lo, self.hi) {
            (_, Some(lo), Some(hi)) => (lo, hi),
            (Source::Synthetic(d), lo, hi) => {
                let (dlo, dhi) = d.default_range();
                (lo.unwrap_or(dlo), hi.unwrap_or(dhi))
            }
            (Source::Csv { .. }, _, _) => {
                return Err(BenchError::Config("CSV input needs --lo and --hi for the universe".into()))
            }
        };
        Universe::new(lo, hi, self.universe_card).map_err(|e| BenchError::Config(e.to_string()))
    }
}

fn parse_count(s: &str) -> std::result::Result<u64, String> {
    if let Ok(n) = s.parse::<u64>() {
        return Ok(n);
    }
    match s.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x < u64::MAX as f64 => Ok(x as u64),
        _ => Err(format!("'{s}' is not a non-negative integer")),
    }
}

/// `start:end:step`, inclusive of `end` up to rounding.
fn parse_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| BenchError::Config(format!("bad range '{s}'")))?;
    let [start, end, step] = parts[..] else {
        return Err(BenchError::Config(format!("range '{s}' is not start:end:step")));
    };
    if !(step > 0.0) || end < start {
        return Err(BenchError::Config(format!("empty range '{s}'")));
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    // rounded to 12 places so 0.1:0.9:0.1 yields 0.3, not 0.30000000000000004
    Ok((0..count)
        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

fn divisor(raw: bool) -> ExponentDivisor {
    if raw {
        ExponentDivisor::RAW_PSEUDOCODE
    } else {
        ExponentDivisor::TwiceSensitivity
    }
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "gk-exp")]
    pub mech: Vec<Mechanism>,
    /// Stream lengths; all CSV rows when omitted.
    #[arg(long, value_delimiter = ',', value_parser = parse_count)]
    pub n: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "0.0001")]
    pub alpha: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub eps: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    pub q: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long, value_parser = parse_count)]
    pub n_max: Option<u64>,
    #[arg(long, default_value_t = 0.1)]
    pub beta: f64,
    /// Score with eps/2 per rank instead of eps/(2 sensitivity). Not eps-DP
    /// for the sketch utility; for comparison with the bare pseudocode.
    #[arg(long)]
    pub raw_divisor: bool,
    /// Record wall time (makes output run-dependent).
    #[arg(long)]
    pub timing: bool,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn bench(args: &BenchArgs) -> Result<()> {
    let source = args.data.source()?;
    let universe = args.data.universe(&source)?;
    let ns: Vec<Option<u64>> = if args.n.is_empty() {
        vec![None]
    } else {
        args.n.iter().copied().map(Some).collect()
    };
    let mut results = Vec::new();
    let mut skipped = 0;
    for &n in &ns {
        let mut base = ExperimentConfig::new(source.clone(), n, universe);
        base.qs = args.q.clone();
        base.trials = args.trials;
        base.seed = args.data.seed;
        base.bins = args.bins;
        base.n_max = args.n_max;
        base.beta = args.beta;
        base.divisor = divisor(args.raw_divisor);
        base.timing = args.timing;
        if matches!(source, Source::Synthetic(_)) && n.is_none() {
            return Err(BenchError::Config("synthetic sources need --n".into()));
        }
        let data = Dataset::load(&base)?;
        skipped = skipped.max(data.skipped);
        for &mechanism in &args.mech {
            for &alpha in &args.alpha {
                for &eps in &args.eps {
                    let cfg = ExperimentConfig {
                        mechanism,
                        alpha,
                        eps,
                        ..base.clone()
                    };
                    results.extend(run_on(&cfg, &data, Instant::now())?);
                }
            }
        }
    }
    sort_results(&mut results);
    let metadata = Metadata {
        tool: "dpq".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: args.data.seed,
        source: source.describe(),
        trials: args.trials,
        universe_lo: universe.lo(),
        universe_hi: universe.hi(),
        universe_cardinality: universe.cardinality(),
        exponent_divisor: if args.raw_divisor {
            "2 (bare pseudocode)".into()
        } else {
            "2*(4*alpha*n+2)".into()
        },
        stddev: "population, over the ingested stream (per stream)".into(),
        exact_reference: "exact quantile of the stream mapped onto the universe grid".into(),
        percentiles: "p10/p90 of trial errors, linear interpolation".into(),
        skipped_rows: skipped,
    };
    emit_results(&Report { metadata, results }, args.format, args.out.as_deref())
}

#[derive(Debug, Args)]
pub struct QuantileArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_parser = parse_count)]
    pub n: Option<u64>,
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    pub q: Vec<f64>,
    #[arg(long, default_value_t = 1e-4)]
    pub alpha: f64,
    /// Total budget, split evenly over the requested quantiles.
    #[arg(long, default_value_t = 1.0)]
    pub eps: f64,
    /// Use the linear-space exponential mechanism on the whole stream.
    #[arg(long)]
    pub full_space: bool,
    #[arg(long)]
    pub raw_divisor: bool,
}

fn load(data: &DataArgs, n: Option<u64>) -> Result<(Universe, Dataset, u64)> {
    let source = data.source()?;
    let universe = data.universe(&source)?;
    if matches!(source, Source::Synthetic(_)) && n.is_none() {
        return Err(BenchError::Config("synthetic sources need --n".into()));
    }
    let mut cfg = ExperimentConfig::new(source, n, universe);
    cfg.seed = data.seed;
    let d = Dataset::load(&cfg)?;
    if d.elements.is_empty() {
        return Err(BenchError::Data("empty stream".into()));
    }
    let n = d.elements.len() as u64;
    Ok((universe, d, n))
}

fn write_pairs<A: std::fmt::Display, B: std::fmt::Display>(header: &str, rows: &[(A, B)]) -> Result<()> {
    let mut out = std::io::stdout().lock();
    let io_err = |source| BenchError::Io {
        path: "<stdout>".into(),
        source,
    };
    writeln!(out, "{header}").map_err(io_err)?;
    for (a, b) in rows {
        writeln!(out, "{a},{b}").map_err(io_err)?;
    }
    Ok(())
}

fn mechanism_rng(seed: u64) -> RandomSource {
    RandomSource::new(seed).derive(2)
}

fn quantile(args: &QuantileArgs) -> Result<()> {
    let (u, data, n) = load(&args.data, args.n)?;
    let rng = mechanism_rng(args.data.seed);
    let div = divisor(args.raw_divisor);
    let values = if args.full_space {
        let sorted = SortedData::new(data.elements.clone());
        let parts = split_budget(PrivacyParams::new(args.eps, 1.0, 1.0)?, args.q.len())?;
        args.q
            .iter()
            .zip(parts)
            .map(|(&q, p)| {
                let t = TargetQuantile::new(q, n)?;
                dp_quantile_full_with(&sorted, &u, t, p.epsilon, div, &mut rng.derive(q.to_bits()))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?
    } else {
        let s = build_sketch(args.alpha, data.elements.iter().copied())?;
        let privacy = PrivacyParams::new(args.eps, 1.0, gk_sensitivity(args.alpha, n)?)?;
        dp_quantiles_multi(&AugmentedSummary::new(&s), &u, &args.q, privacy, div, &rng)?
    };
    let rows: Vec<(f64, f64)> = args
        .q
        .iter()
        .zip(values)
        .map(|(&q, x)| Ok((q, u.decode(x)?)))
        .collect::<Result<_>>()?;
    write_pairs("q,value", &rows)
}

#[derive(Debug, Args)]
pub struct HistArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_parser = parse_count)]
    pub n: Option<u64>,
    /// Summary accuracy; also sets the default bin count.
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub eps: f64,
    #[arg(long, value_delimiter = ',', conflicts_with = "all_quantiles")]
    pub q: Vec<f64>,
    /// Range `start:end:step` of quantiles.
    #[arg(long)]
    pub all_quantiles: Option<String>,
}

fn hist(args: &HistArgs) -> Result<()> {
    let mut qs = match &args.all_quantiles {
        Some(r) => parse_range(r)?,
        None if args.q.is_empty() => vec![0.5],
        None => args.q.clone(),
    };
    qs.sort_by(f64::total_cmp);
    let (u, data, n) = load(&args.data, args.n)?;
    let s = build_sketch(args.alpha, data.elements.iter().copied())?;
    let spec = match args.bins {
        Some(k) => HistogramSpec::uniform(u.lo(), u.hi(), k)?,
        None => HistogramSpec::for_alpha(&u, args.alpha)?,
    };
    let cdf = build_noisy_cdf(&s, &u, &spec, args.eps, &mut mechanism_rng(args.data.seed))?;
    let values = hist_all_quantiles(&cdf, &qs, n)?;
    write_pairs("q,value", &qs.into_iter().zip(values).collect::<Vec<_>>())
}

#[derive(Debug, Args)]
pub struct ContinualArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_parser = parse_count)]
    pub n: Option<u64>,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.5)]
    pub q: f64,
    /// Declared stream horizon.
    #[arg(long, value_parser = parse_count)]
    pub n_max: u64,
    #[arg(long, default_value_t = 0.1)]
    pub beta: f64,
    /// Override the computed first checkpoint.
    #[arg(long, value_parser = parse_count)]
    pub n_min: Option<u64>,
    #[arg(long)]
    pub raw_divisor: bool,
}

fn continual(args: &ContinualArgs) -> Result<()> {
    let (u, data, _) = load(&args.data, args.n)?;
    let mut p = ContinualParams::new(args.alpha, args.eps, args.q, args.n_max, args.beta);
    p.divisor = divisor(args.raw_divisor);
    p.n_min_override = args.n_min;
    let mut c = Continual::new(p, u)?;
    let mut rng = mechanism_rng(args.data.seed);
    let mut rows = Vec::new();
    for (i, &x) in data.elements.iter().enumerate() {
        if let Observation::Fresh(v) = c.observe(x, &mut rng)? {
            rows.push((i as u64 + 1, u.decode(v)?));
        }
    }
    write_pairs("index,value", &rows)
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Bench(a) => bench(a),
        Command::Quantile(a) => quantile(a),
        Command::Hist(a) => hist(a),
        Command::Continual(a) => continual(a),
    }
}

/// Parses the process arguments and runs; returns the exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("dpq: {e}");
            e.exit_code()
        }
    }
}
