//! One-shot private quantile release.
//!
//! The exponential mechanism over the whole universe is run without ever
//! touching individual universe elements: elements sharing a rank interval
//! (one stored value, or one gap between stored values) form a segment with
//! a common utility. Each segment gets the log-weight
//! `ln(cardinality) + eps * u / divisor` plus an independent standard Gumbel
//! draw; the arg-max segment is chosen and, for a gap, a uniform element
//! inside it is returned. This samples exactly from the mechanism's
//! distribution while keeping only the running best segment.

use serde::{Deserialize, Serialize};

use crate::dp::{gk_sensitivity, split_budget, PrivacyParams, RandomSource};
use crate::error::{Error, Result};
use crate::gk::{GkSummary, RankInterval};
use crate::rank::{interval_utility, AugmentedSummary, ScoredSegment, SegmentKind, TargetQuantile};
use crate::universe::{Element, Universe};

/// What the utility is divided by in the exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExponentDivisor {
    /// `2 * sensitivity`, the setting for which eps-DP holds.
    TwiceSensitivity,
    /// A fixed divisor. `Fixed(2.0)` reproduces the `eps/2 * u` scoring of
    /// the bare pseudocode, which ignores the sensitivity and is therefore
    /// not eps-DP for the sketch utility.
    Fixed(f64),
}

impl ExponentDivisor {
    pub const RAW_PSEUDOCODE: ExponentDivisor = ExponentDivisor::Fixed(2.0);

    pub fn resolve(self, sensitivity: f64) -> f64 {
        match self {
            ExponentDivisor::TwiceSensitivity => 2.0 * sensitivity,
            ExponentDivisor::Fixed(d) => d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechanismConfig {
    pub privacy: PrivacyParams,
    pub target: TargetQuantile,
    pub exponent_divisor: f64,
}

impl MechanismConfig {
    pub fn new(privacy: PrivacyParams, target: TargetQuantile, divisor: ExponentDivisor) -> Result<Self> {
        let exponent_divisor = divisor.resolve(privacy.sensitivity);
        if !(exponent_divisor > 0.0 && exponent_divisor.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "exponent divisor must be positive, got {exponent_divisor}"
            )));
        }
        Ok(Self {
            privacy,
            target,
            exponent_divisor,
        })
    }

    /// Config for a summary, with sensitivity `4 alpha n + 2`.
    pub fn for_summary(summary: &GkSummary, eps: f64, q: f64, divisor: ExponentDivisor) -> Result<Self> {
        let sensitivity = gk_sensitivity(summary.alpha(), summary.n())?;
        let privacy = PrivacyParams::new(eps, 1.0, sensitivity)?;
        Self::new(privacy, TargetQuantile::new(q, summary.n())?, divisor)
    }

    /// Multiplier applied to utilities in the exponent.
    pub fn scale(&self) -> f64 {
        self.privacy.epsilon / self.exponent_divisor
    }
}

/// Log-weight of a segment: `ln |segment| + scale * utility`.
pub fn segment_log_weight(seg: &ScoredSegment, scale: f64) -> f64 {
    (seg.cardinality as f64).ln() + scale * seg.utility as f64
}

/// Gumbel-max selection over a stream of segments.
pub fn gumbel_select<I>(segments: I, scale: f64, universe: &Universe, rng: &mut RandomSource) -> Result<Element>
where
    I: IntoIterator<Item = ScoredSegment>,
{
    let mut best: Option<(f64, ScoredSegment)> = None;
    for seg in segments {
        let noisy = segment_log_weight(&seg, scale) + rng.gumbel();
        if best.as_ref().is_none_or(|(b, _)| noisy > *b) {
            best = Some((noisy, seg));
        }
    }
    let (_, seg) = best.ok_or(Error::EmptySummary)?;
    Ok(match seg.kind {
        SegmentKind::Value(v) => v,
        SegmentKind::Gap { after, .. } => universe.nth_between(after, rng.below(seg.cardinality)),
    })
}

/// Private q-quantile from a summary.
pub fn dp_quantile_gk(
    aug: &AugmentedSummary<'_>,
    universe: &Universe,
    cfg: &MechanismConfig,
    rng: &mut RandomSource,
) -> Result<Element> {
    if aug.summary().is_empty() {
        return Err(Error::EmptySummary);
    }
    gumbel_select(aug.segments(universe, cfg.target), cfg.scale(), universe, rng)
}

/// Several quantiles from one summary, the budget split evenly across them.
/// Each quantile draws from a random stream derived from its own `q`, so
/// results do not depend on the order of `qs`.
pub fn dp_quantiles_multi(
    aug: &AugmentedSummary<'_>,
    universe: &Universe,
    qs: &[f64],
    privacy: PrivacyParams,
    divisor: ExponentDivisor,
    rng: &RandomSource,
) -> Result<Vec<Element>> {
    if qs.is_empty() {
        return Err(Error::InvalidParameter("no quantiles requested".into()));
    }
    let parts = split_budget(privacy, qs.len())?;
    qs.iter()
        .zip(parts)
        .map(|(&q, part)| {
            let cfg = MechanismConfig::new(part, TargetQuantile::new(q, aug.n())?, divisor)?;
            dp_quantile_gk(aug, universe, &cfg, &mut rng.derive(q.to_bits()))
        })
        .collect()
}

/// The full stream, sorted, for the linear-space baseline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortedData(Vec<Element>);

impl SortedData {
    pub fn new(mut data: Vec<Element>) -> Self {
        data.sort_unstable();
        Self(data)
    }

    pub fn n(&self) -> u64 {
        self.0.len() as u64
    }

    pub fn as_slice(&self) -> &[Element] {
        &self.0
    }

    /// Segments with exact rank intervals `[#{< x}, #{<= x}]`.
    pub fn segments<'a>(&'a self, universe: &'a Universe, target: u64) -> impl Iterator<Item = ScoredSegment> + 'a {
        let data = &self.0;
        let n = data.len();
        let mut i = 0usize;
        let mut prev: Option<Element> = None;
        let mut pending: Option<ScoredSegment> = None;
        let mut done = false;
        std::iter::from_fn(move || {
            if let Some(seg) = pending.take() {
                return Some(seg);
            }
            let gap = |prev: Option<Element>, before: Option<Element>, below: u64, anchor: usize| {
                let cardinality = universe.segment_cardinality(prev, before).ok()?;
                (cardinality > 0).then(|| {
                    let interval = RankInterval::new(below, below);
                    ScoredSegment {
                        kind: SegmentKind::Gap { after: prev, before },
                        anchor,
                        cardinality,
                        interval,
                        utility: interval_utility(interval, target),
                    }
                })
            };
            if i < n {
                let v = data[i];
                let j = i + data[i..].partition_point(|&y| y == v);
                let g = gap(prev, Some(v), i as u64, i);
                let interval = RankInterval::new(i as u64, j as u64);
                let value = ScoredSegment {
                    kind: SegmentKind::Value(v),
                    anchor: i,
                    cardinality: 1,
                    interval,
                    utility: interval_utility(interval, target),
                };
                prev = Some(v);
                i = j;
                return match g {
                    Some(g) => {
                        pending = Some(value);
                        Some(g)
                    }
                    None => Some(value),
                };
            }
            if done {
                return None;
            }
            done = true;
            gap(prev, None, n as u64, n)
        })
    }
}

/// Linear-space baseline: the exponential mechanism with the exact rank
/// utility, whose sensitivity is 1.
pub fn dp_quantile_full(
    data: &SortedData,
    universe: &Universe,
    target: TargetQuantile,
    eps: f64,
    rng: &mut RandomSource,
) -> Result<Element> {
    dp_quantile_full_with(data, universe, target, eps, ExponentDivisor::TwiceSensitivity, rng)
}

pub fn dp_quantile_full_with(
    data: &SortedData,
    universe: &Universe,
    target: TargetQuantile,
    eps: f64,
    divisor: ExponentDivisor,
    rng: &mut RandomSource,
) -> Result<Element> {
    if data.n() == 0 {
        return Err(Error::EmptyInput);
    }
    let privacy = PrivacyParams::new(eps, 1.0, 1.0)?;
    let cfg = MechanismConfig::new(privacy, target, divisor)?;
    gumbel_select(data.segments(universe, target.rank), cfg.scale(), universe, rng)
}
