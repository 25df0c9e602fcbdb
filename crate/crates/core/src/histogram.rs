//! Private all-quantiles through a Laplace-noised histogram of the summary.
//!
//! Every tuple contributes `g` counts at its value (its `delta` is
//! ignored), each bin count gets `Laplace(2 / eps)` noise clamped at zero,
//! and the clamped counts are accumulated into a cumulative table. Queries
//! are post-processing of that one table and cost no further budget.

use serde::{Deserialize, Serialize};

use crate::dp::RandomSource;
use crate::error::{Error, Result};
use crate::gk::{target_rank, GkSummary};
use crate::universe::Universe;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    edges: Vec<f64>,
}

impl HistogramSpec {
    /// `k` equal-width bins over `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("need at least one bin".into()));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter(format!("bad histogram range [{lo}, {hi}]")));
        }
        let w = (hi - lo) / k as f64;
        let mut edges: Vec<f64> = (0..k).map(|i| lo + i as f64 * w).collect();
        edges.push(hi);
        Self::from_edges(edges)
    }

    /// Bins of width `alpha / 2` of the universe range, i.e. `ceil(2 / alpha)` bins.
    pub fn for_alpha(universe: &Universe, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        Self::uniform(universe.lo(), universe.hi(), (2.0 / alpha).ceil() as usize)
    }

    pub fn from_edges(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::InvalidParameter("need at least two edges".into()));
        }
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("edges must be finite and strictly increasing".into()));
        }
        Ok(Self { edges })
    }

    pub fn bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Bin holding `x`; bins are half-open except the last, and values
    /// outside the range fall into the end bins.
    pub fn bin_of(&self, x: f64) -> usize {
        let inner = &self.edges[1..self.edges.len() - 1];
        inner.partition_point(|&e| e <= x)
    }

    pub fn midpoint(&self, bin: usize) -> f64 {
        0.5 * (self.edges[bin] + self.edges[bin + 1])
    }

    /// Exact bin counts of raw values.
    pub fn direct_counts(&self, values: &[f64]) -> Vec<u64> {
        let mut counts = vec![0u64; self.bins()];
        for &x in values {
            counts[self.bin_of(x)] += 1;
        }
        counts
    }

    /// Bin counts of a summary: `g` counts at each stored value.
    pub fn summary_counts(&self, summary: &GkSummary, universe: &Universe) -> Result<Vec<u64>> {
        let mut counts = vec![0u64; self.bins()];
        for t in summary.tuples() {
            counts[self.bin_of(universe.decode(t.v)?)] += t.g;
        }
        Ok(counts)
    }
}

/// Cumulative noisy counts, one entry per bin. The label of a bin is its
/// midpoint snapped to the universe grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyCdf {
    pub entries: Vec<(f64, f64)>,
}

impl NoisyCdf {
    /// Accumulates per-bin counts, which must already be non-negative.
    pub fn from_counts(labels: &[f64], counts: &[f64]) -> Self {
        let entries = labels
            .iter()
            .zip(counts)
            .scan(0.0, |acc, (&a, &c)| {
                *acc += c;
                Some((a, *acc))
            })
            .collect();
        Self { entries }
    }
}

fn labels(spec: &HistogramSpec, universe: &Universe) -> Result<Vec<f64>> {
    (0..spec.bins())
        .map(|b| universe.decode(universe.encode(spec.midpoint(b))?))
        .collect()
}

pub fn build_noisy_cdf(
    summary: &GkSummary,
    universe: &Universe,
    spec: &HistogramSpec,
    eps: f64,
    rng: &mut RandomSource,
) -> Result<NoisyCdf> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {eps}")));
    }
    let scale = 2.0 / eps;
    let counts = spec.summary_counts(summary, universe)?;
    let mut noisy = Vec::with_capacity(counts.len());
    for c in counts {
        // an infinite epsilon leaves the counts untouched
        let noise = if scale > 0.0 { rng.laplace(scale)? } else { 0.0 };
        noisy.push((c as f64 + noise).max(0.0));
    }
    Ok(NoisyCdf::from_counts(&labels(spec, universe)?, &noisy))
}

fn threshold(q: f64, n: u64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter(format!("q must lie in (0, 1), got {q}")));
    }
    if n == 0 {
        return Ok(0.0);
    }
    Ok(target_rank(q, n) as f64)
}

/// First label whose cumulative count exceeds `ceil(q n)`, else the last label.
pub fn hist_quantile(cdf: &NoisyCdf, q: f64, n: u64) -> Result<f64> {
    let r = threshold(q, n)?;
    let last = cdf.entries.last().ok_or(Error::EmptyInput)?;
    Ok(cdf.entries.iter().find(|&&(_, c)| r < c).unwrap_or(last).0)
}

/// All requested quantiles in one pass; `qs` must be ascending.
pub fn hist_all_quantiles(cdf: &NoisyCdf, qs: &[f64], n: u64) -> Result<Vec<f64>> {
    if qs.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter("quantiles must be sorted ascending".into()));
    }
    let last = cdf.entries.last().ok_or(Error::EmptyInput)?.0;
    let mut out = Vec::with_capacity(qs.len());
    let mut i = 0;
    for &q in qs {
        let r = threshold(q, n)?;
        while i < cdf.entries.len() && cdf.entries[i].1 <= r {
            i += 1;
        }
        out.push(cdf.entries.get(i).map_or(last, |e| e.0));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::universe::Element;
    use proptest::prelude::*;

    #[test]
    fn threshold_scan_example() {
        let cdf = NoisyCdf {
            entries: vec![(0.25, 50.0), (0.75, 100.0)],
        };
        assert_eq!(hist_quantile(&cdf, 0.6, 100).unwrap(), 0.75);
        assert_eq!(hist_quantile(&cdf, 0.3, 100).unwrap(), 0.25);
        // rank 50 does not exceed 50
        assert_eq!(hist_quantile(&cdf, 0.5, 100).unwrap(), 0.75);
        assert_eq!(hist_quantile(&cdf, 0.99, 1000).unwrap(), 0.75);
    }

    #[test]
    fn one_bin_answers_everything() {
        let cdf = NoisyCdf {
            entries: vec![(3.0, 7.5)],
        };
        for q in [0.01, 0.5, 0.99] {
            assert_eq!(hist_quantile(&cdf, q, 10).unwrap(), 3.0);
        }
        assert_eq!(hist_all_quantiles(&cdf, &[0.1, 0.9], 10).unwrap(), vec![3.0, 3.0]);
    }

    #[test]
    fn empty_cdf_errors() {
        let cdf = NoisyCdf { entries: vec![] };
        assert_eq!(hist_quantile(&cdf, 0.5, 10), Err(Error::EmptyInput));
        assert!(hist_all_quantiles(&cdf, &[0.5], 10).is_err());
        assert!(hist_all_quantiles(&NoisyCdf { entries: vec![(0.0, 1.0)] }, &[0.6, 0.5], 10).is_err());
    }

    #[test]
    fn spec_construction() {
        let s = HistogramSpec::uniform(0.0, 1.0, 4).unwrap();
        assert_eq!(s.edges(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(s.bin_of(0.0), 0);
        assert_eq!(s.bin_of(0.25), 1);
        assert_eq!(s.bin_of(1.0), 3);
        assert_eq!(s.bin_of(-5.0), 0);
        assert_eq!(s.bin_of(5.0), 3);
        assert_eq!(s.midpoint(1), 0.375);
        assert!(HistogramSpec::uniform(0.0, 1.0, 0).is_err());
        assert!(HistogramSpec::from_edges(vec![0.0, 0.5, 0.5]).is_err());
        let u = Universe::new(0.0, 1.0, 1 << 20).unwrap();
        assert_eq!(HistogramSpec::for_alpha(&u, 0.02).unwrap().bins(), 100);
    }

    #[test]
    fn infinite_epsilon_matches_summary_cdf() {
        let u = Universe::integers(0, 99).unwrap();
        let mut s = GkSummary::new(0.01).unwrap();
        s.stream_insert((0..10_000u64).map(|i| Element((i * 31) % 100)));
        let spec = HistogramSpec::uniform(0.0, 99.0, 10).unwrap();
        let mut rng = RandomSource::new(1);
        let cdf = build_noisy_cdf(&s, &u, &spec, f64::INFINITY, &mut rng).unwrap();
        let counts = spec.summary_counts(&s, &u).unwrap();
        let mut acc = 0u64;
        for (e, c) in cdf.entries.iter().zip(counts) {
            acc += c;
            assert_eq!(e.1, acc as f64);
        }
        assert_eq!(acc, 10_000);
    }

    #[test]
    fn empty_stream_gives_nondecreasing_noise() {
        let u = Universe::new(0.0, 1.0, 1 << 10).unwrap();
        let s = GkSummary::new(0.1).unwrap();
        let spec = HistogramSpec::uniform(0.0, 1.0, 50).unwrap();
        let cdf = build_noisy_cdf(&s, &u, &spec, 1.0, &mut RandomSource::new(2)).unwrap();
        assert!(cdf.entries.windows(2).all(|w| w[0].1 <= w[1].1));
        assert!(cdf.entries[0].1 >= 0.0);
    }

    #[test]
    fn rejects_nonpositive_epsilon() {
        let u = Universe::integers(0, 9).unwrap();
        let s = GkSummary::new(0.1).unwrap();
        let spec = HistogramSpec::uniform(0.0, 9.0, 3).unwrap();
        assert!(build_noisy_cdf(&s, &u, &spec, 0.0, &mut RandomSource::new(0)).is_err());
    }

    proptest! {
        #[test]
        fn one_swap_moves_at_most_two_bins_by_one(
            values in prop::collection::vec(0.0f64..1.0, 1..300),
            pos in any::<prop::sample::Index>(),
            replacement in 0.0f64..1.0,
            k in 1usize..60,
        ) {
            let spec = HistogramSpec::uniform(0.0, 1.0, k).unwrap();
            let mut other = values.clone();
            other[pos.index(values.len())] = replacement;
            let a = spec.direct_counts(&values);
            let b = spec.direct_counts(&other);
            let changed: Vec<i64> = a.iter().zip(&b).map(|(x, y)| *x as i64 - *y as i64).filter(|d| *d != 0).collect();
            prop_assert!(changed.len() <= 2);
            prop_assert!(changed.iter().all(|d| d.abs() == 1));
        }

        #[test]
        fn all_quantiles_agree_with_single_and_are_monotone(
            counts in prop::collection::vec(0.0f64..50.0, 1..40),
            mut qs in prop::collection::vec(0.001f64..0.999, 1..20),
            n in 1u64..2000,
        ) {
            qs.sort_by(f64::total_cmp);
            let labels: Vec<f64> = (0..counts.len()).map(|i| i as f64).collect();
            let cdf = NoisyCdf::from_counts(&labels, &counts);
            let all = hist_all_quantiles(&cdf, &qs, n).unwrap();
            prop_assert!(all.windows(2).all(|w| w[0] <= w[1]));
            for (q, a) in qs.iter().zip(&all) {
                prop_assert_eq!(*a, hist_quantile(&cdf, *q, n).unwrap());
            }
        }
    }
}
