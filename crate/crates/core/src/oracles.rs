//! Exact, full-memory reference computations.
//!
//! Nothing in the streaming or private code paths calls into this module;
//! it exists so tests and the benchmark harness can score those paths
//! against ground truth.

use crate::error::{Error, Result};
use crate::gk::{target_rank, RankInterval};
use crate::universe::Element;

/// Sorted multiset of elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactDataset {
    sorted: Vec<Element>,
}

impl ExactDataset {
    pub fn new(mut values: Vec<Element>) -> Self {
        values.sort_unstable();
        Self { sorted: values }
    }

    pub fn from_indices<I: IntoIterator<Item = u64>>(values: I) -> Self {
        Self::new(values.into_iter().map(Element).collect())
    }

    pub fn n(&self) -> u64 {
        self.sorted.len() as u64
    }

    pub fn values(&self) -> &[Element] {
        &self.sorted
    }

    /// `[#{y < x}, #{y <= x}]`.
    pub fn rank_interval(&self, x: Element) -> RankInterval {
        let lo = self.sorted.partition_point(|&y| y < x) as u64;
        let hi = self.sorted.partition_point(|&y| y <= x) as u64;
        RankInterval::new(lo, hi)
    }

    /// Element of rank `ceil(q n)`.
    pub fn quantile(&self, q: f64) -> Result<Element> {
        if self.sorted.is_empty() {
            return Err(Error::EmptyInput);
        }
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidParameter(format!("q must lie in (0, 1), got {q}")));
        }
        Ok(self.sorted[(target_rank(q, self.n()) - 1) as usize])
    }

    /// Whether the rank interval of `x` meets `[ceil(q n) - alpha n, ceil(q n) + alpha n]`.
    pub fn is_approx_quantile(&self, x: Element, q: f64, alpha: f64) -> bool {
        let n = self.n();
        let r = self.rank_interval(x);
        let t = target_rank(q, n) as f64;
        let slack = alpha * n as f64;
        // the 1e-9 absorbs rounding in alpha * n only
        (r.hi as f64) >= t - slack - 1e-9 && (r.lo as f64) <= t + slack + 1e-9
    }
}

pub fn exact_rank_interval(d: &ExactDataset, x: Element) -> RankInterval {
    d.rank_interval(x)
}

pub fn exact_quantile(d: &ExactDataset, q: f64) -> Result<Element> {
    d.quantile(q)
}

pub fn is_approx_quantile(d: &ExactDataset, x: Element, q: f64, alpha: f64) -> bool {
    d.is_approx_quantile(x, q, alpha)
}

/// Explicit exponential-mechanism probabilities `exp(eps * u / divisor)`,
/// normalized over every listed outcome.
pub fn explicit_em_distribution(scores: &[f64], eps: f64, divisor: f64) -> Vec<f64> {
    if scores.is_empty() {
        return Vec::new();
    }
    let logits: Vec<f64> = scores.iter().map(|&u| eps * u / divisor).collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Total-variation distance between two distributions on the same support.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn figure_one() -> ExactDataset {
        ExactDataset::from_indices([1, 2, 2, 3, 5, 2, 6, 5])
    }

    #[test]
    fn rank_interval_examples() {
        let d = figure_one();
        assert_eq!(d.rank_interval(Element(2)), RankInterval::new(1, 4));
        assert_eq!(d.rank_interval(Element(0)), RankInterval::new(0, 0));
        assert_eq!(d.rank_interval(Element(9)), RankInterval::new(8, 8));
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(figure_one().quantile(0.5).unwrap(), Element(2));
        assert_eq!(ExactDataset::from_indices([4; 9]).quantile(0.7).unwrap(), Element(4));
        assert_eq!(ExactDataset::from_indices(1..=100).quantile(0.25).unwrap(), Element(25));
        assert_eq!(ExactDataset::new(vec![]).quantile(0.5), Err(Error::EmptyInput));
    }

    #[test]
    fn approx_quantile_examples() {
        let d = figure_one();
        for x in 2..=5 {
            assert!(d.is_approx_quantile(Element(x), 0.5, 0.25), "{x}");
        }
        assert!(!d.is_approx_quantile(Element(1), 0.5, 0.25));
        assert!(!d.is_approx_quantile(Element(6), 0.5, 0.25));
        for x in 0..10 {
            assert!(d.is_approx_quantile(Element(x), 0.5, 1.0));
        }
    }

    #[test]
    fn em_distribution_examples() {
        let p = explicit_em_distribution(&[-3.0; 5], 1.0, 2.0);
        assert!(p.iter().all(|&x| (x - 0.2).abs() < 1e-15));
        let p = explicit_em_distribution(&[0.0, -7.0, -100.0], 0.0, 2.0);
        assert!(p.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
        // exponent gap ln 2
        let divisor = 2.0;
        let p = explicit_em_distribution(&[0.0, -divisor * 2f64.ln()], 1.0, divisor);
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-12 && (p[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn rank_interval_matches_counting(values in prop::collection::vec(0u64..50, 0..200), x in 0u64..60) {
            let d = ExactDataset::from_indices(values.clone());
            let below = values.iter().filter(|&&v| v < x).count() as u64;
            let at_or_below = values.iter().filter(|&&v| v <= x).count() as u64;
            prop_assert_eq!(d.rank_interval(Element(x)), RankInterval::new(below, at_or_below));
        }

        #[test]
        fn em_probabilities_sum_to_one(scores in prop::collection::vec(-500.0f64..0.0, 1..64), eps in 0.0f64..10.0) {
            let p = explicit_em_distribution(&scores, eps, 3.0);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
