//! Greenwald-Khanna quantile summary.
//!
//! The summary keeps tuples `(v, g, delta)` in stable sorted order where
//! `g` is the gap between consecutive rank lower bounds and `delta` the
//! width of the rank interval of `v`. Every `ceil(1/(2 alpha))` insertions
//! a compress pass merges tuples whose combined rank uncertainty stays
//! below `2 alpha n`.
//!
//! Two structural choices keep the textbook guarantees exact:
//!
//! * the first (minimum) and last (maximum) tuples are never merged away,
//!   so both always read `(v, 1, 0)`;
//! * after each compress the upper rank bounds are tightened from right to
//!   left with `delta_i <= g_{i+1} + delta_{i+1} - 1`, valid because stored
//!   items occupy distinct positions in the stable order. This is what
//!   brings freshly inserted tuples (which enter with `delta = floor(2 alpha n)`)
//!   back under `g + delta <= 2 alpha n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::universe::Element;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchTuple {
    pub v: Element,
    pub g: u64,
    pub delta: u64,
}

impl SketchTuple {
    pub fn new(v: Element, g: u64, delta: u64) -> Self {
        Self { v, g, delta }
    }
}

/// `[lo, hi]` bounds on a rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankInterval {
    pub lo: u64,
    pub hi: u64,
}

impl RankInterval {
    pub fn new(lo: u64, hi: u64) -> Self {
        debug_assert!(lo <= hi, "rank interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn contains(&self, r: u64) -> bool {
        self.lo <= r && r <= self.hi
    }

    /// l1 distance from `r` to the interval.
    pub fn distance(&self, r: u64) -> u64 {
        self.lo.saturating_sub(r) + r.saturating_sub(self.hi)
    }
}

/// `2 alpha n`, snapped to the nearest integer when within rounding noise of
/// one so that the strict merge test and the error bound compare exactly.
pub fn two_alpha_n(alpha: f64, n: u64) -> f64 {
    let raw = 2.0 * alpha * n as f64;
    let near = raw.round();
    if (raw - near).abs() <= 1e-9 * near.max(1.0) {
        near
    } else {
        raw
    }
}

/// `ceil(q n)` clamped into `[1, n]`.
pub fn target_rank(q: f64, n: u64) -> u64 {
    let raw = q * n as f64;
    let near = raw.round();
    let r = if (raw - near).abs() <= 1e-9 * near.max(1.0) {
        near
    } else {
        raw.ceil()
    };
    (r as u64).clamp(1, n.max(1))
}

/// Band of `delta` at time `n`. Larger deltas (younger tuples) get smaller
/// bands; `delta = floor(2 alpha n)` is band 0 and `delta = 0` the largest.
pub fn band(delta: u64, n: u64, alpha: f64) -> Result<u32> {
    let limit = two_alpha_n(alpha, n);
    if delta as f64 > limit {
        return Err(Error::DeltaTooLarge { delta, limit });
    }
    Ok(band_of(delta, limit.floor() as u64))
}

fn band_of(delta: u64, cap: u64) -> u32 {
    if delta >= cap {
        return 0;
    }
    // band t holds (cap - 2^t - cap mod 2^t, cap - 2^(t-1) - cap mod 2^(t-1)]
    let mut t = 1u32;
    loop {
        let pow = 1u128 << t;
        let lower = cap as i128 - pow as i128 - (cap as u128 % pow) as i128;
        if delta as i128 > lower {
            return t;
        }
        t += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GkSummary {
    alpha: f64,
    n: u64,
    tuples: Vec<SketchTuple>,
    compress_period: u64,
}

impl GkSummary {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1), got {alpha}"
            )));
        }
        let compress_period = (1.0 / (2.0 * alpha)).ceil().max(1.0) as u64;
        Ok(Self {
            alpha,
            n: 0,
            tuples: Vec::new(),
            compress_period,
        })
    }

    /// Rebuilds a summary from raw parts, checking the structural invariants.
    pub fn from_parts(alpha: f64, n: u64, tuples: Vec<SketchTuple>) -> Result<Self> {
        let mut s = Self::new(alpha)?;
        s.n = n;
        s.tuples = tuples;
        s.check_structure().map_err(Error::Snapshot)?;
        Ok(s)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn tuples(&self) -> &[SketchTuple] {
        &self.tuples
    }

    pub fn compress_period(&self) -> u64 {
        self.compress_period
    }

    pub fn insert(&mut self, x: Element) {
        let t = match (self.tuples.first(), self.tuples.last()) {
            (None, _) | (_, None) => {
                self.tuples.push(SketchTuple::new(x, 1, 0));
                self.n += 1;
                return;
            }
            (Some(first), Some(last)) => (first.v, last.v),
        };
        if x < t.0 {
            self.tuples.insert(0, SketchTuple::new(x, 1, 0));
        } else if x >= t.1 {
            // a value equal to the maximum arrives last among its ties, so its
            // rank is exactly n + 1
            self.tuples.push(SketchTuple::new(x, 1, 0));
        } else {
            let pos = self.tuples.partition_point(|t| t.v <= x);
            let delta = two_alpha_n(self.alpha, self.n).floor() as u64;
            self.tuples.insert(pos, SketchTuple::new(x, 1, delta));
        }
        self.n += 1;
    }

    /// Inserts one item, compressing first when the running index hits the
    /// compress period.
    pub fn push(&mut self, x: Element) {
        if (self.n + 1).is_multiple_of(self.compress_period) {
            self.compress();
        }
        self.insert(x);
    }

    /// Feeds a whole stream and finishes with a compress so the summary is
    /// ready to query.
    pub fn stream_insert<I: IntoIterator<Item = Element>>(&mut self, xs: I) {
        for x in xs {
            self.push(x);
        }
        self.compress();
    }

    pub fn compress(&mut self) {
        if (self.n as f64) < 1.0 / (2.0 * self.alpha) {
            return;
        }
        let limit = two_alpha_n(self.alpha, self.n);
        let cap = limit.floor() as u64;
        let s = self.tuples.len();
        if s >= 4 {
            let bands: Vec<u32> = self.tuples.iter().map(|t| band_of(t.delta, cap)).collect();
            // run_start[i]: first index of the contiguous run of descendants
            // ending at i (all with band strictly below band[i]); never index 0.
            let run_start = descendant_runs(&bands);
            let mut prefix_g = Vec::with_capacity(s + 1);
            prefix_g.push(0u64);
            for t in &self.tuples {
                prefix_g.push(prefix_g.last().unwrap() + t.g);
            }

            let mut src = std::mem::take(&mut self.tuples);
            let mut kept_rev: Vec<SketchTuple> = Vec::with_capacity(s);
            kept_rev.push(src.pop().unwrap());
            kept_rev.push(src.pop().unwrap());
            let mut successor_band = bands[s - 2];
            while src.len() > 1 {
                let i = src.len() - 1;
                let j = run_start[i];
                debug_assert!(j >= 1 && (j == 1 || bands[j - 1] >= bands[i]));
                let g_star = prefix_g[i + 1] - prefix_g[j];
                let succ = kept_rev.last_mut().unwrap();
                if bands[i] <= successor_band && ((g_star + succ.g + succ.delta) as f64) < limit {
                    succ.g += g_star;
                    src.truncate(j);
                } else {
                    kept_rev.push(src.pop().unwrap());
                    successor_band = bands[i];
                }
            }
            kept_rev.push(src.pop().unwrap());
            kept_rev.reverse();
            self.tuples = kept_rev;
        }
        self.tighten_upper_bounds();
    }

    fn tighten_upper_bounds(&mut self) {
        for i in (0..self.tuples.len().saturating_sub(1)).rev() {
            let next = self.tuples[i + 1];
            let bound = next.g + next.delta - 1;
            let t = &mut self.tuples[i];
            if t.delta > bound {
                t.delta = bound;
            }
        }
    }

    pub fn rank_bounds(&self, i: usize) -> RankInterval {
        let lo: u64 = self.tuples[..=i].iter().map(|t| t.g).sum();
        RankInterval::new(lo, lo + self.tuples[i].delta)
    }

    /// Every tuple with its rank bounds, in order.
    pub fn iter_bounds(&self) -> impl Iterator<Item = (SketchTuple, RankInterval)> + '_ {
        self.tuples.iter().scan(0u64, |acc, t| {
            *acc += t.g;
            Some((*t, RankInterval::new(*acc, *acc + t.delta)))
        })
    }

    /// Non-private alpha-approximate q-quantile: the first tuple whose rank
    /// bounds sit within `alpha n` of `ceil(q n)` on both sides.
    pub fn quantile(&self, q: f64) -> Result<(usize, Element)> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidParameter(format!("q must lie in (0, 1), got {q}")));
        }
        if self.n == 0 {
            return Err(Error::EmptySummary);
        }
        let r = target_rank(q, self.n) as i64;
        let tol = self.alpha * self.n as f64;
        self.iter_bounds()
            .enumerate()
            .find(|(_, (_, b))| {
                let worst = (r - b.lo as i64).max(b.hi as i64 - r);
                worst as f64 <= tol + 1e-9
            })
            .map(|(i, (t, _))| (i, t.v))
            .ok_or(Error::NoQualifyingTuple)
    }

    pub fn max_g_plus_delta(&self) -> u64 {
        self.tuples.iter().map(|t| t.g + t.delta).max().unwrap_or(0)
    }

    /// Checks the invariants that hold at every point in time: stable sort
    /// order, `sum g = n`, exact extremes, positive gaps.
    pub fn check_structure(&self) -> std::result::Result<(), String> {
        let total: u64 = self.tuples.iter().map(|t| t.g).sum();
        if total != self.n {
            return Err(format!("sum of g = {total} but n = {}", self.n));
        }
        if self.n == 0 {
            return if self.tuples.is_empty() {
                Ok(())
            } else {
                Err("tuples present with n = 0".into())
            };
        }
        if let Some(w) = self.tuples.windows(2).find(|w| w[0].v > w[1].v) {
            return Err(format!("unsorted pair {:?} > {:?}", w[0].v, w[1].v));
        }
        if self.tuples.iter().any(|t| t.g == 0) {
            return Err("tuple with g = 0".into());
        }
        let first = self.tuples[0];
        let last = *self.tuples.last().unwrap();
        if first.g != 1 || first.delta != 0 {
            return Err(format!("first tuple is {first:?}, expected g = 1, delta = 0"));
        }
        if last.g != 1 || last.delta != 0 {
            return Err(format!("last tuple is {last:?}, expected g = 1, delta = 0"));
        }
        Ok(())
    }

    /// Invariants that hold right after a compress: everything in
    /// [`check_structure`](Self::check_structure), non-decreasing upper
    /// bounds and, once `n >= 1/(2 alpha)`, `max(g + delta) <= 2 alpha n`.
    pub fn check_compressed(&self) -> std::result::Result<(), String> {
        self.check_structure()?;
        let mut prev_hi = 0;
        for (i, (_, b)) in self.iter_bounds().enumerate() {
            if b.hi < prev_hi {
                return Err(format!("upper bound decreases at tuple {i}"));
            }
            prev_hi = b.hi;
        }
        if (self.n as f64) >= 1.0 / (2.0 * self.alpha) {
            let limit = two_alpha_n(self.alpha, self.n);
            let worst = self.max_g_plus_delta();
            if worst as f64 > limit {
                return Err(format!("max(g + delta) = {worst} > 2 alpha n = {limit}"));
            }
        }
        Ok(())
    }
}

/// For each index `i`, the first index of the maximal run of tuples directly
/// left of `i` whose bands are strictly smaller than `bands[i]`. These are
/// exactly the descendants of `i` in the band tree. Index 0 is excluded.
pub(crate) fn descendant_runs(bands: &[u32]) -> Vec<usize> {
    let mut start = vec![1usize; bands.len()];
    // indices with band >= current, nearest on top
    let mut stack: Vec<usize> = Vec::new();
    for i in 1..bands.len() {
        while let Some(&top) = stack.last() {
            if bands[top] < bands[i] {
                stack.pop();
            } else {
                break;
            }
        }
        start[i] = stack.last().map_or(1, |&k| k + 1);
        stack.push(i);
    }
    if !bands.is_empty() {
        start[0] = 0;
    }
    start
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn el(v: u64) -> Element {
        Element(v)
    }

    fn summary_of(alpha: f64, values: &[u64]) -> GkSummary {
        let mut s = GkSummary::new(alpha).unwrap();
        s.stream_insert(values.iter().copied().map(Element));
        s
    }

    #[test]
    fn insert_into_empty() {
        let mut s = GkSummary::new(0.25).unwrap();
        s.insert(el(5));
        assert_eq!(s.tuples(), &[SketchTuple::new(el(5), 1, 0)]);
        assert_eq!(s.n(), 1);
    }

    #[test]
    fn insert_middle_uses_floor_two_alpha_n() {
        let mut s = GkSummary::new(0.25).unwrap();
        s.insert(el(3));
        s.insert(el(9));
        s.insert(el(7));
        assert_eq!(
            s.tuples(),
            &[
                SketchTuple::new(el(3), 1, 0),
                SketchTuple::new(el(7), 1, 1),
                SketchTuple::new(el(9), 1, 0)
            ]
        );
        assert_eq!(s.n(), 3);
    }

    #[test]
    fn insert_new_minimum_and_maximum() {
        let mut s = GkSummary::new(0.25).unwrap();
        s.insert(el(3));
        s.insert(el(9));
        s.insert(el(1));
        assert_eq!(s.tuples()[0], SketchTuple::new(el(1), 1, 0));
        s.insert(el(9));
        assert_eq!(*s.tuples().last().unwrap(), SketchTuple::new(el(9), 1, 0));
        assert_eq!(s.len(), 4);
    }

    #[test]
    fn equal_values_keep_stable_order() {
        let mut s = GkSummary::new(0.01).unwrap();
        for v in [5, 1, 5, 9, 5] {
            s.insert(el(v));
        }
        let vs: Vec<u64> = s.tuples().iter().map(|t| t.v.0).collect();
        assert_eq!(vs, vec![1, 5, 5, 5, 9]);
        // the later duplicates enter after earlier ones, with fresh deltas
        assert_eq!(s.tuples()[1].delta, 0);
    }

    #[test]
    fn compress_is_noop_below_guard() {
        let mut s = GkSummary::new(0.01).unwrap();
        for v in 0..40 {
            s.insert(el(v));
        }
        let before = s.clone();
        s.compress();
        assert_eq!(s, before);
    }

    #[test]
    fn compress_does_not_merge_at_equality() {
        // n = 10, alpha = 0.5 -> 2 alpha n = 10. Middle pair: g* = 3 and the
        // successor has g + delta = 5 + 2, summing to exactly 10.
        let tuples = vec![
            SketchTuple::new(el(0), 1, 0),
            SketchTuple::new(el(1), 3, 3),
            SketchTuple::new(el(2), 5, 2),
            SketchTuple::new(el(3), 1, 0),
        ];
        let mut s = GkSummary::from_parts(0.5, 10, tuples.clone()).unwrap();
        s.compress();
        assert_eq!(s.len(), 4);

        // one less on the successor and the pair merges
        let mut merged = tuples;
        merged[2].delta = 1;
        let mut s = GkSummary::from_parts(0.5, 10, merged).unwrap();
        s.compress();
        assert_eq!(s.len(), 3);
        // the merged tuple sits right before the exact maximum, so its upper
        // bound tightens to its lower bound
        assert_eq!(s.tuples()[1], SketchTuple::new(el(2), 8, 0));
    }

    #[test]
    fn band_examples() {
        let limit = 20;
        let (n, alpha) = (100, 0.1);
        assert_eq!(band(limit, n, alpha).unwrap(), 0);
        let b20 = band(20, n, alpha).unwrap();
        let b15 = band(15, n, alpha).unwrap();
        let b0 = band(0, n, alpha).unwrap();
        assert!(b20 < b15 && b15 < b0);
        let max = (0..=20).map(|d| band(d, n, alpha).unwrap()).max().unwrap();
        assert_eq!(b0, max);
        assert!(band(21, n, alpha).is_err());
    }

    #[test]
    fn band_is_monotone() {
        for (n, alpha) in [(100, 0.1), (1000, 0.013), (777, 0.05), (5, 0.3)] {
            let cap = two_alpha_n(alpha, n).floor() as u64;
            let bands: Vec<u32> = (0..=cap).map(|d| band(d, n, alpha).unwrap()).collect();
            assert!(bands.windows(2).all(|w| w[0] >= w[1]), "{n} {alpha}: {bands:?}");
        }
    }

    #[test]
    fn figure_one_stream_at_half() {
        let s = summary_of(0.5, &[1, 2, 2, 3, 5, 2, 6, 5]);
        let (_, v) = s.quantile(0.5).unwrap();
        assert!((1..=5).contains(&v.0), "{v:?}");
    }

    #[test]
    fn figure_one_stream_at_quarter() {
        let s = summary_of(0.25, &[1, 2, 2, 3, 5, 2, 6, 5]);
        let (_, v) = s.quantile(0.5).unwrap();
        assert!([2, 3, 5].contains(&v.0), "{v:?}");
    }

    #[test]
    fn constant_stream() {
        let s = summary_of(0.05, &[7; 500]);
        for q in [0.01, 0.3, 0.5, 0.99] {
            assert_eq!(s.quantile(q).unwrap().1, el(7));
        }
    }

    #[test]
    fn sorted_stream_quarter() {
        let values: Vec<u64> = (1..=1000).collect();
        let s = summary_of(0.01, &values);
        let (_, v) = s.quantile(0.25).unwrap();
        // value k has rank k
        assert!((240..=260).contains(&v.0), "{v:?}");
    }

    #[test]
    fn tiny_alpha_keeps_everything() {
        let values = [9, 3, 3, 7, 1, 8, 2];
        let s = summary_of(1e-6, &values);
        let mut sorted = values.to_vec();
        sorted.sort();
        let stored: Vec<u64> = s.tuples().iter().map(|t| t.v.0).collect();
        assert_eq!(stored, sorted);
        assert_eq!(s.tuples().iter().map(|t| t.g).sum::<u64>(), 7);
    }

    #[test]
    fn rank_bounds_extremes() {
        let values: Vec<u64> = (0..5000).map(|i| (i * 7919) % 1013).collect();
        let s = summary_of(0.01, &values);
        assert_eq!(s.rank_bounds(0), RankInterval::new(1, 1));
        assert_eq!(s.rank_bounds(s.len() - 1), RankInterval::new(5000, 5000));
        for i in 0..s.len() {
            let b = s.rank_bounds(i);
            assert!(b.lo >= 1 && b.hi <= 5000);
        }
    }

    #[test]
    fn quantile_rejects_bad_input() {
        let s = GkSummary::new(0.1).unwrap();
        assert_eq!(s.quantile(0.5), Err(Error::EmptySummary));
        let s = summary_of(0.1, &[1, 2, 3]);
        assert!(s.quantile(0.0).is_err());
        assert!(s.quantile(1.0).is_err());
    }

    #[test]
    fn adversarial_sorted_stream_size() {
        let n = 100_000u64;
        let alpha = 0.01;
        let s = summary_of(alpha, &(0..n).collect::<Vec<_>>());
        let bound = 40.0 * (1.0 / alpha) * (alpha * n as f64).ln();
        assert!((s.len() as f64) <= bound, "{} tuples", s.len());
        s.check_compressed().unwrap();
    }

    fn descendants_by_parent(bands: &[u32], i: usize) -> Vec<usize> {
        // parent(k) = smallest j > k with band[j] > band[k]
        let parent = |k: usize| (k + 1..bands.len()).find(|&j| bands[j] > bands[k]);
        (1..i)
            .filter(|&k| {
                let mut cur = k;
                while let Some(p) = parent(cur) {
                    if p == i {
                        return true;
                    }
                    if p > i {
                        return false;
                    }
                    cur = p;
                }
                false
            })
            .collect()
    }

    proptest! {
        #[test]
        fn descendants_form_a_contiguous_run(bands in prop::collection::vec(0u32..6, 2..40)) {
            let runs = descendant_runs(&bands);
            for (i, &start) in runs.iter().enumerate().skip(1) {
                let by_tree = descendants_by_parent(&bands, i);
                let by_run: Vec<usize> = (start..i).collect();
                prop_assert_eq!(by_tree, by_run);
            }
        }

        #[test]
        fn invariants_hold_after_every_compress(
            values in prop::collection::vec(0u64..300, 1..1500),
            alpha in prop::sample::select(vec![0.5, 0.2, 0.1, 0.03, 0.01]),
        ) {
            let mut s = GkSummary::new(alpha).unwrap();
            for &v in &values {
                if (s.n() + 1).is_multiple_of(s.compress_period()) {
                    s.compress();
                    prop_assert!(s.check_compressed().is_ok(), "{:?}", s.check_compressed());
                }
                s.insert(Element(v));
                prop_assert!(s.check_structure().is_ok(), "{:?}", s.check_structure());
            }
            s.compress();
            prop_assert!(s.check_compressed().is_ok(), "{:?}", s.check_compressed());
        }
    }
}
