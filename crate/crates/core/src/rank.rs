//! Rank-interval estimates for every universe element from a summary, and
//! the utility score the exponential mechanism uses.
//!
//! Two virtual sentinel tuples sit at `-inf` (rank `[0, 0]`) and `+inf`
//! (rank `[n + 1, n + 1]`), so every element has a stored value on each
//! side. They are never stored in the summary itself.
//!
//! For an element `x`:
//!
//! * if `x` equals a stored value, `i` being its first occurrence, the lower
//!   estimate is `r_min(v_i)` and the upper estimate the smallest `r_max`
//!   over stored values strictly above `x`;
//! * otherwise the lower estimate is the largest `r_min` over stored values
//!   strictly below `x` and the upper estimate the smallest `r_max` over
//!   stored values strictly above.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gk::{target_rank, GkSummary, RankInterval};
use crate::universe::{Element, Universe};

/// A target quantile `q` together with its rank `ceil(q n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetQuantile {
    pub q: f64,
    pub rank: u64,
}

impl TargetQuantile {
    pub fn new(q: f64, n: u64) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidParameter(format!("q must lie in (0, 1), got {q}")));
        }
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        Ok(Self {
            q,
            rank: target_rank(q, n),
        })
    }
}

/// `-d(target, interval)`.
pub fn interval_utility(interval: RankInterval, target: u64) -> i64 {
    -(interval.distance(target) as i64)
}

#[derive(Debug, Clone)]
pub struct AugmentedSummary<'a> {
    summary: &'a GkSummary,
    lower: Vec<u64>,
    // min over j >= i of r_max(v_j)
    upper_suffix_min: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmentKind {
    /// A single stored value.
    Value(Element),
    /// The non-empty open gap strictly between two neighbouring distinct
    /// stored values; `None` is a sentinel.
    Gap {
        after: Option<Element>,
        before: Option<Element>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoredSegment {
    pub kind: SegmentKind,
    /// First tuple index of the value, or for a gap the index of the tuple
    /// bounding it on the right (`len` for the `+inf` gap).
    pub anchor: usize,
    pub cardinality: u64,
    pub interval: RankInterval,
    pub utility: i64,
}

impl ScoredSegment {
    pub fn contains(&self, x: Element) -> bool {
        match self.kind {
            SegmentKind::Value(v) => v == x,
            SegmentKind::Gap { after, before } => {
                after.is_none_or(|a| a < x) && before.is_none_or(|b| x < b)
            }
        }
    }
}

impl<'a> AugmentedSummary<'a> {
    pub fn new(summary: &'a GkSummary) -> Self {
        let lower: Vec<u64> = summary
            .tuples()
            .iter()
            .scan(0u64, |acc, t| {
                *acc += t.g;
                Some(*acc)
            })
            .collect();
        let mut upper_suffix_min = vec![0u64; lower.len()];
        let mut running = u64::MAX;
        for i in (0..lower.len()).rev() {
            running = running.min(lower[i] + summary.tuples()[i].delta);
            upper_suffix_min[i] = running;
        }
        Self {
            summary,
            lower,
            upper_suffix_min,
        }
    }

    pub fn summary(&self) -> &GkSummary {
        self.summary
    }

    pub fn n(&self) -> u64 {
        self.summary.n()
    }

    fn upper_from(&self, j: usize) -> u64 {
        self.upper_suffix_min
            .get(j)
            .copied()
            .unwrap_or(self.summary.n() + 1)
    }

    fn lower_before(&self, i: usize) -> u64 {
        if i == 0 {
            0
        } else {
            self.lower[i - 1]
        }
    }

    pub fn rank_interval(&self, x: Element) -> RankInterval {
        let tuples = self.summary.tuples();
        let i = tuples.partition_point(|t| t.v < x);
        if i < tuples.len() && tuples[i].v == x {
            let j = tuples.partition_point(|t| t.v <= x);
            RankInterval::new(self.lower[i], self.upper_from(j))
        } else {
            RankInterval::new(self.lower_before(i), self.upper_from(i))
        }
    }

    pub fn utility(&self, target: TargetQuantile, x: Element) -> i64 {
        interval_utility(self.rank_interval(x), target.rank)
    }

    /// Streams the partition of the universe into stored-value and gap
    /// segments, each with its (constant) utility. Empty gaps are skipped.
    pub fn segments(&self, universe: &'a Universe, target: TargetQuantile) -> Segments<'_, 'a> {
        Segments {
            aug: self,
            universe,
            target,
            next: 0,
            prev: None,
            pending: None,
            done: false,
        }
    }
}

/// Iterator returned by [`AugmentedSummary::segments`]; holds O(1) state.
pub struct Segments<'s, 'a> {
    aug: &'s AugmentedSummary<'a>,
    universe: &'a Universe,
    target: TargetQuantile,
    next: usize,
    prev: Option<Element>,
    pending: Option<ScoredSegment>,
    done: bool,
}

impl Segments<'_, '_> {
    fn gap(&self, before: Option<Element>, anchor: usize) -> Option<ScoredSegment> {
        let cardinality = self.universe.segment_cardinality(self.prev, before).ok()?;
        if cardinality == 0 {
            return None;
        }
        let interval = RankInterval::new(self.aug.lower_before(anchor), self.aug.upper_from(anchor));
        Some(ScoredSegment {
            kind: SegmentKind::Gap {
                after: self.prev,
                before,
            },
            anchor,
            cardinality,
            interval,
            utility: interval_utility(interval, self.target.rank),
        })
    }
}

impl Iterator for Segments<'_, '_> {
    type Item = ScoredSegment;

    fn next(&mut self) -> Option<ScoredSegment> {
        if let Some(seg) = self.pending.take() {
            return Some(seg);
        }
        let tuples = self.aug.summary.tuples();
        if self.next < tuples.len() {
            let i = self.next;
            let v = tuples[i].v;
            let mut j = i + 1;
            while j < tuples.len() && tuples[j].v == v {
                j += 1;
            }
            let gap = self.gap(Some(v), i);
            let interval = RankInterval::new(self.aug.lower[i], self.aug.upper_from(j));
            let value = ScoredSegment {
                kind: SegmentKind::Value(v),
                anchor: i,
                cardinality: 1,
                interval,
                utility: interval_utility(interval, self.target.rank),
            };
            self.prev = Some(v);
            self.next = j;
            return match gap {
                Some(g) => {
                    self.pending = Some(value);
                    Some(g)
                }
                None => Some(value),
            };
        }
        if self.done {
            return None;
        }
        self.done = true;
        self.gap(None, tuples.len())
    }
}
