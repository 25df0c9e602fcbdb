//! Finite ordered data universe and the real-to-grid mapping.
//!
//! Raw values are clipped to `[lo, hi]` and rounded to the nearest of
//! `cardinality` evenly spaced grid points. Ties between two grid points
//! round up.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An element of the universe, identified by its grid index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Element(pub u64);

impl Element {
    pub fn index(self) -> u64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Universe {
    lo: f64,
    hi: f64,
    cardinality: u64,
}

/// Grid size used by the benchmark harness unless overridden.
pub const DEFAULT_CARDINALITY: u64 = 1 << 20;

impl Universe {
    pub fn new(lo: f64, hi: f64, cardinality: u64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::InvalidUniverse(format!(
                "need finite lo <= hi, got [{lo}, {hi}]"
            )));
        }
        // a single point needs lo == hi, anything larger a proper interval
        if cardinality == 0 || (cardinality == 1) != (lo == hi) {
            return Err(Error::InvalidUniverse(format!(
                "cardinality {cardinality} does not fit [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi, cardinality })
    }

    /// Identity universe over the integers `min..=max`: grid step is exactly one.
    pub fn integers(min: i64, max: i64) -> Result<Self> {
        if min > max {
            return Err(Error::InvalidUniverse(format!(
                "need min <= max, got [{min}, {max}]"
            )));
        }
        let card = (max as i128 - min as i128 + 1) as u64;
        Self::new(min as f64, max as f64, card)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn cardinality(&self) -> u64 {
        self.cardinality
    }

    /// Grid spacing; zero for a one-point universe.
    pub fn step(&self) -> f64 {
        if self.cardinality == 1 {
            return 0.0;
        }
        (self.hi - self.lo) / (self.cardinality - 1) as f64
    }

    pub fn min_element(&self) -> Element {
        Element(0)
    }

    pub fn max_element(&self) -> Element {
        Element(self.cardinality - 1)
    }

    pub fn encode(&self, x: f64) -> Result<Element> {
        if x.is_nan() {
            return Err(Error::NotANumber);
        }
        if self.cardinality == 1 {
            return Ok(Element(0));
        }
        let clipped = x.clamp(self.lo, self.hi);
        let pos = (clipped - self.lo) / self.step();
        let idx = (pos + 0.5).floor();
        let last = (self.cardinality - 1) as f64;
        Ok(Element(idx.clamp(0.0, last) as u64))
    }

    pub fn decode(&self, e: Element) -> Result<f64> {
        if e.0 >= self.cardinality {
            return Err(Error::OutOfRange {
                index: e.0,
                cardinality: self.cardinality,
            });
        }
        if e.0 == self.cardinality - 1 {
            return Ok(self.hi);
        }
        Ok(self.lo + e.0 as f64 * (self.hi - self.lo) / (self.cardinality - 1) as f64)
    }

    /// Number of elements strictly between `a` and `b`. `None` stands for
    /// the `-inf` sentinel on the left and `+inf` on the right.
    pub fn segment_cardinality(&self, a: Option<Element>, b: Option<Element>) -> Result<u64> {
        for e in [a, b].into_iter().flatten() {
            if e.0 >= self.cardinality {
                return Err(Error::OutOfRange {
                    index: e.0,
                    cardinality: self.cardinality,
                });
            }
        }
        match (a, b) {
            (Some(a), Some(b)) if a >= b => Err(Error::SegmentOrder { lo: a.0, hi: b.0 }),
            (Some(a), Some(b)) => Ok(b.0 - a.0 - 1),
            (None, Some(b)) => Ok(b.0),
            (Some(a), None) => Ok(self.cardinality - a.0 - 1),
            (None, None) => Ok(self.cardinality),
        }
    }

    /// `k`-th element of the open segment `(a, b)`, `k` counted from zero.
    pub fn nth_between(&self, a: Option<Element>, k: u64) -> Element {
        Element(a.map_or(0, |a| a.0 + 1) + k)
    }
}
