//! Streaming quantiles under pure differential privacy on top of a
//! Greenwald-Khanna summary.

// `!(x > 0.0)` is deliberate: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod continual;
pub mod dp;
pub mod error;
pub mod gk;
pub mod histogram;
pub mod mechanism;
pub mod oracles;
pub mod rank;
pub mod snapshot;
pub mod universe;

pub use continual::{Continual, ContinualParams, Observation};
pub use dp::{PrivacyParams, RandomSource};
pub use error::{Error, Result};
pub use gk::{GkSummary, RankInterval, SketchTuple};
pub use histogram::{build_noisy_cdf, hist_all_quantiles, hist_quantile, HistogramSpec, NoisyCdf};
pub use mechanism::{dp_quantile_full, dp_quantile_gk, dp_quantiles_multi, ExponentDivisor, MechanismConfig, SortedData};
pub use rank::{AugmentedSummary, TargetQuantile};
pub use universe::{Element, Universe};
