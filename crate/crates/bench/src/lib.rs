//! Benchmark harness for `dpq-core`: seeded generators, CSV ingestion,
//! multi-trial experiments and result tables, plus the `dpq` command line.

// `!(x > 0.0)` is deliberate: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod emit;
pub mod error;
pub mod experiment;
pub mod source;

pub use error::{BenchError, Result};
