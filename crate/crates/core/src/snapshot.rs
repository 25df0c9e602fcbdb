//! Persisting summaries.
//!
//! Binary layout, all little-endian:
//!
//! ```text
//! magic   b"DPQGK\0"   6 bytes
//! version u16          currently 1
//! alpha   f64
//! n       u64
//! count   u64
//! count * (v u64, g u64, delta u64)
//! ```
//!
//! Decoding re-checks the summary's structural invariants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gk::{GkSummary, SketchTuple};
use crate::universe::Element;

const MAGIC: &[u8; 6] = b"DPQGK\0";
pub const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 6 + 2 + 8 + 8 + 8;

pub fn to_bytes(s: &GkSummary) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 24 * s.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&s.alpha().to_le_bytes());
    out.extend_from_slice(&s.n().to_le_bytes());
    out.extend_from_slice(&(s.len() as u64).to_le_bytes());
    for t in s.tuples() {
        out.extend_from_slice(&t.v.0.to_le_bytes());
        out.extend_from_slice(&t.g.to_le_bytes());
        out.extend_from_slice(&t.delta.to_le_bytes());
    }
    out
}

fn word(bytes: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8-byte slice"))
}

pub fn from_bytes(bytes: &[u8]) -> Result<GkSummary> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Snapshot(format!("truncated header ({} bytes)", bytes.len())));
    }
    if &bytes[..6] != MAGIC {
        return Err(Error::Snapshot("bad magic".into()));
    }
    let version = u16::from_le_bytes([bytes[6], bytes[7]]);
    if version != FORMAT_VERSION {
        return Err(Error::Snapshot(format!("unsupported version {version}")));
    }
    let alpha = f64::from_bits(word(bytes, 8));
    let n = word(bytes, 16);
    let count = word(bytes, 24);
    let body = &bytes[HEADER_LEN..];
    if count.checked_mul(24) != Some(body.len() as u64) {
        return Err(Error::Snapshot(format!(
            "expected {count} tuples, found {} body bytes",
            body.len()
        )));
    }
    let tuples = body
        .chunks_exact(24)
        .map(|c| SketchTuple::new(Element(word(c, 0)), word(c, 8), word(c, 16)))
        .collect();
    GkSummary::from_parts(alpha, n, tuples)
}

#[derive(Serialize, Deserialize)]
struct JsonSnapshot {
    version: u16,
    alpha: f64,
    n: u64,
    tuples: Vec<SketchTuple>,
}

pub fn to_json(s: &GkSummary) -> String {
    serde_json::to_string(&JsonSnapshot {
        version: FORMAT_VERSION,
        alpha: s.alpha(),
        n: s.n(),
        tuples: s.tuples().to_vec(),
    })
    .expect("summary serializes")
}

pub fn from_json(text: &str) -> Result<GkSummary> {
    let doc: JsonSnapshot = serde_json::from_str(text).map_err(|e| Error::Snapshot(e.to_string()))?;
    if doc.version != FORMAT_VERSION {
        return Err(Error::Snapshot(format!("unsupported version {}", doc.version)));
    }
    GkSummary::from_parts(doc.alpha, doc.n, doc.tuples)
}
