//! Data sources: seeded synthetic generators and CSV columns.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal, StandardUniform};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Dist {
    /// Uniform on [0, 1].
    Uniform,
    /// Standard normal clipped to [-10, 10].
    Normal,
}

impl Dist {
    pub fn default_range(self) -> (f64, f64) {
        match self {
            Dist::Uniform => (0.0, 1.0),
            Dist::Normal => (-10.0, 10.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnRef {
    Name(String),
    Index(usize),
}

impl ColumnRef {
    /// A bare non-negative integer is an index, anything else a header name.
    pub fn parse(s: &str) -> Self {
        s.parse().map_or_else(|_| ColumnRef::Name(s.to_string()), ColumnRef::Index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Source {
    Synthetic(Dist),
    Csv {
        path: PathBuf,
        column: ColumnRef,
        has_header: bool,
    },
}

impl Source {
    pub fn describe(&self) -> String {
        match self {
            Source::Synthetic(Dist::Uniform) => "uniform(0,1)".into(),
            Source::Synthetic(Dist::Normal) => "normal(0,1) clipped to [-10,10]".into(),
            Source::Csv { path, column, .. } => {
                let col = match column {
                    ColumnRef::Name(n) => n.clone(),
                    ColumnRef::Index(i) => format!("#{i}"),
                };
                format!("csv:{}:{col}", path.display())
            }
        }
    }
}

/// Endless seeded stream of draws; `take(n)` it.
pub struct Synthetic {
    dist: Dist,
    rng: ChaCha12Rng,
    normal: Normal<f64>,
}

impl Iterator for Synthetic {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(match self.dist {
            Dist::Uniform => StandardUniform.sample(&mut self.rng),
            Dist::Normal => self.normal.sample(&mut self.rng).clamp(-10.0, 10.0),
        })
    }
}

pub fn generate(dist: Dist, seed: u64) -> Synthetic {
    Synthetic {
        dist,
        rng: ChaCha12Rng::seed_from_u64(seed),
        normal: Normal::new(0.0, 1.0).expect("unit normal"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvData {
    pub values: Vec<f64>,
    pub skipped: u64,
}

/// Reads one numeric column, in file order. Rows whose field is missing,
/// unparsable or non-finite are skipped and counted.
pub fn ingest_csv(path: &Path, column: &ColumnRef, has_header: bool) -> Result<CsvData> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| BenchError::Data(format!("cannot open {}: {e}", path.display())))?;
    let idx = match column {
        ColumnRef::Index(i) => *i,
        ColumnRef::Name(name) => {
            if !has_header {
                return Err(BenchError::Config(format!(
                    "column '{name}' named but the file is read without a header"
                )));
            }
            let headers = reader
                .headers()
                .map_err(|e| BenchError::Data(format!("cannot read header: {e}")))?;
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| BenchError::Config(format!("no column named '{name}'")))?
        }
    };
    let mut values = Vec::new();
    let mut skipped = 0u64;
    for record in reader.records() {
        let record = record.map_err(|e| BenchError::Data(format!("malformed csv: {e}")))?;
        match record.get(idx).and_then(|f| f.parse::<f64>().ok()) {
            Some(x) if x.is_finite() => values.push(x),
            _ => skipped += 1,
        }
    }
    if values.is_empty() {
        return Err(BenchError::Data(format!("no numeric values in {}", path.display())));
    }
    Ok(CsvData { values, skipped })
}

/// Population standard deviation.
pub fn population_stddev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn csv_file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn uniform_draws_in_unit_interval() {
        assert!(generate(Dist::Uniform, 1).take(10).all(|x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn normal_is_clipped() {
        assert!(generate(Dist::Normal, 2).take(200_000).all(|x| x.abs() <= 10.0));
    }

    #[test]
    fn same_seed_same_stream() {
        let a: Vec<u64> = generate(Dist::Normal, 9).take(1000).map(f64::to_bits).collect();
        let b: Vec<u64> = generate(Dist::Normal, 9).take(1000).map(f64::to_bits).collect();
        assert_eq!(a, b);
        let c: Vec<u64> = generate(Dist::Normal, 10).take(1000).map(f64::to_bits).collect();
        assert_ne!(a, c);
    }

    #[test]
    fn plain_column() {
        let f = csv_file("1\n2\n3\n");
        let d = ingest_csv(f.path(), &ColumnRef::Index(0), false).unwrap();
        assert_eq!(d.values, vec![1.0, 2.0, 3.0]);
        assert_eq!(d.skipped, 0);
    }

    #[test]
    fn header_and_named_column() {
        let f = csv_file("id,temp\n1,20.5\n2,abc\n3,19\n4\n");
        let d = ingest_csv(f.path(), &ColumnRef::parse("temp"), true).unwrap();
        assert_eq!(d.values, vec![20.5, 19.0]);
        assert_eq!(d.skipped, 2);
    }

    #[test]
    fn malformed_row_is_counted() {
        let f = csv_file("1\nabc\n3\n");
        let d = ingest_csv(f.path(), &ColumnRef::Index(0), false).unwrap();
        assert_eq!(d.values, vec![1.0, 3.0]);
        assert_eq!(d.skipped, 1);
    }

    #[test]
    fn errors() {
        let f = csv_file("x\ny\n");
        assert!(matches!(
            ingest_csv(f.path(), &ColumnRef::Index(0), false),
            Err(BenchError::Data(_))
        ));
        assert!(matches!(
            ingest_csv(Path::new("/nonexistent/file.csv"), &ColumnRef::Index(0), false),
            Err(BenchError::Data(_))
        ));
        let f = csv_file("a,b\n1,2\n");
        assert!(matches!(
            ingest_csv(f.path(), &ColumnRef::parse("c"), true),
            Err(BenchError::Config(_))
        ));
    }

    #[test]
    fn stddev_is_population() {
        assert_eq!(population_stddev(&[1.0, 3.0]), 1.0);
        assert_eq!(population_stddev(&[5.0; 4]), 0.0);
    }
}
