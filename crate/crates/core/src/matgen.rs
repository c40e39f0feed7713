//! Seeded matrix and vector generation, plus the plain-text matrix format.
//!
//! Text format: one matrix row per line, decimal entries separated by commas,
//! no trailing delimiter. Lines starting with `#` are comments, blank lines are
//! skipped. Vectors use one entry per line with the same comment rule.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Provenance, SensingMatrix};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    /// Standard normal N(0, 1).
    Gaussian,
    /// Uniform on (−1, 1).
    Uniform,
}

impl Distribution {
    fn sample(self, rng: &mut Stream) -> f64 {
        match self {
            Distribution::Gaussian => rng.sample(StandardNormal),
            Distribution::Uniform => rng.random_range(-1.0..1.0),
        }
    }

    /// Signed draw with magnitude at least 0.1.
    fn sample_bounded_away(self, rng: &mut Stream) -> f64 {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let mag = match self {
            Distribution::Gaussian => 0.1 + rng.sample::<f64, _>(StandardNormal).abs(),
            Distribution::Uniform => rng.random_range(0.1..1.0),
        };
        sign * mag
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Distribution::Gaussian => "gaussian",
            Distribution::Uniform => "uniform",
        })
    }
}

impl FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" | "normal" => Ok(Distribution::Gaussian),
            "uniform" => Ok(Distribution::Uniform),
            other => Err(Error::InvalidArgument(format!(
                "unknown distribution `{other}` (expected gaussian or uniform)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub distribution: Distribution,
    pub rows: usize,
    pub cols: usize,
    pub seed: u64,
    pub normalize_columns: bool,
}

impl GeneratorSpec {
    pub fn gaussian(rows: usize, cols: usize, seed: u64) -> Self {
        Self {
            distribution: Distribution::Gaussian,
            rows,
            cols,
            seed,
            normalize_columns: false,
        }
    }

    pub fn normalized(mut self) -> Self {
        self.normalize_columns = true;
        self
    }

    /// Parse `DIST:MxN`, e.g. `gaussian:4x8`.
    pub fn parse(text: &str, seed: u64) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("expected DIST:MxN, got `{text}`"));
        let (dist, dims) = text.split_once(':').ok_or_else(bad)?;
        let (m, n) = dims.split_once(['x', 'X']).ok_or_else(bad)?;
        let rows: usize = m.trim().parse().map_err(|_| bad())?;
        let cols: usize = n.trim().parse().map_err(|_| bad())?;
        if rows == 0 || cols == 0 {
            return Err(bad());
        }
        Ok(Self {
            distribution: dist.trim().parse()?,
            rows,
            cols,
            seed,
            normalize_columns: false,
        })
    }

    /// Short identifier, e.g. `gaussian:4x8:seed7`.
    pub fn id(&self) -> String {
        format!(
            "{}:{}x{}:seed{}{}",
            self.distribution,
            self.rows,
            self.cols,
            self.seed,
            if self.normalize_columns { ":unit" } else { "" }
        )
    }
}

/// Matrix with i.i.d. entries from the named distribution, drawn in row-major
/// order from the `(seed, "matrix", 0)` stream.
pub fn gen_matrix(spec: &GeneratorSpec) -> SensingMatrix {
    let mut rng = rng::stream(spec.seed, "matrix", 0);
    let (m, n) = (spec.rows, spec.cols);
    let mut entries: Vec<f64> = (0..m * n).map(|_| spec.distribution.sample(&mut rng)).collect();
    if spec.normalize_columns {
        for j in 0..n {
            let norm = (0..m).map(|i| entries[i * n + j].powi(2)).sum::<f64>().sqrt();
            if norm > 0.0 {
                for i in 0..m {
                    entries[i * n + j] /= norm;
                }
            }
        }
    }
    SensingMatrix::new(m, n, entries)
        .expect("generated entries are finite")
        .with_provenance(Provenance {
            generator: spec.id(),
            seed: spec.seed,
        })
}

/// k-sparse vector of length n: uniformly random support, nonzero values with
/// magnitude ≥ 0.1 so the support is unambiguous.
pub fn gen_sparse_vector(n: usize, k: usize, values: Distribution, seed: u64) -> Result<Vec<f64>> {
    let mut rng = rng::stream(seed, "sparse-vector", 0);
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("need 1 ≤ k ≤ n, got k={k}, n={n}")));
    }
    let mut support = rand::seq::index::sample(&mut rng, n, k).into_vec();
    support.sort_unstable();
    Ok(fill_support(n, &support, values, &mut rng))
}

/// Vector of length n with random values on the given support.
pub fn gen_on_support(n: usize, support: &[usize], values: Distribution, seed: u64) -> Vec<f64> {
    let mut rng = rng::stream(seed, "support-values", 0);
    fill_support(n, support, values, &mut rng)
}

fn fill_support(n: usize, support: &[usize], values: Distribution, rng: &mut Stream) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for &i in support {
        x[i] = values.sample_bounded_away(rng);
    }
    x
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
}

fn parse_entry(token: &str, line: usize, column: usize) -> Result<f64> {
    let t = token.trim();
    let v: f64 = t.parse().map_err(|_| Error::Parse {
        line,
        column,
        message: format!("`{t}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            column,
            message: format!("`{t}` is not finite"),
        });
    }
    Ok(v)
}

pub fn parse_matrix(text: &str) -> Result<SensingMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in data_lines(text) {
        let mut row = Vec::new();
        let mut col = 1;
        for token in line.split(',') {
            let lead = token.len() - token.trim_start().len();
            row.push(parse_entry(token, line_no, col + lead)?);
            col += token.len() + 1;
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::DimensionMismatch {
                    line: line_no,
                    expected: first.len(),
                    found: row.len(),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: "no matrix rows".into(),
        });
    }
    SensingMatrix::from_rows(&rows)
}

pub fn format_matrix(a: &SensingMatrix) -> String {
    let mut out = String::new();
    if let Some(p) = a.provenance() {
        out.push_str(&format!("# generator {} seed {}\n", p.generator, p.seed));
    }
    for i in 0..a.rows() {
        let row: Vec<String> = a.row(i).iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<SensingMatrix> {
    parse_matrix(&fs::read_to_string(path)?)
}

pub fn write_matrix(a: &SensingMatrix, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_matrix(a))?;
    Ok(())
}

pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    data_lines(text)
        .map(|(line, l)| {
            let lead = l.len() - l.trim_start().len();
            parse_entry(l, line, 1 + lead)
        })
        .collect()
}

pub fn read_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    parse_vector(&fs::read_to_string(path)?)
}

pub fn format_vector(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}\n")).collect()
}

pub fn write_vector(v: &[f64], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_vector(v))?;
    Ok(())
}
