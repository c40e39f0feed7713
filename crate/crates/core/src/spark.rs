//! Spark by ascending subset enumeration.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::Combinations;
use crate::error::{Error, Result};
use crate::linalg::{self, SensingMatrix};

pub const DEFAULT_MAX_COLS: usize = 24;

/// Levels with more subsets than this are tested in parallel.
const PARALLEL_LEVEL: usize = 512;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparkResult {
    /// Smallest number of linearly dependent columns, or N+1 when the columns
    /// are independent.
    pub spark: usize,
    /// Lexicographically first dependent subset of size `spark` (0-based).
    pub witness: Option<Vec<usize>>,
    /// Set when no dependent subset exists; `spark` is then N+1.
    pub full_column_rank: bool,
}

impl SparkResult {
    /// L = spark − 1: every nonzero null vector has at least L+1 nonzeros.
    pub fn l(&self) -> usize {
        self.spark - 1
    }
}

pub fn compute_spark(a: &SensingMatrix, rank_tol: f64, max_cols: usize) -> Result<SparkResult> {
    let (m, n) = (a.rows(), a.cols());
    if n > max_cols {
        return Err(Error::TooLarge {
            what: "columns",
            size: n,
            limit: max_cols,
        });
    }
    if a.entries().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidMatrix("non-finite entries".into()));
    }

    let dependent = |cols: &Vec<usize>| -> bool {
        let sub = a.select_columns(cols);
        linalg::rank(&sub, rank_tol).map_or(false, |r| r < cols.len())
    };

    for s in 1..=(m + 1).min(n) {
        let hit = if crate::combinatorics::binomial(n, s) > PARALLEL_LEVEL as u128 {
            let level: Vec<Vec<usize>> = Combinations::new(n, s).collect();
            level.into_par_iter().find_first(|c| dependent(c))
        } else {
            Combinations::new(n, s).find(|c| dependent(c))
        };
        if let Some(witness) = hit {
            return Ok(SparkResult {
                spark: s,
                witness: Some(witness),
                full_column_rank: false,
            });
        }
    }
    Ok(SparkResult {
        spark: n + 1,
        witness: None,
        full_column_rank: true,
    })
}
