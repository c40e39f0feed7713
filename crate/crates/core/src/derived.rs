//! Quantities built on γ: the recovery staircase k_p*(A), the reconstruction
//! exponent p_k*(A), and tables of γ over (p, k).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nsc::{EstimatorConfig, NscContext, NscEstimate, NscQuery, Status};

pub const DEFAULT_MARGIN: f64 = 1e-6;
pub const DEFAULT_TOL_P: f64 = 1e-3;
pub const DEFAULT_GRID_POINTS: usize = 101;

/// `points` evenly spaced values from 0 to 1 inclusive.
pub fn uniform_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points).map(|i| i as f64 / (points - 1) as f64).collect(),
    }
}

/// `steps` evenly spaced values from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi || steps == 0 {
        return Err(Error::InvalidArgument(format!(
            "grid {lo}:{hi}:{steps} must satisfy 0 <= lo <= hi <= 1 with at least one step"
        )));
    }
    if steps == 1 {
        return Ok(vec![lo]);
    }
    let mut g: Vec<f64> = (0..steps)
        .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
        .collect();
    g[steps - 1] = hi;
    Ok(g)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("p grid is empty".into()));
    }
    if grid.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidArgument("p grid must lie in [0, 1]".into()));
    }
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("p grid must be sorted".into()));
    }
    Ok(())
}

/// Combined status of several evaluations: `LowerBound` if any was sampled.
fn merge(a: Status, b: Status) -> Status {
    if a == Status::LowerBound || b == Status::LowerBound {
        Status::LowerBound
    } else {
        Status::Exact
    }
}

/// Result of [`k_star`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KStar {
    pub p: f64,
    pub k: usize,
    /// `Exact` when every γ consulted was exact or infinite. With sampled
    /// values the rejection of k + 1 is still certified, but the acceptance
    /// of k is not, so `k` is then an upper estimate.
    pub status: Status,
    /// γ(ℓp, A, j) for j = 1, 2, … up to the first rejected j.
    pub gammas: Vec<f64>,
}

/// Largest k with γ(ℓp, A, k) < 1 − margin, or 0 if there is none.
pub fn k_star(ctx: &NscContext, p: f64, margin: f64) -> Result<KStar> {
    k_star_with(ctx, p, margin, ctx.config())
}

pub fn k_star_with(ctx: &NscContext, p: f64, margin: f64, config: &EstimatorConfig) -> Result<KStar> {
    if !(margin >= 0.0) {
        return Err(Error::InvalidArgument("margin must be nonnegative".into()));
    }
    let threshold = 1.0 - margin;
    let config = EstimatorConfig {
        stop_above: Some(threshold),
        ..config.clone()
    };
    let mut status = Status::Exact;
    let mut gammas = Vec::new();
    let mut k = 0;
    loop {
        let e = ctx.estimate_with(NscQuery::new(p, k + 1)?, &config)?;
        status = merge(status, e.status);
        gammas.push(e.value);
        if !(e.value < threshold) {
            break;
        }
        k += 1;
    }
    Ok(KStar { p, k, status, gammas })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExponentKind {
    /// γ(ℓ0, A, k) ≥ 1: no p recovers every k-sparse vector.
    Empty,
    /// γ(lo) < 1 ≤ γ(hi) with hi − lo ≤ tol_p.
    Interior { lo: f64, hi: f64 },
    /// γ(ℓ1, A, k) < 1.
    FullRange,
}

/// Result of [`p_star`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionExponent {
    pub k: usize,
    pub kind: ExponentKind,
    /// Some evaluation was a sampled lower bound. Only "p* ≥ lo" is then
    /// certified.
    pub downgraded: bool,
    pub evaluations: usize,
}

impl ReconstructionExponent {
    /// The threshold exponent: 0 when empty, 1 on the full range, else the
    /// bracket midpoint.
    pub fn point(&self) -> f64 {
        match self.kind {
            ExponentKind::Empty => 0.0,
            ExponentKind::Interior { lo, hi } => 0.5 * (lo + hi),
            ExponentKind::FullRange => 1.0,
        }
    }
}

/// Brackets the largest p below which γ(ℓp, A, k) < 1, by bisection on that
/// predicate. The comparison uses the same margin as [`k_star`] so the two
/// agree.
pub fn p_star(ctx: &NscContext, k: usize, tol_p: f64) -> Result<ReconstructionExponent> {
    p_star_with(ctx, k, tol_p, DEFAULT_MARGIN, ctx.config())
}

pub fn p_star_with(
    ctx: &NscContext,
    k: usize,
    tol_p: f64,
    margin: f64,
    config: &EstimatorConfig,
) -> Result<ReconstructionExponent> {
    if !(tol_p > 0.0) {
        return Err(Error::InvalidArgument("tol_p must be positive".into()));
    }
    let l = ctx.spark().l();
    if k == 0 || k > l {
        return Err(Error::InvalidArgument(format!("k must lie in 1..={l}, got {k}")));
    }
    let threshold = 1.0 - margin;
    let config = EstimatorConfig {
        stop_above: Some(threshold),
        ..config.clone()
    };
    let mut downgraded = false;
    let mut evaluations = 0;
    let mut below = |p: f64| -> Result<bool> {
        let e = ctx.estimate_with(NscQuery::new(p, k)?, &config)?;
        downgraded |= e.status == Status::LowerBound;
        evaluations += 1;
        Ok(e.value < threshold)
    };

    let kind = if !below(0.0)? {
        ExponentKind::Empty
    } else if below(1.0)? {
        ExponentKind::FullRange
    } else {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while hi - lo > tol_p {
            let mid = 0.5 * (lo + hi);
            if below(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        ExponentKind::Interior { lo, hi }
    };
    Ok(ReconstructionExponent {
        k,
        kind,
        downgraded,
        evaluations,
    })
}

/// A drop of k_p* between two adjacent grid points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub p_lo: f64,
    pub p_hi: f64,
    pub from: usize,
    pub to: usize,
}

impl Jump {
    pub fn size(&self) -> usize {
        self.from - self.to
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaircaseCurve {
    pub grid: Vec<f64>,
    pub values: Vec<usize>,
    pub statuses: Vec<Status>,
    /// Intervals where the value decreases.
    pub jumps: Vec<Jump>,
}

impl StaircaseCurve {
    pub fn is_non_increasing(&self) -> bool {
        self.values.windows(2).all(|w| w[0] >= w[1])
    }

    /// Every detected drop has size exactly 1.
    pub fn unit_jumps(&self) -> bool {
        self.jumps.iter().all(|j| j.size() == 1)
    }

    /// Pairs where the value goes up, which a correct γ never produces.
    pub fn rises(&self) -> Vec<(f64, f64)> {
        self.values
            .windows(2)
            .zip(self.grid.windows(2))
            .filter(|(v, _)| v[1] > v[0])
            .map(|(_, g)| (g[0], g[1]))
            .collect()
    }
}

/// k_p*(A) at each grid point.
pub fn staircase(ctx: &NscContext, grid: &[f64]) -> Result<StaircaseCurve> {
    staircase_with(ctx, grid, DEFAULT_MARGIN, ctx.config())
}

pub fn staircase_with(
    ctx: &NscContext,
    grid: &[f64],
    margin: f64,
    config: &EstimatorConfig,
) -> Result<StaircaseCurve> {
    check_grid(grid)?;
    let points: Vec<KStar> = grid
        .par_iter()
        .map(|&p| k_star_with(ctx, p, margin, config))
        .collect::<Result<_>>()?;
    let values: Vec<usize> = points.iter().map(|s| s.k).collect();
    let statuses = points.iter().map(|s| s.status).collect();
    let jumps = values
        .windows(2)
        .zip(grid.windows(2))
        .filter(|(v, _)| v[1] < v[0])
        .map(|(v, g)| Jump {
            p_lo: g[0],
            p_hi: g[1],
            from: v[0],
            to: v[1],
        })
        .collect();
    Ok(StaircaseCurve {
        grid: grid.to_vec(),
        values,
        statuses,
        jumps,
    })
}

/// γ(ℓp, A, k) for each k (rows) and p (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaTable {
    pub grid: Vec<f64>,
    pub ks: Vec<usize>,
    pub rows: Vec<Vec<NscEstimate>>,
}

impl GammaTable {
    pub fn get(&self, k: usize, p_index: usize) -> Option<&NscEstimate> {
        let row = self.ks.iter().position(|&x| x == k)?;
        self.rows[row].get(p_index)
    }

    /// Whether each row lies strictly above the previous one at every p
    /// where both are exact.
    pub fn rows_strictly_ordered(&self) -> bool {
        self.rows.windows(2).all(|r| {
            r[0].iter().zip(&r[1]).all(|(a, b)| {
                a.status != Status::Exact || b.status == Status::LowerBound || b.value > a.value
            })
        })
    }
}

pub fn gamma_curves(ctx: &NscContext, grid: &[f64], ks: &[usize]) -> Result<GammaTable> {
    check_grid(grid)?;
    let l = ctx.spark().l();
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > l) {
        return Err(Error::InvalidArgument(format!("k must lie in 1..={l}, got {k}")));
    }
    let cells: Vec<(usize, f64)> = ks.iter().flat_map(|&k| grid.iter().map(move |&p| (k, p))).collect();
    let flat: Vec<NscEstimate> = cells
        .par_iter()
        .map(|&(k, p)| ctx.estimate(NscQuery::new(p, k)?))
        .collect::<Result<_>>()?;
    let rows = flat.chunks(grid.len()).map(|c| c.to_vec()).collect();
    Ok(GammaTable {
        grid: grid.to_vec(),
        ks: ks.to_vec(),
        rows,
    })
}
