//! Sampling searches over the unit sphere of the null space.
//!
//! Both searches parametrize z = B·w with ‖w‖₂ = 1 and score a point by
//! θ(p, z, top_k(z)). Every scored point is a feasible point of the supremum,
//! so the best score is always a valid lower bound.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{theta_unchecked, top_k_into, NscQuery};
use crate::combinatorics::{binomial, Combinations};
use crate::linalg::{axpy, dot, norm2, norm_inf, normalize, NullSpaceBasis};
use crate::rng;

/// Best point seen so far.
#[derive(Debug, Clone)]
pub(crate) struct Best {
    pub value: f64,
    pub z: Vec<f64>,
    pub support: Vec<usize>,
}

impl Best {
    fn offer(slot: &mut Option<Best>, candidate: Best) {
        if slot.as_ref().map_or(true, |b| candidate.value > b.value) {
            *slot = Some(candidate);
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SearchOutcome {
    pub best: Best,
    /// Grid search only: every refined cell converged.
    pub resolved: bool,
    pub evaluations: u64,
    pub iterations: u64,
}

/// Scores points of the null space for one query.
struct Scorer<'a> {
    basis: &'a NullSpaceBasis,
    query: NscQuery,
    /// Coordinates that vanish on the whole null space.
    dead: Vec<bool>,
}

impl<'a> Scorer<'a> {
    fn new(basis: &'a NullSpaceBasis, query: NscQuery) -> Self {
        let dead = (0..basis.ambient())
            .map(|i| norm2(&basis.row(i)) <= query.zero_tol)
            .collect();
        Self { basis, query, dead }
    }

    fn point(&self, w: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.basis.ambient()];
        self.point_into(w, &mut z);
        z
    }

    fn point_into(&self, w: &[f64], z: &mut [f64]) {
        z.iter_mut().for_each(|v| *v = 0.0);
        for (col, &c) in self.basis.columns().iter().zip(w) {
            axpy(c, col, z);
        }
        for (v, &dead) in z.iter_mut().zip(&self.dead) {
            if dead {
                *v = 0.0;
            }
        }
    }

    fn score(&self, z: &[f64], scratch: &mut Vec<usize>) -> f64 {
        top_k_into(z, self.query.k, scratch);
        theta_unchecked(self.query.p, z, scratch, self.query.zero_tol * norm_inf(z))
    }

    fn best_of(&self, z: Vec<f64>) -> Best {
        let mut support = Vec::new();
        let value = self.score(&z, &mut support);
        Best { value, z, support }
    }

    /// Point of the null space with the coordinates in `zeroed` forced to 0,
    /// obtained by projecting w onto {w : (B·w)ᵢ = 0, i ∈ zeroed}.
    fn project_zeroed(&self, w: &[f64], zeroed: &[usize]) -> Option<Vec<f64>> {
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(zeroed.len());
        for &i in zeroed {
            let mut r = self.basis.row(i);
            for prev in &rows {
                let c = dot(prev, &r);
                r.iter_mut().zip(prev).for_each(|(x, y)| *x -= c * y);
            }
            if normalize(&mut r) > 1e-12 {
                rows.push(r);
            }
        }
        let mut w = w.to_vec();
        for r in &rows {
            let c = dot(r, &w);
            w.iter_mut().zip(r).for_each(|(x, y)| *x -= c * y);
        }
        if normalize(&mut w) < 1e-12 {
            return None;
        }
        let mut z = self.point(&w);
        for &i in zeroed {
            z[i] = 0.0;
        }
        let scale = norm_inf(&z);
        for v in z.iter_mut() {
            if v.abs() <= self.query.zero_tol * scale {
                *v = 0.0;
            }
        }
        Some(z)
    }
}

// ---------------------------------------------------------------------------
// Two-dimensional null spaces: angular grid.
// ---------------------------------------------------------------------------

const GOLDEN_WIDTH: f64 = 1e-11;
const AGREEMENT: f64 = 1e-8;

/// Dense scan of w = (cos t, sin t), t ∈ [0, π), followed by golden-section
/// refinement of the best local maxima.
///
/// Peaks of θ sit either at smooth stationary points or at cusps where a
/// coordinate outside S crosses zero. The crossing angles are known in closed
/// form and scored with that coordinate set to exactly 0, so cusp peaks are
/// hit exactly rather than approached.
pub(crate) fn angular_grid(
    basis: &NullSpaceBasis,
    query: NscQuery,
    grid_points: usize,
    refine_cells: usize,
) -> SearchOutcome {
    debug_assert_eq!(basis.dim(), 2);
    let scorer = Scorer::new(basis, query);
    let n = basis.ambient();
    let g = grid_points.max(8);
    let h = std::f64::consts::PI / g as f64;
    let mut scratch = Vec::with_capacity(n);
    let calls = std::cell::Cell::new(0u64);
    let mut best: Option<Best> = None;

    let f_at = |t: f64, scratch: &mut Vec<usize>| -> f64 {
        calls.set(calls.get() + 1);
        let z = scorer.point(&[t.cos(), t.sin()]);
        scorer.score(&z, scratch)
    };

    let values: Vec<f64> = (0..g).map(|j| f_at(j as f64 * h, &mut scratch)).collect();
    let (jbest, _) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc });
    Best::offer(
        &mut best,
        scorer.best_of(scorer.point(&[(jbest as f64 * h).cos(), (jbest as f64 * h).sin()])),
    );

    // Zero crossings of each live coordinate.
    let mut crossings: Vec<f64> = Vec::new();
    for i in 0..n {
        if scorer.dead[i] {
            continue;
        }
        let r = basis.row(i);
        let t = (-r[0]).atan2(r[1]).rem_euclid(std::f64::consts::PI);
        crossings.push(t);
        if let Some(z) = scorer.project_zeroed(&[t.cos(), t.sin()], &[i]) {
            calls.set(calls.get() + 1);
            Best::offer(&mut best, scorer.best_of(z));
        }
    }

    // Local maxima of the cyclic grid sequence (z(t + π) = −z(t)).
    let mut peaks: Vec<usize> = (0..g)
        .filter(|&j| {
            let prev = values[(j + g - 1) % g];
            let next = values[(j + 1) % g];
            values[j] >= prev && values[j] >= next
        })
        .collect();
    peaks.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    peaks.truncate(refine_cells.max(1));

    let mut resolved = true;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    for &j in &peaks {
        let (mut a, mut b) = ((j as f64 - 1.0) * h, (j as f64 + 1.0) * h);
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let mut fc = f_at(c, &mut scratch);
        let mut fd = f_at(d, &mut scratch);
        while b - a > GOLDEN_WIDTH {
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = f_at(c, &mut scratch);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = f_at(d, &mut scratch);
            }
        }
        let (fa, fb) = (f_at(a, &mut scratch), f_at(b, &mut scratch));
        let mid = 0.5 * (a + b);
        Best::offer(&mut best, scorer.best_of(scorer.point(&[mid.cos(), mid.sin()])));
        let pi = std::f64::consts::PI;
        let has_crossing = crossings.iter().any(|&t| {
            [t - pi, t, t + pi]
                .iter()
                .any(|&s| s >= a - 1e-9 && s <= b + 1e-9)
        });
        if !has_crossing && (fa - fb).abs() > AGREEMENT {
            resolved = false;
        }
    }

    SearchOutcome {
        best: best.expect("grid has points"),
        resolved,
        evaluations: calls.get(),
        iterations: peaks.len() as u64,
    }
}

// ---------------------------------------------------------------------------
// General null spaces: multistart smoothed ascent on the sphere.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub(crate) struct AscentSettings {
    pub restarts: usize,
    pub eps_schedule: Vec<f64>,
    pub max_stage_iters: usize,
    pub seed: u64,
    pub exhaustive_supports: bool,
    pub vertex_seeds: bool,
    pub max_vertices: usize,
    pub stop_above: Option<f64>,
}

/// Restarts run in fixed-size batches; `stop_above` is checked between
/// batches, so early exit does not depend on the thread count.
const BATCH: usize = 8;

/// Exponent used to steer the ascent at p = 0, where the smoothed ℓ0 term is
/// flat. The final scoring still uses p = 0.
const L0_SURROGATE_P: f64 = 0.1;

/// Restart r starts the smoothing schedule at stage 2·(r mod ENTRY_STAGGER).
const ENTRY_STAGGER: usize = 4;

pub(crate) fn multistart(basis: &NullSpaceBasis, query: NscQuery, settings: &AscentSettings) -> SearchOutcome {
    let scorer = Scorer::new(basis, query);
    let n = basis.ambient();
    let d = basis.dim();
    let mut best: Option<Best> = None;
    let mut evaluations = 0u64;
    let mut iterations = 0u64;

    if settings.vertex_seeds && d >= 2 {
        let live: Vec<usize> = (0..n).filter(|&i| !scorer.dead[i]).collect();
        if binomial(live.len(), d - 1) <= settings.max_vertices as u128 {
            for zeroed in Combinations::new(live.len(), d - 1) {
                let idx: Vec<usize> = zeroed.iter().map(|&t| live[t]).collect();
                // Any w that is not orthogonal to the vertex ray projects onto it.
                for c in 0..d {
                    let mut start = vec![0.0; d];
                    start[c] = 1.0;
                    if let Some(z) = scorer.project_zeroed(&start, &idx) {
                        evaluations += 1;
                        Best::offer(&mut best, scorer.best_of(z));
                        break;
                    }
                }
            }
        }
    }

    let supports: Vec<Option<Vec<usize>>> = if settings.exhaustive_supports {
        Combinations::new(n, query.k.min(n)).map(Some).collect()
    } else {
        vec![None]
    };

    let tasks: Vec<(usize, Option<Vec<usize>>)> = supports
        .iter()
        .enumerate()
        .flat_map(|(si, s)| (0..settings.restarts.max(1)).map(move |r| (si * 1_000_003 + r, s.clone())))
        .collect();

    for batch in tasks.chunks(BATCH) {
        if let (Some(stop), Some(b)) = (settings.stop_above, &best) {
            if b.value >= stop {
                break;
            }
        }
        let results: Vec<(Option<Best>, u64, u64)> = batch
            .par_iter()
            .map(|(index, support)| run_restart(&scorer, settings, *index as u64, support.as_deref()))
            .collect();
        for (b, evals, iters) in results {
            evaluations += evals;
            iterations += iters;
            if let Some(b) = b {
                Best::offer(&mut best, b);
            }
        }
    }

    SearchOutcome {
        best: best.expect("at least one restart"),
        resolved: false,
        evaluations,
        iterations,
    }
}

struct Smoothed<'s> {
    p: f64,
    eps2: f64,
    fixed: Option<&'s [usize]>,
}

impl Smoothed<'_> {
    /// Smoothed ratio and its gradient with respect to z.
    fn value_grad(&self, z: &[f64], k: usize, scratch: &mut Vec<usize>, grad: Option<&mut [f64]>) -> f64 {
        let support: &[usize] = match self.fixed {
            Some(s) => s,
            None => {
                top_k_into(z, k, scratch);
                scratch
            }
        };
        let half = self.p / 2.0;
        let mut inside = 0.0;
        let mut outside = 0.0;
        let mut next = support.iter().peekable();
        let want_grad = grad.is_some();
        let mut g = grad;
        for (i, &v) in z.iter().enumerate() {
            let r = v * v + self.eps2;
            let phi = r.powf(half);
            if let Some(g) = g.as_deref_mut() {
                g[i] = self.p * v * phi / r;
            }
            if next.peek() == Some(&&i) {
                next.next();
                inside += phi;
            } else {
                outside += phi;
            }
        }
        let f = inside / outside;
        if want_grad {
            let g = g.expect("gradient buffer");
            let mut next = support.iter().peekable();
            for (i, gi) in g.iter_mut().enumerate() {
                if next.peek() == Some(&&i) {
                    next.next();
                    *gi /= outside;
                } else {
                    *gi *= -f / outside;
                }
            }
        }
        f
    }
}

fn run_restart(
    scorer: &Scorer<'_>,
    settings: &AscentSettings,
    index: u64,
    fixed: Option<&[usize]>,
) -> (Option<Best>, u64, u64) {
    let d = scorer.basis.dim();
    let n = scorer.basis.ambient();
    let k = scorer.query.k;
    let mut rng = rng::stream(settings.seed, "multistart", index);
    let mut w: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    if normalize(&mut w) == 0.0 {
        w[0] = 1.0;
    }

    let mut best: Option<Best> = None;
    let mut evaluations = 0u64;
    let mut iterations = 0u64;
    let mut scratch = Vec::with_capacity(n);
    let mut gz = vec![0.0; n];
    let p_ascent = if scorer.query.p == 0.0 {
        L0_SURROGATE_P
    } else {
        scorer.query.p
    };

    // Points are always scored with their own top-k support, which is at
    // least as good as the support the ascent was pinned to.
    let score_exact = |z: Vec<f64>, best: &mut Option<Best>, evaluations: &mut u64| {
        *evaluations += 1;
        Best::offer(best, scorer.best_of(z));
    };

    score_exact(scorer.point(&w), &mut best, &mut evaluations);

    if d >= 2 {
        let mut step: f64 = 0.1;
        let mut trial = vec![0.0; d];
        let mut zt = vec![0.0; n];
        // Restarts enter the schedule at staggered points. Continuation from
        // heavy smoothing alone funnels every start into the same basin.
        let entry = (index as usize % ENTRY_STAGGER) * 2;
        let schedule = &settings.eps_schedule[entry.min(settings.eps_schedule.len() - 1)..];
        for &eps in schedule {
            let obj = Smoothed {
                p: p_ascent,
                eps2: eps * eps,
                fixed,
            };
            let mut z = scorer.point(&w);
            let mut f = obj.value_grad(&z, k, &mut scratch, Some(&mut gz));
            for _ in 0..settings.max_stage_iters {
                iterations += 1;
                let mut g = scorer.basis.project(&gz);
                let radial = dot(&g, &w);
                g.iter_mut().zip(&w).for_each(|(gi, wi)| *gi -= radial * wi);
                if normalize(&mut g) < 1e-300 {
                    break;
                }
                let mut moved = false;
                while step >= 1e-12 {
                    let (s, c) = step.sin_cos();
                    trial.iter_mut().zip(w.iter().zip(&g)).for_each(|(t, (wi, gi))| *t = c * wi + s * gi);
                    normalize(&mut trial);
                    scorer.point_into(&trial, &mut zt);
                    let ft = obj.value_grad(&zt, k, &mut scratch, None);
                    if ft > f {
                        std::mem::swap(&mut w, &mut trial);
                        std::mem::swap(&mut z, &mut zt);
                        moved = true;
                        break;
                    }
                    step *= 0.5;
                }
                if !moved {
                    break;
                }
                f = obj.value_grad(&z, k, &mut scratch, Some(&mut gz));
                if step < 1e-12 {
                    break;
                }
                step = (step * 2.0).min(std::f64::consts::FRAC_PI_4);
            }
            step = step.max(1e-3);

            // Snap the smallest coordinates to exact zeros: the smoothed
            // ascent only approaches the cusp points where peaks tend to sit.
            let mut order: Vec<usize> = (0..n).filter(|&i| !scorer.dead[i]).collect();
            order.sort_by(|&a, &b| z[a].abs().total_cmp(&z[b].abs()).then(a.cmp(&b)));
            for j in 1..=(d - 1).min(order.len().saturating_sub(1)) {
                if let Some(zp) = scorer.project_zeroed(&w, &order[..j]) {
                    score_exact(zp, &mut best, &mut evaluations);
                }
            }
            score_exact(z, &mut best, &mut evaluations);
        }
    }

    (best, evaluations, iterations)
}
