//! Sparse recovery: exhaustive ℓ0 search, IRLS for ℓp, and failure witnesses
//! built from null-space certificates.
//!
//! IRLS minimizes Σ wᵢ xᵢ² subject to A·x = y in each step, with
//! wᵢ = (xᵢ² + ε²)^(p/2 − 1) taken from the previous iterate. Every step is a
//! majorize-minimize step for the smoothed objective Σ (xᵢ² + ε²)^(p/2), and
//! every iterate is feasible up to the accuracy of the linear solve. For
//! p < 1 the method is a local heuristic; restarts from perturbed feasible
//! points keep the iterate with the smallest ‖x‖_p^p.

use rand_distr::{Distribution as _, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::Combinations;
use crate::error::{Error, Result};
use crate::linalg::{self, norm2, norm_inf, SensingMatrix};
use crate::matgen::{gen_on_support, Distribution};
use crate::nsc::{magnitude_pow, theta, Certificate, SupportSet, DEFAULT_ZERO_TOL};
use crate::rng;

/// ‖x‖_p^p, with ‖x‖₀ counting entries above zero_tol·‖x‖∞.
pub fn lp_objective(x: &[f64], p: f64, zero_tol: f64) -> f64 {
    let cut = zero_tol * norm_inf(x);
    x.iter().map(|&v| magnitude_pow(v, p, cut)).sum()
}

fn feasible(residual: f64, y: &[f64], feas_tol: f64) -> bool {
    residual <= feas_tol * norm2(y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryInstance {
    pub a: SensingMatrix,
    pub x_true: Vec<f64>,
    pub sparsity: usize,
    pub y: Vec<f64>,
}

impl RecoveryInstance {
    pub fn new(a: SensingMatrix, x_true: Vec<f64>) -> Result<Self> {
        if x_true.len() != a.cols() {
            return Err(Error::WrongDimension {
                expected: a.cols(),
                found: x_true.len(),
            });
        }
        let y = a.mul_vec(&x_true);
        let sparsity = lp_objective(&x_true, 0.0, DEFAULT_ZERO_TOL) as usize;
        Ok(Self {
            a,
            x_true,
            sparsity,
            y,
        })
    }
}

// ---------------------------------------------------------------------------
// Exhaustive ℓ0.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L0Limits {
    pub max_n: usize,
    pub max_solutions: usize,
    pub feas_tol: f64,
}

impl Default for L0Limits {
    fn default() -> Self {
        Self {
            max_n: 20,
            max_solutions: 64,
            feas_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L0Solutions {
    /// Size of the sparsest feasible support.
    pub sparsity: usize,
    pub solutions: Vec<Vec<f64>>,
    pub unique: bool,
    /// More than `max_solutions` minimizers exist.
    pub truncated: bool,
}

/// All sparsest solutions of A·x = y with at most `k_max` nonzeros.
pub fn solve_l0_exhaustive(a: &SensingMatrix, y: &[f64], k_max: usize, limits: L0Limits) -> Result<L0Solutions> {
    let (m, n) = (a.rows(), a.cols());
    if n > limits.max_n {
        return Err(Error::TooLarge {
            what: "columns for exhaustive l0",
            size: n,
            limit: limits.max_n,
        });
    }
    if y.len() != m {
        return Err(Error::WrongDimension { expected: m, found: y.len() });
    }
    if k_max > m {
        return Err(Error::InvalidArgument(format!("k_max must be at most {m}, got {k_max}")));
    }
    if norm2(y) == 0.0 {
        return Ok(L0Solutions {
            sparsity: 0,
            solutions: vec![vec![0.0; n]],
            unique: true,
            truncated: false,
        });
    }
    let rank_tol = a.default_rank_tol();
    for s in 1..=k_max {
        let mut solutions: Vec<Vec<f64>> = Vec::new();
        let mut truncated = false;
        for cols in Combinations::new(n, s) {
            let sub = a.select_columns(&cols);
            // A dependent column set cannot hold a sparsest solution.
            let Some(coef) = linalg::least_squares(&sub, y, rank_tol) else {
                continue;
            };
            let fitted = sub.mul_vec(&coef);
            let residual = norm2(&fitted.iter().zip(y).map(|(f, t)| f - t).collect::<Vec<_>>());
            if !feasible(residual, y, limits.feas_tol) {
                continue;
            }
            let mut x = vec![0.0; n];
            for (&c, v) in cols.iter().zip(coef) {
                x[c] = v;
            }
            if solutions.len() == limits.max_solutions {
                truncated = true;
                break;
            }
            solutions.push(x);
        }
        if !solutions.is_empty() {
            return Ok(L0Solutions {
                sparsity: s,
                unique: solutions.len() == 1 && !truncated,
                solutions,
                truncated,
            });
        }
    }
    Err(Error::NoSolutionWithin { k_max })
}

// ---------------------------------------------------------------------------
// IRLS.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IrlsConfig {
    pub eps_start: f64,
    /// ε is multiplied by this factor on each plateau.
    pub eps_factor: f64,
    pub eps_floor: f64,
    /// A stage ends when the smoothed objective changes by less than this,
    /// relatively.
    pub plateau_tol: f64,
    /// Stopping test of the last stage, at ε = eps_floor.
    pub final_tol: f64,
    pub max_iter: usize,
    /// Relative to ‖y‖.
    pub feas_tol: f64,
    /// ∞-norm distance to the true vector that counts as recovery.
    pub recover_tol: f64,
    /// Starts used when p < 1; p = 1 is convex and uses one.
    pub restarts: usize,
    pub seed: u64,
    /// Pivot threshold for the inner weighted solves.
    pub solve_rank_tol: f64,
}

impl Default for IrlsConfig {
    fn default() -> Self {
        Self {
            eps_start: 1.0,
            eps_factor: 0.1,
            eps_floor: 1e-9,
            plateau_tol: 1e-6,
            final_tol: 1e-12,
            max_iter: 500,
            feas_tol: 1e-8,
            recover_tol: 1e-5,
            restarts: 8,
            seed: 0,
            solve_rank_tol: 1e-14,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub x_hat: Vec<f64>,
    /// ‖x_hat‖_p^p.
    pub objective: f64,
    pub residual: f64,
    /// Largest residual over all iterates of the returned run.
    pub max_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the true vector is known.
    pub success: Option<bool>,
    /// Smoothed objective at the end of each ε stage.
    pub stage_objectives: Vec<f64>,
}

/// Minimizes ‖x‖_p^p subject to A·x = y by iteratively reweighted least
/// squares.
pub fn irls_lp(a: &SensingMatrix, y: &[f64], p: f64, config: &IrlsConfig) -> Result<SolverResult> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidArgument(format!("p must lie in (0, 1], got {p}")));
    }
    if y.len() != a.rows() {
        return Err(Error::WrongDimension {
            expected: a.rows(),
            found: y.len(),
        });
    }
    if linalg::rank(a, a.default_rank_tol())? < a.rows() {
        return Err(Error::RankDeficient);
    }
    let starts = if p < 1.0 { config.restarts.max(1) } else { 1 };
    let mut best: Option<SolverResult> = None;
    for r in 0..starts {
        let run = irls_run(a, y, p, config, r as u64)?;
        let better = match &best {
            None => true,
            Some(b) => (run.converged && !b.converged) || (run.converged == b.converged && run.objective < b.objective),
        };
        if better {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one start"))
}

/// [`irls_lp`] scored against a known true vector.
pub fn irls_recover(instance: &RecoveryInstance, p: f64, config: &IrlsConfig) -> Result<SolverResult> {
    let mut r = irls_lp(&instance.a, &instance.y, p, config)?;
    r.success = Some(max_abs_diff(&r.x_hat, &instance.x_true) <= config.recover_tol);
    Ok(r)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn residual(a: &SensingMatrix, x: &[f64], y: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    norm2(&ax.iter().zip(y).map(|(u, v)| u - v).collect::<Vec<_>>())
}

fn smoothed(x: &[f64], p: f64, eps: f64) -> f64 {
    x.iter().map(|v| (v * v + eps * eps).powf(p / 2.0)).sum()
}

fn irls_run(a: &SensingMatrix, y: &[f64], p: f64, config: &IrlsConfig, start: u64) -> Result<SolverResult> {
    let n = a.cols();
    let tol = config.solve_rank_tol;
    // Start 0 is the minimum-norm solution; later starts use random weights.
    let init: Vec<f64> = if start == 0 {
        vec![1.0; n]
    } else {
        let mut rng = rng::stream(config.seed, "irls-start", start);
        (0..n)
            .map(|_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                (2.0 * g).exp()
            })
            .collect()
    };
    let mut x = linalg::weighted_min_norm_solve(a, y, &init, tol)?;
    let mut max_residual = residual(a, &x, y);
    let mut eps = config.eps_start;
    let mut iterations = 0;
    let mut converged = false;
    let mut stage_objectives = Vec::new();
    let mut w = vec![0.0; n];

    'stages: loop {
        let mut f = smoothed(&x, p, eps);
        let mut plateau = false;
        let stop = if eps <= config.eps_floor {
            config.final_tol
        } else {
            config.plateau_tol
        };
        for _ in 0..config.max_iter {
            for (wi, xi) in w.iter_mut().zip(&x) {
                *wi = (xi * xi + eps * eps).powf(p / 2.0 - 1.0);
            }
            let next = match linalg::weighted_min_norm_solve(a, y, &w, tol) {
                Ok(v) => v,
                // Extreme weights can make the scaled system singular; keep
                // the last good iterate.
                Err(Error::RankDeficient) => break 'stages,
                Err(e) => return Err(e),
            };
            iterations += 1;
            max_residual = max_residual.max(residual(a, &next, y));
            let f_next = smoothed(&next, p, eps);
            x = next;
            let change = (f - f_next).abs() / f.abs().max(f64::MIN_POSITIVE);
            f = f_next;
            if change < stop {
                plateau = true;
                break;
            }
        }
        stage_objectives.push(f);
        if eps <= config.eps_floor {
            converged = plateau;
            break;
        }
        eps = (eps * config.eps_factor).max(config.eps_floor);
    }

    let res = residual(a, &x, y);
    Ok(SolverResult {
        objective: lp_objective(&x, p, 0.0),
        residual: res,
        max_residual,
        iterations,
        converged: converged && feasible(res, y, config.feas_tol),
        success: None,
        stage_objectives,
        x_hat: x,
    })
}

// ---------------------------------------------------------------------------
// Failure witnesses.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureWitness {
    /// x* = z restricted to S, with y = A·x*.
    pub instance: RecoveryInstance,
    /// x′ = −z restricted to the complement of S; A·x′ = y as well.
    pub alternative: Vec<f64>,
    pub p: f64,
    pub theta_value: f64,
    pub objective_true: f64,
    pub objective_alternative: f64,
}

impl FailureWitness {
    /// ‖x′‖_p^p < ‖x*‖_p^p: x* is not even an ℓp minimizer.
    pub fn strict(&self) -> bool {
        self.objective_alternative < self.objective_true
    }
}

/// A sparse vector that ℓp minimization cannot single out, built from a
/// certificate with θ ≥ 1.
pub fn failure_witness(a: &SensingMatrix, cert: &Certificate, p: f64) -> Result<FailureWitness> {
    failure_witness_with_tol(a, cert, p, DEFAULT_ZERO_TOL)
}

pub fn failure_witness_with_tol(a: &SensingMatrix, cert: &Certificate, p: f64, zero_tol: f64) -> Result<FailureWitness> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("p must lie in [0, 1], got {p}")));
    }
    let n = a.cols();
    if cert.z.len() != n {
        return Err(Error::WrongDimension { expected: n, found: cert.z.len() });
    }
    let scale = a.max_abs().max(f64::MIN_POSITIVE) * norm2(&cert.z);
    if norm2(&a.mul_vec(&cert.z)) > 1e-8 * scale * (n as f64) {
        return Err(Error::InvalidArgument("certificate vector is not in the null space".into()));
    }
    let theta_value = theta(p, &cert.z, &cert.support, zero_tol)?;
    if theta_value < 1.0 {
        return Err(Error::NotAWitness(theta_value));
    }
    let (x_star, alternative) = split(&cert.z, &cert.support);
    let instance = RecoveryInstance::new(a.clone(), x_star)?;
    let objective_true = lp_objective(&instance.x_true, p, zero_tol);
    let objective_alternative = lp_objective(&alternative, p, zero_tol);
    Ok(FailureWitness {
        instance,
        alternative,
        p,
        theta_value,
        objective_true,
        objective_alternative,
    })
}

fn split(z: &[f64], support: &SupportSet) -> (Vec<f64>, Vec<f64>) {
    let mut inside = vec![0.0; z.len()];
    let mut outside = vec![0.0; z.len()];
    for (i, &v) in z.iter().enumerate() {
        if support.contains(i) {
            inside[i] = v;
        } else {
            outside[i] = -v;
        }
    }
    (inside, outside)
}

// ---------------------------------------------------------------------------
// Experiments.
// ---------------------------------------------------------------------------

/// How supports are chosen for a recovery experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "plan", rename_all = "snake_case")]
pub enum TrialPlan {
    /// Independent uniformly random supports of size k.
    Random { trials: usize },
    /// Every support of size k, with `draws` value draws each.
    EverySupport { draws: usize },
    /// One fixed support, with `draws` value draws.
    OnSupport { support: Vec<usize>, draws: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub support: Vec<usize>,
    pub seed: u64,
    pub success: bool,
    pub error_inf: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub k: usize,
    pub p: f64,
    pub trials: Vec<TrialOutcome>,
    pub successes: usize,
    pub rate: f64,
}

/// Success rate of ℓp recovery for k-sparse vectors. At p = 0 the exhaustive
/// solver is used and success means the true vector is the unique sparsest
/// solution.
pub fn recovery_experiment(
    a: &SensingMatrix,
    k: usize,
    p: f64,
    plan: &TrialPlan,
    seed: u64,
    config: &IrlsConfig,
) -> Result<RecoveryReport> {
    let n = a.cols();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("k must lie in 1..={n}, got {k}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("p must lie in [0, 1], got {p}")));
    }
    let supports: Vec<Vec<usize>> = match plan {
        TrialPlan::Random { trials } => {
            if *trials == 0 {
                return Err(Error::InvalidArgument("trials must be at least 1".into()));
            }
            (0..*trials as u64)
                .map(|t| {
                    let mut r = rng::stream(seed, "recovery-support", t);
                    let mut s = rand::seq::index::sample(&mut r, n, k).into_vec();
                    s.sort_unstable();
                    s
                })
                .collect()
        }
        TrialPlan::EverySupport { draws } => {
            if *draws == 0 {
                return Err(Error::InvalidArgument("draws must be at least 1".into()));
            }
            Combinations::new(n, k)
                .flat_map(|s| std::iter::repeat_n(s, *draws))
                .collect()
        }
        TrialPlan::OnSupport { support, draws } => {
            if *draws == 0 {
                return Err(Error::InvalidArgument("draws must be at least 1".into()));
            }
            let s = SupportSet::new(support.clone(), n)?;
            if s.len() != k {
                return Err(Error::InvalidArgument(format!("support must have {k} entries")));
            }
            vec![s.indices().to_vec(); *draws]
        }
    };

    let trials: Vec<TrialOutcome> = supports
        .par_iter()
        .enumerate()
        .map(|(t, support)| {
            let trial_seed = rng::derive_seed(seed, "recovery-trial", t as u64);
            let x = gen_on_support(n, support, Distribution::Gaussian, trial_seed);
            let inst = RecoveryInstance::new(a.clone(), x)?;
            let (x_hat, converged) = if p == 0.0 {
                let sol = solve_l0_exhaustive(a, &inst.y, k.min(a.rows()), L0Limits::default())?;
                let x_hat = sol.solutions[0].clone();
                (if sol.unique { x_hat } else { vec![f64::NAN; n] }, true)
            } else {
                let r = irls_lp(a, &inst.y, p, &IrlsConfig { seed: trial_seed, ..config.clone() })?;
                (r.x_hat, r.converged)
            };
            let error_inf = max_abs_diff(&x_hat, &inst.x_true);
            Ok(TrialOutcome {
                support: support.clone(),
                seed: trial_seed,
                success: error_inf <= config.recover_tol,
                error_inf,
                converged,
            })
        })
        .collect::<Result<_>>()?;
    let successes = trials.iter().filter(|t| t.success).count();
    Ok(RecoveryReport {
        k,
        p,
        rate: successes as f64 / trials.len() as f64,
        successes,
        trials,
    })
}
