//! Property suites over seeded random fixtures.
//!
//! Each suite draws its matrices from seeds derived from one suite seed, runs
//! a fixed list of checks, and reports per-property pass/fail with the worst
//! margin seen. A margin is positive (or zero for non-strict checks) exactly
//! when the check passes.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::Combinations;
use crate::derived::{k_star, staircase, uniform_grid, DEFAULT_MARGIN};
use crate::error::{Error, Result};
use crate::linalg::SensingMatrix;
use crate::matgen::{gen_matrix, gen_on_support, Distribution, GeneratorSpec};
use crate::nsc::{EstimatorConfig, NscContext, NscQuery, PathChoice, Status};
use crate::recovery::{failure_witness, irls_recover, IrlsConfig, RecoveryInstance};
use crate::rng::derive_seed;

pub const L0_TOL: f64 = 0.0;
pub const D1_TOL: f64 = 1e-6;
pub const COUNTEREXAMPLE_TOL: f64 = 1e-9;
pub const MONOTONE_P_SLACK: f64 = 1e-9;
pub const STRICT_P_STEP: f64 = 1e-9;
pub const ENDPOINT_GAP: f64 = 0.01;
pub const CONSTANT_TOL: f64 = 1e-12;
pub const RECOVERY_GAMMA_MAX: f64 = 0.95;
pub const WITNESS_THETA_MIN: f64 = 1.05;
pub const RECOVER_TOL: f64 = 1e-5;
pub const L1_TOL: f64 = 1e-6;
/// Float slack for "the estimate never exceeds the exact value".
pub const SOUNDNESS_SLACK: f64 = 1e-12;

pub const CONTINUITY_DELTAS: [f64; 3] = [0.02, 0.01, 0.005];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    L0,
    D1,
    Counterexample,
    Thm1,
    Thm2,
    Thm3,
    Recovery,
    Staircase,
    Remark3,
    L1,
}

impl Suite {
    pub const ALL: [Suite; 10] = [
        Suite::L0,
        Suite::D1,
        Suite::Counterexample,
        Suite::Thm1,
        Suite::Thm2,
        Suite::Thm3,
        Suite::Recovery,
        Suite::Staircase,
        Suite::Remark3,
        Suite::L1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::L0 => "l0",
            Suite::D1 => "d1",
            Suite::Counterexample => "counterexample",
            Suite::Thm1 => "thm1",
            Suite::Thm2 => "thm2",
            Suite::Thm3 => "thm3",
            Suite::Recovery => "recovery",
            Suite::Staircase => "staircase",
            Suite::Remark3 => "remark3",
            Suite::L1 => "l1",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown suite `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scale {
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteScales {
    pub l0: Scale,
    pub d1: Scale,
    pub counterexample: Scale,
    pub thm1: Scale,
    pub thm2: Scale,
    pub thm3: Scale,
    pub recovery: Scale,
    pub staircase: Scale,
    pub remark3: Scale,
    pub l1: Scale,
}

const DEFAULT_SCALES: &str = include_str!("../config/suites.toml");

impl SuiteScales {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("suite config: {e}")))
    }

    pub fn get(&self, suite: Suite) -> Scale {
        match suite {
            Suite::L0 => self.l0,
            Suite::D1 => self.d1,
            Suite::Counterexample => self.counterexample,
            Suite::Thm1 => self.thm1,
            Suite::Thm2 => self.thm2,
            Suite::Thm3 => self.thm3,
            Suite::Recovery => self.recovery,
            Suite::Staircase => self.staircase,
            Suite::Remark3 => self.remark3,
            Suite::L1 => self.l1,
        }
    }
}

impl Default for SuiteScales {
    fn default() -> Self {
        Self::parse(DEFAULT_SCALES).expect("bundled suite config parses")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    pub passed: bool,
    pub checks: usize,
    pub failures: usize,
    pub worst_margin: f64,
    pub first_failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMargin {
    pub trial: usize,
    pub seed: u64,
    pub property: String,
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusCounts {
    pub exact: usize,
    pub lower_bound: usize,
    pub infinite: usize,
}

impl StatusCounts {
    fn add(&mut self, s: Status) {
        match s {
            Status::Exact => self.exact += 1,
            Status::LowerBound => self.lower_bound += 1,
            Status::Infinite => self.infinite += 1,
        }
    }

    fn merge(&mut self, o: StatusCounts) {
        self.exact += o.exact;
        self.lower_bound += o.lower_bound;
        self.infinite += o.infinite;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub suite: Suite,
    pub trials: usize,
    pub seed: u64,
    pub properties: Vec<PropertyCheck>,
    pub margins: Vec<TrialMargin>,
    pub statuses: StatusCounts,
    pub wall_ms: u128,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(|p| p.passed)
    }

    pub fn failed_properties(&self) -> Vec<&str> {
        self.properties.iter().filter(|p| !p.passed).map(|p| p.name.as_str()).collect()
    }
}

/// Checks from one trial.
#[derive(Default)]
struct Log {
    entries: Vec<(&'static str, f64, bool, String)>,
    statuses: StatusCounts,
}

impl Log {
    /// Passes when `margin > 0`.
    fn strict(&mut self, property: &'static str, margin: f64, detail: impl FnOnce() -> String) {
        let ok = margin > 0.0;
        self.push(property, margin, ok, detail);
    }

    /// Passes when `margin ≥ 0`.
    fn weak(&mut self, property: &'static str, margin: f64, detail: impl FnOnce() -> String) {
        let ok = margin >= 0.0;
        self.push(property, margin, ok, detail);
    }

    fn push(&mut self, property: &'static str, margin: f64, ok: bool, detail: impl FnOnce() -> String) {
        let d = if ok { String::new() } else { detail() };
        self.entries.push((property, margin, ok, d));
    }
}

/// Matrix for trial `trial` of a suite seeded with `seed`.
pub fn fixture(seed: u64, trial: usize, rows: usize, cols: usize, normalize: bool) -> SensingMatrix {
    let s = derive_seed(seed, "fixture", trial as u64);
    let spec = if normalize {
        GeneratorSpec::gaussian(rows, cols, s).normalized()
    } else {
        GeneratorSpec::gaussian(rows, cols, s)
    };
    gen_matrix(&spec)
}

pub fn counterexample_matrix() -> SensingMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    SensingMatrix::new(2, 2, vec![h, h, h, h]).expect("finite")
}

/// A 2×3 matrix whose null space is spanned by [1, 1, −1].
pub fn equal_magnitude_matrix() -> SensingMatrix {
    SensingMatrix::new(2, 3, vec![1.0, 0.0, 1.0, 0.0, 1.0, 1.0]).expect("finite")
}

/// Estimator configuration for the forced multistart path used by oracle
/// comparisons; vertex seeding is off so the search is independent of the
/// exact enumerations.
pub fn forced_multistart(base: &EstimatorConfig) -> EstimatorConfig {
    EstimatorConfig {
        vertex_seeds: false,
        ..base.clone()
    }
    .with_path(PathChoice::Multistart)
}

pub fn run_suite(suite: Suite, scale: Scale, config: &EstimatorConfig) -> Result<VerificationReport> {
    let start = Instant::now();
    let trials = scale.trials;
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let logs: Vec<(u64, Log)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let seed = derive_seed(scale.seed, "fixture", t as u64);
            trial(suite, scale.seed, t, config).map(|log| (seed, log))
        })
        .collect::<Result<_>>()?;

    let mut properties: Vec<PropertyCheck> = Vec::new();
    let mut margins = Vec::new();
    let mut statuses = StatusCounts::default();
    for (t, (seed, log)) in logs.into_iter().enumerate() {
        statuses.merge(log.statuses);
        let mut per_trial: Vec<(&'static str, f64)> = Vec::new();
        for (name, margin, ok, detail) in log.entries {
            let prop = match properties.iter_mut().find(|p| p.name == name) {
                Some(p) => p,
                None => {
                    properties.push(PropertyCheck {
                        name: name.to_string(),
                        passed: true,
                        checks: 0,
                        failures: 0,
                        worst_margin: f64::INFINITY,
                        first_failure: None,
                    });
                    properties.last_mut().expect("just pushed")
                }
            };
            prop.checks += 1;
            prop.worst_margin = prop.worst_margin.min(margin);
            if !ok {
                prop.passed = false;
                prop.failures += 1;
                prop.first_failure
                    .get_or_insert_with(|| format!("trial {t} (seed {seed}): {detail}"));
            }
            match per_trial.iter_mut().find(|(n, _)| *n == name) {
                Some((_, m)) => *m = m.min(margin),
                None => per_trial.push((name, margin)),
            }
        }
        margins.extend(per_trial.into_iter().map(|(property, margin)| TrialMargin {
            trial: t,
            seed,
            property: property.to_string(),
            margin,
        }));
    }
    Ok(VerificationReport {
        suite,
        trials,
        seed: scale.seed,
        properties,
        margins,
        statuses,
        wall_ms: start.elapsed().as_millis(),
    })
}

fn trial(suite: Suite, seed: u64, t: usize, config: &EstimatorConfig) -> Result<Log> {
    let mut log = Log::default();
    match suite {
        Suite::L0 => l0_trial(&mut log, seed, t, config)?,
        Suite::D1 => d1_trial(&mut log, seed, t, config)?,
        Suite::Counterexample => counterexample_trial(&mut log, config)?,
        Suite::Thm1 => thm1_trial(&mut log, seed, t, config)?,
        Suite::Thm2 => thm2_trial(&mut log, seed, t, config)?,
        Suite::Thm3 => thm3_trial(&mut log, seed, t, config)?,
        Suite::Recovery => recovery_trial(&mut log, seed, t, config)?,
        Suite::Staircase => staircase_trial(&mut log, seed, t, config)?,
        Suite::Remark3 => remark3_trial(&mut log, seed, t, config)?,
        Suite::L1 => l1_trial(&mut log, seed, t, config)?,
    }
    Ok(log)
}

fn l0_trial(log: &mut Log, seed: u64, t: usize, config: &EstimatorConfig) -> Result<()> {
    for (m, n) in [(4, 8), (4, 6)] {
        let a = fixture(seed, t, m, n, false);
        let ctx = NscContext::new(&a, config.clone())?;
        let spark = ctx.spark().spark;
        log.weak("spark_is_m_plus_1", -(spark as f64 - (m + 1) as f64).abs(), || {
            format!("({m},{n}) spark {spark}")
        });
        for k in 1..=m {
            let e = ctx.estimate(NscQuery::new(0.0, k)?)?;
            log.statuses.add(e.status);
            let want = k as f64 / (spark - k) as f64;
            log.weak("l0_closed_form", L0_TOL - (e.value - want).abs(), || {
                format!("({m},{n}) k {k}: {} vs {want}", e.value)
            });
        }
        let e = ctx.estimate(NscQuery::new(0.0, m + 1)?)?;
        log.statuses.add(e.status);
        log.weak("infinite_at_spark", if e.status == Status::Infinite { 0.0 } else { -1.0 }, || {
            format!("({m},{n}) k {}: {:?}", m + 1, e.status)
        });
    }
    Ok(())
}

fn p_grid_11() -> Vec<f64> {
    uniform_grid(11)
}

fn d1_trial(log: &mut Log, seed: u64, t: usize, config: &EstimatorConfig) -> Result<()> {
    let forced = forced_multistart(config);
    for m in [3, 4, 5] {
        let a = fixture(seed, t, m, m + 1, false);
        let ctx = NscContext::new(&a, config.clone())?;
        for k in 1..=2 {
            for &p in &p_grid_11() {
                let q = NscQuery::new(p, k)?;
                let exact = crate::nsc::nsc_exact_d1(ctx.basis(), q)?;
                let est = ctx.estimate_with(q, &forced)?;
                log.statuses.add(est.status);
                let diff = (est.value - exact.value).abs();
                let diff = if est.value == exact.value { 0.0 } else { diff };
                log.weak("multistart_matches_d1", D1_TOL - diff, || {
                    format!("({m},{}) k {k} p {p}: {} vs {}", m + 1, est.value, exact.value)
                });
            }
        }
    }
    Ok(())
}

fn counterexample_trial(log: &mut Log, config: &EstimatorConfig) -> Result<()> {
    let ctx = NscContext::new(&counterexample_matrix(), config.clone())?;
    for p in uniform_grid(101) {
        let e = ctx.estimate(NscQuery::new(p, 1)?)?;
        log.statuses.add(e.status);
        log.weak("gamma_is_one", COUNTEREXAMPLE_TOL - (e.value - 1.0).abs(), || {
            format!("p {p}: {}", e.value)
        });
        let ks = k_star(&ctx, p, DEFAULT_MARGIN)?;
        log.weak("k_star_is_zero", -(ks.k as f64), || format!("p {p}: k* = {}", ks.k));
    }
    Ok(())
}

/// γ(p, k) on a grid for one context, with statuses recorded.
fn gammas(log: &mut Log, ctx: &NscContext, grid: &[f64], k: usize) -> Result<Vec<(f64, Status)>> {
    grid.iter()
        .map(|&p| {
            let e = ctx.estimate(NscQuery::new(p, k)?)?;
            log.statuses.add(e.status);
            Ok((e.value, e.status))
        })
        .collect()
}

fn require_exact(log: &mut Log, values: &[(f64, Status)], what: impl Fn() -> String) {
    let inexact = values.iter().filter(|v| v.1 != Status::Exact).count();
    log.weak("exact_oracle", -(inexact as f64), || format!("{}: {inexact} inexact values", what()));
}

fn thm1_trial(log: &mut Log, seed: u64, t: usize, config: &EstimatorConfig) -> Result<()> {
    let a = fixture(seed, t, 4, 6, false);
    let ctx = NscContext::new(&a, config.clone())?;
    let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
    let rows: Vec<Vec<(f64, Status)>> = (1..=4).map(|k| gammas(log, &ctx, &grid, k)).collect::<Result<_>>()?;
    for (k, row) in rows.iter().enumerate() {
        require_exact(log, row, || format!("k {}", k + 1));
    }
    for k in 0..3 {
        for (i, &p) in grid.iter().enumerate() {
            let (lo, hi) = (rows[k][i].0, rows[k + 1][i].0);
            log.strict("strict_k_monotonicity", hi - lo, || {
                format!("p {p}: γ(k={}) = {lo}, γ(k={}) = {hi}", k + 1, k + 2)
            });
        }
    }
    Ok(())
}

fn thm2_trial(log: &mut Log, seed: u64, t: usize, config: &EstimatorConfig) -> Result<()> {
    let a = fixture(seed, t, 4, 6, false);
    let ctx = NscContext::new(&a, config.clone())?;
    let finest = CONTINUITY_DELTAS[CONTINUITY_DELTAS.len() - 1];
    let steps = (1.0 / finest).round() as usize;
    let grid = uniform_grid(steps + 1);
    for k in 1..=3 {
        let row = gammas(log, &ctx, &grid, k)?;
        require_exact(log, &row, || format!("k {k}"));
        for i in 0..steps {
            let (lo, hi) = (row[i].0, row[i + 1].0);
            log.weak("non_decreasing_in_p", hi - lo + MONOTONE_P_SLACK, || {
                format!("k {k} p {}: {lo} then {hi}", grid[i])
            });
        }
        let moduli: Vec<f64> = CONTINUITY_DELTAS
            .iter()
            .map(|&d| {
                let stride = (d / finest).round() as usize;
                (0..=steps - stride)
                    .map(|i| (row[i + stride].0 - row[i].0).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        for w in moduli.windows(2) {
            log.weak("modulus_non_increasing", w[0] - w[1], || format!("k {k}: moduli {moduli:?}"));
        }
    }
    Ok(())
}

fn thm3_trial(log: &mut Log, seed: u64, t: usize, config: &EstimatorConfig) -> Result<()> {
    let a = fixture(seed, t, 4, 6, false);
    let ctx = NscContext::new(&a, config.clone())?;
    let grid = p_grid_11();
    for k in 1..=2 {
        let row = gammas(log, &ctx, &grid, k)?;
        require_exact(log, &row, || format!("k {k}"));
        for i in 0..grid.len() - 1 {
            let (lo, hi) = (row[i].0, row[i + 1].0);
            log.strict("strict_p_monotonicity", hi - lo - STRICT_P_STEP, || {
                format!("k {k} p {}: {lo} then {hi}", grid[i])
            });
        }
        let gap = row[grid.len() - 1].0 - row[0].0;
        log.strict("endpoint_gap", gap - ENDPOINT_GAP, || format!("k {k}: γ(1) − γ(0) = {gap}"));
    }
    if t == 0 {
        let ctx = NscContext::new(&equal_magnitude_matrix(), config.clone())?;
        let row = gammas(log, &ctx, &grid, 1)?;
        let spread = row.iter().map(|v| (v.0 - row[0].0).abs()).fold(0.0, f64::max);
        log.weak("equal_magnitude_constant", CONSTANT_TOL - spread, || {
            format!("values {:?}", row.iter().map(|v| v.0).collect::<Vec<_>>())
        });
    }
    Ok(())
}

/// Scans seeded (4,6) matrices for the `t`-th one satisfying `accept`.
fn find_fixture<F>(seed: u64, purpose: &str, t: usize, mut accept: F) -> Result<Option<(SensingMatrix, NscContext)>>
where
    F: FnMut(&NscContext) -> Result<bool>,
{
    let mut found = 0;
    for i in 0..(200 * (t + 1)) {
        let s = derive_seed(seed, purpose, i as u64);
        let a = gen_matrix(&GeneratorSpec::gaussian(4, 6, s));
        let ctx = NscContext::new(&a, EstimatorConfig::default())?;
        if accept(&ctx)? {
            if found == t {
                return Ok(Some((a, ctx)));
            }
            found += 1;
        }
    }
    Ok(None)
}

fn recovery_trial(log: &mut Log, seed: u64, t: usize, config: &EstimatorConfig) -> Result<()> {
    let k_rec = 1;
    let pick = find_fixture(seed, "recovery-fixture", t, |ctx| {
        let e = ctx.estimate_with(NscQuery::new(1.0, k_rec)?, config)?;
        Ok(e.status == Status::Exact && e.value <= RECOVERY_GAMMA_MAX)
    })?;
    log.weak("recovery_fixture_found", if pick.is_some() { 0.0 } else { -1.0 }, || {
        "no fixture with γ(ℓ1) ≤ 0.95".into()
    });
    if let Some((a, _)) = pick {
        let irls = IrlsConfig::default();
        for (si, support) in Combinations::new(a.cols(), k_rec).enumerate() {
            for draw in 0..3u64 {
                let s = derive_seed(seed, "recovery-values", ((t * 1000 + si) * 3) as u64 + draw);
                let inst = RecoveryInstance::new(a.clone(), gen_on_support(a.cols(), &support, Distribution::Gaussian, s))?;
                let r = irls_recover(&inst, 1.0, &irls)?;
                let err = r.x_hat.iter().zip(&inst.x_true).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
                log.weak("irls_recovers", RECOVER_TOL - err, || {
                    format!("support {support:?} draw {draw}: error {err:e}")
                });
            }
        }
    }

    let k_wit = 2;
    let p = if t % 2 == 0 { 1.0 } else { 0.5 };
    let pick = find_fixture(seed, "witness-fixture", t, |ctx| {
        let e = ctx.estimate_with(NscQuery::new(p, k_wit)?, config)?;
        Ok(e.certificate.as_ref().is_some_and(|c| c.theta_value >= WITNESS_THETA_MIN))
    })?;
    log.weak("witness_fixture_found", if pick.is_some() { 0.0 } else { -1.0 }, || {
        "no certificate with θ ≥ 1.05".into()
    });
    if let Some((a, ctx)) = pick {
        let e = ctx.estimate_with(NscQuery::new(p, k_wit)?, config)?;
        let cert = e.certificate.expect("checked above");
        let w = failure_witness(&a, &cert, p)?;
        // Direct evaluation, independent of the witness's own bookkeeping.
        let obj = |x: &[f64]| x.iter().map(|v| if *v == 0.0 { 0.0 } else { v.abs().powf(p) }).sum::<f64>();
        let (true_obj, alt_obj) = (obj(&w.instance.x_true), obj(&w.alternative));
        log.strict("witness_strict", true_obj - alt_obj, || {
            format!("p {p}: ‖x*‖ = {true_obj}, ‖x′‖ = {alt_obj}")
        });
        let y_alt = a.mul_vec(&w.alternative);
        let mismatch = y_alt.iter().zip(&w.instance.y).fold(0.0f64, |m, (u, v)| m.max((u - v).abs()));
        log.weak("witness_same_measurements", 1e-9 - mismatch, || format!("‖Ax′ − y‖∞ = {mismatch:e}"));
    }
    Ok(())
}

fn staircase_trial(log: &mut Log, seed: u64, t: usize, config: &EstimatorConfig) -> Result<()> {
    let a = fixture(seed, t, 4, 8, false);
    let ctx = NscContext::new(&a, config.clone())?;
    let curve = staircase(&ctx, &uniform_grid(101))?;
    for s in &curve.statuses {
        log.statuses.add(*s);
    }
    let half_l = ctx.spark().l() / 2;
    log.weak("starts_at_half_l", -(curve.values[0] as f64 - half_l as f64).abs(), || {
        format!("k*(0) = {}, ⌊L/2⌋ = {half_l}", curve.values[0])
    });
    log.weak("non_increasing", -(curve.rises().len() as f64), || format!("rises at {:?}", curve.rises()));
    for j in &curve.jumps {
        log.weak("unit_drops", -((j.size() as f64) - 1.0).abs(), || format!("jump {j:?}"));
    }
    Ok(())
}

fn remark3_trial(log: &mut Log, seed: u64, t: usize, config: &EstimatorConfig) -> Result<()> {
    let a = fixture(seed, t, 4, 8, true);
    let ctx = NscContext::new(&a, config.clone())?;
    let spark = ctx.spark().spark;
    log.weak("spark_at_least_3", spark as f64 - 3.0, || format!("spark {spark}"));
    let e = ctx.estimate(NscQuery::new(1.0, 1)?)?;
    log.statuses.add(e.status);
    log.strict("gamma_l1_below_one", 1.0 - e.value, || format!("γ(ℓ1, A, 1) = {}", e.value));
    Ok(())
}

fn l1_trial(log: &mut Log, seed: u64, t: usize, config: &EstimatorConfig) -> Result<()> {
    let a = fixture(seed, t, 4, 6, false);
    let ctx = NscContext::new(&a, config.clone())?;
    let forced = forced_multistart(config);
    for k in 1..=2 {
        let q = NscQuery::new(1.0, k)?;
        let exact = crate::nsc::nsc_exact_l1_enum(ctx.basis(), q, config.enum_limits)?;
        let est = ctx.estimate_with(q, &forced)?;
        log.statuses.add(exact.status);
        log.statuses.add(est.status);
        log.weak("multistart_matches_enumeration", L1_TOL - (est.value - exact.value).abs(), || {
            format!("k {k}: {} vs {}", est.value, exact.value)
        });
        log.weak(
            "never_exceeds_exact",
            exact.value - est.value + SOUNDNESS_SLACK * exact.value.max(1.0),
            || format!("k {k}: estimate {} above exact {}", est.value, exact.value),
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scales_parse() {
        let s = SuiteScales::default();
        assert_eq!(s.thm1.trials, 50);
        assert_eq!(s.thm3.trials, 30);
        assert_eq!(s.staircase.trials, 20);
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("thm9".parse::<Suite>().is_err());
    }

    #[test]
    fn small_suites_pass() {
        let cfg = EstimatorConfig::default();
        for suite in [Suite::L0, Suite::Counterexample, Suite::Thm1, Suite::Remark3, Suite::Recovery] {
            let r = run_suite(suite, Scale { trials: 2, seed: 5 }, &cfg).unwrap();
            assert!(r.passed(), "{suite}: {:?}", r.properties);
            assert!(!r.margins.is_empty());
        }
    }

    #[test]
    fn reports_are_deterministic() {
        let cfg = EstimatorConfig::default();
        let mut a = run_suite(Suite::L1, Scale { trials: 2, seed: 9 }, &cfg).unwrap();
        let mut b = run_suite(Suite::L1, Scale { trials: 2, seed: 9 }, &cfg).unwrap();
        a.wall_ms = 0;
        b.wall_ms = 0;
        assert_eq!(a, b);
    }

    #[test]
    fn zero_trials_is_an_error() {
        assert!(run_suite(Suite::L0, Scale { trials: 0, seed: 0 }, &EstimatorConfig::default()).is_err());
    }
}
