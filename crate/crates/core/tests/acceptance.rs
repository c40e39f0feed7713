//! Acceptance criteria, one line each.
//!
//! Runs without the libtest harness so the PASS/FAIL lines are always
//! printed. Exits non-zero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nsclab::combinatorics::Combinations;
use nsclab::derived::{k_star, staircase, uniform_grid, DEFAULT_MARGIN};
use nsclab::matgen::{gen_matrix, gen_on_support, Distribution, GeneratorSpec};
use nsclab::nsc::nsc_exact_l1_enum;
use nsclab::recovery::{failure_witness, irls_lp, IrlsConfig, RecoveryInstance};
use nsclab::{EstimatorConfig, NscContext, NscQuery, PathChoice, SensingMatrix, Status};

// Tolerances and scales.
const L0_TRIALS: u64 = 20;
const L0_MAX_SECS: u64 = 10;
const D1_TRIALS: u64 = 20;
const D1_TOL: f64 = 1e-6;
const D1_MAX_SECS: u64 = 60;
const CE_TOL: f64 = 1e-9;
const CE_GRID: usize = 101;
const CE_MAX_SECS: u64 = 5;
const THM1_TRIALS: u64 = 50;
const THM1_P: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
const THM1_MAX_SECS: u64 = 120;
const THM2_DELTAS: [f64; 3] = [0.02, 0.01, 0.005];
const THM2_MONOTONE_TOL: f64 = 1e-9;
const THM3_TRIALS: u64 = 30;
const THM3_STEP: f64 = 1e-9;
const THM3_GAP: f64 = 0.01;
const THM3_GRID: usize = 11;
const REC_FIXTURES: usize = 10;
const REC_GAMMA_MAX: f64 = 0.95;
const REC_DRAWS: u64 = 3;
const REC_TOL: f64 = 1e-5;
const WIT_FIXTURES: usize = 10;
const WIT_THETA_MIN: f64 = 1.05;
const REC_MAX_SECS: u64 = 120;
const STAIR_TRIALS: u64 = 20;
const STAIR_GRID: usize = 101;
const REMARK3_TRIALS: u64 = 50;
const L1_TOL: f64 = 1e-6;

/// Equality of exact values computed along two float paths.
const FLOAT_SLACK: f64 = 1e-12;
/// Relative slack when an independent oracle re-evaluates θ; values near
/// 1e5 lose a few more digits in the complement sum.
const ORACLE_SLACK: f64 = 1e-9;

fn gaussian(m: usize, n: usize, seed: u64) -> SensingMatrix {
    gen_matrix(&GeneratorSpec::gaussian(m, n, seed))
}

/// The shared (4,6) fixtures of criteria 4, 5, 6 and 10.
fn fixture_46(t: u64) -> SensingMatrix {
    gaussian(4, 6, 4600 + t)
}

fn forced_multistart() -> EstimatorConfig {
    EstimatorConfig {
        vertex_seeds: false,
        ..EstimatorConfig::default()
    }
    .with_path(PathChoice::Multistart)
}

fn ctx(a: &SensingMatrix) -> NscContext {
    NscContext::new(a, EstimatorConfig::default()).expect("valid matrix")
}

fn gamma(c: &NscContext, p: f64, k: usize) -> (f64, Status) {
    let e = c.estimate(NscQuery::new(p, k).unwrap()).unwrap();
    (e.value, e.status)
}

/// Spark by SVD rank of every column subset.
fn oracle_spark(a: &SensingMatrix) -> usize {
    let na = common::to_na(a);
    for s in 1..=a.cols() {
        if s > a.rows() {
            return s;
        }
        for cols in Combinations::new(a.cols(), s) {
            let sub = na.select_columns(&cols);
            let sv = sub.singular_values();
            let smax = sv.max();
            if sv.min() <= 1e-10 * smax.max(1.0) {
                return s;
            }
        }
    }
    a.cols() + 1
}

#[derive(Default)]
struct Tally {
    checks: usize,
    failures: Vec<String>,
}

impl Tally {
    fn expect(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures.push(msg());
        }
    }
}

struct Outcome {
    tally: Tally,
    summary: String,
}

fn run(id: u32, name: &str, limit: Option<u64>, body: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let mut out = body();
    let elapsed = start.elapsed();
    if let Some(secs) = limit {
        out.tally.expect(elapsed < Duration::from_secs(secs), || {
            format!("runtime {:.1} s exceeds {secs} s", elapsed.as_secs_f64())
        });
    }
    let ok = out.tally.failures.is_empty();
    println!(
        "{} [{id:>2}] {name}: {} ({} checks, {:.2} s)",
        if ok { "PASS" } else { "FAIL" },
        out.summary,
        out.tally.checks,
        elapsed.as_secs_f64()
    );
    for f in out.tally.failures.iter().take(5) {
        println!("       - {f}");
    }
    if out.tally.failures.len() > 5 {
        println!("       - … {} more", out.tally.failures.len() - 5);
    }
    ok
}

fn l0_closed_form() -> Outcome {
    let mut t = Tally::default();
    for (m, n) in [(4, 8), (4, 6)] {
        for seed in 0..L0_TRIALS {
            let a = gaussian(m, n, 100 + seed);
            let c = ctx(&a);
            let spark = c.spark().spark;
            let oracle = oracle_spark(&a);
            t.expect(spark == 5 && oracle == 5, || format!("({m},{n}) seed {seed}: spark {spark}, oracle {oracle}"));
            for k in 1..=4 {
                let (v, s) = gamma(&c, 0.0, k);
                let want = k as f64 / (5 - k) as f64;
                t.expect(v == want && s == Status::Exact, || {
                    format!("({m},{n}) seed {seed} k {k}: {v} ({s}) vs {want}")
                });
            }
            let (_, s) = gamma(&c, 0.0, 5);
            t.expect(s == Status::Infinite, || format!("({m},{n}) seed {seed} k 5: {s}"));
        }
    }
    Outcome {
        tally: t,
        summary: "spark 5 and γ(ℓ0,k) = k/(5−k), infinite at k = 5 on (4,8) and (4,6)".into(),
    }
}

fn d1_equivalence() -> Outcome {
    let mut t = Tally::default();
    let forced = forced_multistart();
    let mut worst: f64 = 0.0;
    for m in [3, 4, 5] {
        for seed in 0..D1_TRIALS {
            let a = gaussian(m, m + 1, 200 + seed);
            let z = &common::svd_null_basis(&common::to_na(&a), 1e-10)[0];
            let c = ctx(&a);
            for k in 1..=2 {
                for p in uniform_grid(11) {
                    let e = c.estimate_with(NscQuery::new(p, k).unwrap(), &forced).unwrap();
                    let want = common::d1_closed_form(p, z, k);
                    let diff = (e.value - want).abs();
                    worst = worst.max(diff);
                    t.expect(e.method == nsclab::Method::Multistart && diff <= D1_TOL, || {
                        format!("({m},{}) seed {seed} k {k} p {p}: {} vs {want}", m + 1, e.value)
                    });
                }
            }
        }
    }
    Outcome {
        tally: t,
        summary: format!("forced multistart vs SVD closed form, max |Δ| = {worst:.1e} ≤ {D1_TOL:e}"),
    }
}

fn counterexample() -> Outcome {
    let mut t = Tally::default();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let a = SensingMatrix::new(2, 2, vec![h, h, h, h]).unwrap();
    let c = ctx(&a);
    let mut worst: f64 = 0.0;
    for p in uniform_grid(CE_GRID) {
        let (v, _) = gamma(&c, p, 1);
        worst = worst.max((v - 1.0).abs());
        t.expect((v - 1.0).abs() <= CE_TOL, || format!("p {p}: γ = {v}"));
        let ks = k_star(&c, p, DEFAULT_MARGIN).unwrap().k;
        t.expect(ks == 0, || format!("p {p}: k* = {ks}"));
    }
    Outcome {
        tally: t,
        summary: format!("γ(ℓp,A,1) = 1 over {CE_GRID} points (max |γ−1| = {worst:.1e}), k* = 0"),
    }
}

fn thm1() -> Outcome {
    let mut t = Tally::default();
    let mut min_gap = f64::INFINITY;
    for seed in 0..THM1_TRIALS {
        let a = fixture_46(seed);
        let c = ctx(&a);
        for &p in &THM1_P {
            let vals: Vec<(f64, Status)> = (1..=4).map(|k| gamma(&c, p, k)).collect();
            for (k, (v, s)) in vals.iter().enumerate() {
                t.expect(*s == Status::Exact, || format!("seed {seed} p {p} k {}: status {s}", k + 1));
                // No sampled point of the null space may beat an exact value.
                let sweep = common::d2_sweep(&a, p, k + 1, 720);
                t.expect(*v >= sweep - ORACLE_SLACK * sweep.max(1.0), || {
                    format!("seed {seed} p {p} k {}: {v} below oracle sample {sweep}", k + 1)
                });
            }
            for k in 0..3 {
                let gap = vals[k + 1].0 - vals[k].0;
                min_gap = min_gap.min(gap);
                t.expect(gap > 0.0, || format!("seed {seed} p {p}: γ(k={}) − γ(k={}) = {gap}", k + 2, k + 1));
            }
        }
    }
    Outcome {
        tally: t,
        summary: format!("γ(k+1) − γ(k) > 0 on {THM1_TRIALS} exact (4,6) fixtures, min gap {min_gap:.3e}"),
    }
}

fn thm2() -> Outcome {
    let mut t = Tally::default();
    let finest = THM2_DELTAS[THM2_DELTAS.len() - 1];
    let steps = (1.0 / finest).round() as usize;
    let grid = uniform_grid(steps + 1);
    let mut worst_dip: f64 = 0.0;
    for seed in 0..THM1_TRIALS {
        let c = ctx(&fixture_46(seed));
        for k in 1..=3 {
            let row: Vec<f64> = grid.iter().map(|&p| gamma(&c, p, k).0).collect();
            for i in 0..steps {
                worst_dip = worst_dip.max(row[i] - row[i + 1]);
                t.expect(row[i + 1] >= row[i] - THM2_MONOTONE_TOL, || {
                    format!("seed {seed} k {k} p {}: {} then {}", grid[i], row[i], row[i + 1])
                });
            }
            let moduli: Vec<f64> = THM2_DELTAS
                .iter()
                .map(|&d| {
                    let stride = (d / finest).round() as usize;
                    (0..=steps - stride).map(|i| (row[i + stride] - row[i]).abs()).fold(0.0, f64::max)
                })
                .collect();
            t.expect(moduli.windows(2).all(|w| w[1] <= w[0]), || {
                format!("seed {seed} k {k}: moduli {moduli:?}")
            });
        }
    }
    Outcome {
        tally: t,
        summary: format!("moduli non-increasing as δ halves; γ non-decreasing in p (largest dip {worst_dip:.1e})"),
    }
}

fn thm3() -> Outcome {
    let mut t = Tally::default();
    let grid = uniform_grid(THM3_GRID);
    let mut min_step = f64::INFINITY;
    for seed in 0..THM3_TRIALS {
        let c = ctx(&fixture_46(seed));
        for k in 1..=2 {
            let row: Vec<(f64, Status)> = grid.iter().map(|&p| gamma(&c, p, k)).collect();
            for i in 0..THM3_GRID - 1 {
                let step = row[i + 1].0 - row[i].0;
                min_step = min_step.min(step);
                t.expect(step > THM3_STEP && row[i].1 == Status::Exact && row[i + 1].1 == Status::Exact, || {
                    format!("seed {seed} k {k} p {}: step {step} ({}, {})", grid[i], row[i].1, row[i + 1].1)
                });
            }
            let gap = row[THM3_GRID - 1].0 - row[0].0;
            t.expect(gap > THM3_GAP, || format!("seed {seed} k {k}: γ(1) − γ(0) = {gap}"));
        }
    }
    // Null space spanned by [1, 1, −1].
    let a = SensingMatrix::new(2, 3, vec![1.0, 0.0, 1.0, 0.0, 1.0, 1.0]).unwrap();
    let c = ctx(&a);
    let row: Vec<f64> = grid.iter().map(|&p| gamma(&c, p, 1).0).collect();
    t.expect(row.iter().all(|v| (v - 0.5).abs() <= FLOAT_SLACK), || {
        format!("equal-magnitude fixture not constant: {row:?}")
    });
    Outcome {
        tally: t,
        summary: format!("strict increase in p (min step {min_step:.3e}), equal-magnitude fixture constant at 0.5"),
    }
}

fn definition1() -> Outcome {
    let mut t = Tally::default();
    let irls = IrlsConfig::default();
    let mut worst_err: f64 = 0.0;
    let mut recovered = 0;
    let mut fixtures = 0;
    for seed in 7000.. {
        if fixtures == REC_FIXTURES || seed > 9000 {
            break;
        }
        let a = gaussian(4, 6, seed);
        let c = ctx(&a);
        let (g, s) = gamma(&c, 1.0, 1);
        if !(s == Status::Exact && g <= REC_GAMMA_MAX) {
            continue;
        }
        fixtures += 1;
        for support in Combinations::new(6, 1) {
            for draw in 0..REC_DRAWS {
                let x = gen_on_support(6, &support, Distribution::Gaussian, seed * 100 + support[0] as u64 * 10 + draw);
                let y = a.mul_vec(&x);
                let r = irls_lp(&a, &y, 1.0, &irls).unwrap();
                let err = r.x_hat.iter().zip(&x).fold(0.0f64, |m, (u, v)| m.max((u - v).abs()));
                worst_err = worst_err.max(err);
                recovered += usize::from(err <= REC_TOL);
                t.expect(err <= REC_TOL, || format!("seed {seed} support {support:?} draw {draw}: error {err:e}"));
            }
        }
    }
    t.expect(fixtures == REC_FIXTURES, || format!("only {fixtures} recovery fixtures found"));

    let mut witnesses = 0;
    for seed in 8000.. {
        if witnesses == WIT_FIXTURES || seed > 10000 {
            break;
        }
        let a = gaussian(4, 6, seed);
        let c = ctx(&a);
        let p = if witnesses % 2 == 0 { 1.0 } else { 0.5 };
        let e = c.estimate(NscQuery::new(p, 2).unwrap()).unwrap();
        let Some(cert) = e.certificate.filter(|c| c.theta_value >= WIT_THETA_MIN) else {
            continue;
        };
        witnesses += 1;
        let w = failure_witness(&a, &cert, p).unwrap();
        let inst: &RecoveryInstance = &w.instance;
        let obj = |x: &[f64]| x.iter().filter(|v| **v != 0.0).map(|v| v.abs().powf(p)).sum::<f64>();
        let (o_star, o_alt) = (obj(&inst.x_true), obj(&w.alternative));
        t.expect(o_alt < o_star, || format!("seed {seed} p {p}: ‖x′‖ = {o_alt}, ‖x*‖ = {o_star}"));
        let y_alt = a.mul_vec(&w.alternative);
        let y_star = a.mul_vec(&inst.x_true);
        let mismatch = y_alt.iter().zip(&y_star).fold(0.0f64, |m, (u, v)| m.max((u - v).abs()));
        t.expect(mismatch <= 1e-9, || format!("seed {seed}: A·x′ ≠ A·x* by {mismatch:e}"));
        t.expect(inst.sparsity <= 2, || format!("seed {seed}: witness sparsity {}", inst.sparsity));
    }
    t.expect(witnesses == WIT_FIXTURES, || format!("only {witnesses} witness fixtures found"));
    Outcome {
        tally: t,
        summary: format!(
            "IRLS recovered {recovered} instances on {fixtures} fixtures (max error {worst_err:.1e}); {witnesses} strict witnesses"
        ),
    }
}

fn staircase_structure() -> Outcome {
    let mut t = Tally::default();
    let grid = uniform_grid(STAIR_GRID);
    let mut drops = 0;
    for seed in 0..STAIR_TRIALS {
        let a = gaussian(4, 8, 800 + seed);
        let c = ctx(&a);
        let half_l = (oracle_spark(&a) - 1) / 2;
        let s = staircase(&c, &grid).unwrap();
        t.expect(half_l == 2 && s.values[0] == half_l, || {
            format!("seed {seed}: k*(0) = {}, ⌊L/2⌋ = {half_l}", s.values[0])
        });
        t.expect(s.values.windows(2).all(|w| w[1] <= w[0]), || format!("seed {seed}: values {:?}", s.values));
        for w in s.values.windows(2).filter(|w| w[1] < w[0]) {
            drops += 1;
            t.expect(w[0] - w[1] == 1, || format!("seed {seed}: drop {} → {}", w[0], w[1]));
        }
    }
    Outcome {
        tally: t,
        summary: format!("staircase starts at 2, non-increasing, {drops} unit drops over {STAIR_TRIALS} matrices"),
    }
}

fn remark3() -> Outcome {
    let mut t = Tally::default();
    let mut worst: f64 = 0.0;
    for seed in 0..REMARK3_TRIALS {
        let a = gen_matrix(&GeneratorSpec::gaussian(4, 8, 900 + seed).normalized());
        let c = ctx(&a);
        let (g, s) = gamma(&c, 1.0, 1);
        let oracle = common::l1_by_vertices(&a, 1);
        worst = worst.max(g);
        t.expect(g < 1.0 && s == Status::Exact, || format!("seed {seed}: γ(ℓ1,A,1) = {g} ({s})"));
        t.expect(oracle < 1.0, || format!("seed {seed}: vertex oracle {oracle}"));
    }
    Outcome {
        tally: t,
        summary: format!("γ(ℓ1,A,1) < 1 on {REMARK3_TRIALS} unit-column (4,8) matrices, max {worst:.4}"),
    }
}

fn l1_exact_vs_estimator() -> Outcome {
    let mut t = Tally::default();
    let forced = forced_multistart();
    let mut worst: f64 = 0.0;
    for seed in 0..THM1_TRIALS {
        let a = fixture_46(seed);
        let c = ctx(&a);
        for k in 1..=2 {
            let q = NscQuery::new(1.0, k).unwrap();
            let exact = nsc_exact_l1_enum(c.basis(), q, Default::default()).unwrap();
            let est = c.estimate_with(q, &forced).unwrap();
            let oracle = common::l1_by_vertices(&a, k);
            worst = worst.max((est.value - exact.value).abs());
            t.expect((est.value - exact.value).abs() <= L1_TOL, || {
                format!("seed {seed} k {k}: estimate {} vs exact {}", est.value, exact.value)
            });
            t.expect(est.value <= exact.value + FLOAT_SLACK * exact.value.max(1.0), || {
                format!("seed {seed} k {k}: estimate {} exceeds exact {}", est.value, exact.value)
            });
            t.expect((exact.value - oracle).abs() <= L1_TOL, || {
                format!("seed {seed} k {k}: enumeration {} vs vertex oracle {oracle}", exact.value)
            });
        }
    }
    Outcome {
        tally: t,
        summary: format!("enumeration = forced multistart within {L1_TOL:e} (max |Δ| {worst:.1e}), never exceeded"),
    }
}

fn main() -> ExitCode {
    let results = [
        run(1, "l0 closed form", Some(L0_MAX_SECS), l0_closed_form),
        run(2, "d=1 oracle equivalence", Some(D1_MAX_SECS), d1_equivalence),
        run(3, "counterexample fixture", Some(CE_MAX_SECS), counterexample),
        run(4, "strict monotonicity in k", Some(THM1_MAX_SECS), thm1),
        run(5, "continuity in p", None, thm2),
        run(6, "strict monotonicity in p", None, thm3),
        run(7, "recovery equivalence", Some(REC_MAX_SECS), definition1),
        run(8, "staircase structure", None, staircase_structure),
        run(9, "unit-norm column bound", None, remark3),
        run(10, "p=1 exact vs estimator", None, l1_exact_vs_estimator),
    ];
    let passed = results.iter().filter(|r| **r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
