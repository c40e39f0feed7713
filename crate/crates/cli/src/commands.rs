use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};

use nsclab::derived::{self, ExponentKind};
use nsclab::linalg::null_space_basis;
use nsclab::matgen::{self, GeneratorSpec};
use nsclab::recovery::{self, IrlsConfig, L0Limits, TrialPlan};
use nsclab::verify::{self, Suite, SuiteScales};
use nsclab::{
    Certificate, EstimatorConfig, NscContext, NscEstimate, NscQuery, PathChoice, SensingMatrix, Status, SupportSet,
};

use crate::output::{num, Columns, Format, Record, Sink, DEFAULT_COLUMNS};
use crate::{Cli, Command, EstimatorArgs, Global, MatrixArgs, MethodArg};

/// A property check failed; maps to exit code 1.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct PropertyFailure(pub String);

pub fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<PropertyFailure>().is_some() {
        return 1;
    }
    match e.downcast_ref::<nsclab::Error>() {
        Some(
            nsclab::Error::InvalidArgument(_)
            | nsclab::Error::InvalidMatrix(_)
            | nsclab::Error::Parse { .. }
            | nsclab::Error::DimensionMismatch { .. }
            | nsclab::Error::Io(_)
            | nsclab::Error::WrongDimension { .. }
            | nsclab::Error::TooLarge { .. }
            | nsclab::Error::RankDeficient
            | nsclab::Error::ZeroVector,
        ) => 2,
        Some(_) => 1,
        None => 2,
    }
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.global.jobs {
        if jobs == 0 {
            return Err(nsclab::Error::InvalidArgument("--jobs must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("starting the worker pool")?;
    }
    let g = &cli.global;
    match &cli.command {
        Command::Nsc { matrix, p, k, tol, est } => cmd_nsc(g, matrix, *p, *k, *tol, est),
        Command::Spark { matrix } => cmd_spark(g, matrix),
        Command::Staircase { matrix, p_grid, est } => cmd_staircase(g, matrix, p_grid, est),
        Command::Pstar { matrix, k, tol, est } => cmd_pstar(g, matrix, *k, *tol, est),
        Command::Curves {
            matrix,
            p_grid,
            kmax,
            est,
        } => cmd_curves(g, matrix, p_grid, *kmax, est),
        Command::Recover {
            matrix,
            p,
            k,
            y,
            trials,
            exhaustive,
            kmax,
            tol,
            restarts,
        } => {
            let irls = IrlsConfig {
                recover_tol: *tol,
                restarts: *restarts,
                seed: seed(g),
                ..IrlsConfig::default()
            };
            match y {
                Some(path) => cmd_solve(g, matrix, *p, path, *kmax, &irls),
                None => {
                    let plan = if *exhaustive {
                        TrialPlan::EverySupport { draws: 3 }
                    } else {
                        TrialPlan::Random { trials: *trials }
                    };
                    cmd_recover(g, matrix, *p, *k, &plan, &irls)
                }
            }
        }
        Command::Witness { matrix, p, k, est } => cmd_witness(g, matrix, *p, *k, est),
        Command::Gen { generate, unit_columns } => cmd_gen(g, generate, *unit_columns),
        Command::Verify {
            suite,
            trials,
            config,
            restarts,
        } => cmd_verify(g, suite, *trials, config.as_deref(), *restarts),
    }
}

fn seed(g: &Global) -> u64 {
    g.seed.unwrap_or(0)
}

struct Loaded {
    a: SensingMatrix,
    id: String,
}

fn load(g: &Global, m: &MatrixArgs) -> Result<Loaded> {
    if let Some(path) = &m.source.matrix {
        let a = matgen::read_matrix(path).with_context(|| format!("reading {}", path.display()))?;
        return Ok(Loaded {
            a,
            id: path.display().to_string(),
        });
    }
    let text = m.source.generate.as_deref().expect("clap enforces one matrix source");
    let mut spec = GeneratorSpec::parse(text, seed(g))?;
    if m.unit_columns {
        spec = spec.normalized();
    }
    Ok(Loaded {
        a: matgen::gen_matrix(&spec),
        id: spec.id(),
    })
}

fn estimator(g: &Global, est: &EstimatorArgs) -> EstimatorConfig {
    let path = match est.method {
        MethodArg::Auto => PathChoice::Auto,
        MethodArg::Grid => PathChoice::Grid,
        MethodArg::Multistart => PathChoice::Multistart,
    };
    EstimatorConfig {
        restarts: est.restarts,
        exhaustive_supports: est.exhaustive,
        rank_tol: g.rank_tol,
        ..EstimatorConfig::default()
    }
    .with_path(path)
    .with_seed(seed(g))
}

fn sink(g: &Global, default: Format, columns: Columns) -> Result<Sink> {
    let format = g.format.unwrap_or(default);
    Sink::open(g.out.as_deref(), format, columns, g.timing).context("opening output")
}

/// Parse `LO:HI:STEPS`.
fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || nsclab::Error::InvalidArgument(format!("expected LO:HI:STEPS, got `{text}`"));
    let parts: Vec<&str> = text.split(':').collect();
    let [lo, hi, steps] = parts[..] else {
        return Err(bad().into());
    };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let steps: usize = steps.trim().parse().map_err(|_| bad())?;
    Ok(derived::linear_grid(lo, hi, steps)?)
}

fn base(op: &str, id: &str, g: &Global) -> Record {
    let mut r = Record::new();
    r.insert("op".into(), json!(op));
    r.insert("matrix_id".into(), json!(id));
    r.insert("seed".into(), json!(seed(g)));
    r
}

fn stamp(r: &mut Record, g: &Global, start: Instant) {
    if g.timing {
        r.insert("ms".into(), num(start.elapsed().as_secs_f64() * 1e3));
    }
}

fn one_based(indices: &[usize]) -> Value {
    json!(indices.iter().map(|i| i + 1).collect::<Vec<_>>())
}

fn nums(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| num(x)).collect())
}

fn certificate_json(c: &Certificate) -> Value {
    json!({
        "z": nums(&c.z),
        "support": one_based(c.support.indices()),
        "theta": num(c.theta_value),
    })
}

fn estimate_record(op: &str, id: &str, g: &Global, e: &NscEstimate) -> Record {
    let mut r = base(op, id, g);
    r.insert("p".into(), num(e.query.p));
    r.insert("k".into(), json!(e.query.k));
    r.insert("value".into(), num(e.value));
    r.insert("status".into(), json!(e.status.to_string()));
    r.insert("method".into(), json!(e.method.to_string()));
    if let Some(c) = &e.certificate {
        r.insert("certificate".into(), certificate_json(c));
    }
    r
}

fn cmd_nsc(g: &Global, m: &MatrixArgs, p: f64, k: usize, tol: f64, est: &EstimatorArgs) -> Result<()> {
    let start = Instant::now();
    let src = load(g, m)?;
    let query = NscQuery::with_zero_tol(p, k, tol)?;
    let ctx = NscContext::new(&src.a, estimator(g, est))?;
    let e = ctx.estimate(query)?;
    let mut r = estimate_record("nsc", &src.id, g, &e);
    stamp(&mut r, g, start);
    let mut out = sink(g, Format::Jsonl, DEFAULT_COLUMNS)?;
    out.write(&r)?;
    out.finish()?;
    Ok(())
}

const SPARK_COLUMNS: Columns = &[
    ("op", "op"),
    ("matrix_id", "matrix_id"),
    ("spark", "spark"),
    ("L", "L"),
    ("witness", "witness"),
    ("full_column_rank", "full_column_rank"),
    ("seed", "seed"),
];

fn cmd_spark(g: &Global, m: &MatrixArgs) -> Result<()> {
    let start = Instant::now();
    let src = load(g, m)?;
    let config = EstimatorConfig {
        rank_tol: g.rank_tol,
        ..EstimatorConfig::default()
    };
    let ctx = NscContext::new(&src.a, config)?;
    let s = ctx.spark();
    let mut r = base("spark", &src.id, g);
    r.insert("spark".into(), json!(s.spark));
    r.insert("L".into(), json!(s.l()));
    r.insert("witness".into(), s.witness.as_deref().map_or(Value::Null, one_based));
    r.insert("full_column_rank".into(), json!(s.full_column_rank));
    stamp(&mut r, g, start);
    let mut out = sink(g, Format::Jsonl, SPARK_COLUMNS)?;
    out.write(&r)?;
    out.finish()?;
    Ok(())
}

const STAIRCASE_COLUMNS: Columns = &[("p", "p"), ("k_star", "k_star")];

fn cmd_staircase(g: &Global, m: &MatrixArgs, grid: &str, est: &EstimatorArgs) -> Result<()> {
    let start = Instant::now();
    let src = load(g, m)?;
    let grid = parse_grid(grid)?;
    let ctx = NscContext::new(&src.a, estimator(g, est))?;
    let curve = derived::staircase(&ctx, &grid)?;
    let mut out = sink(g, Format::Csv, STAIRCASE_COLUMNS)?;
    for ((&p, &k), status) in curve.grid.iter().zip(&curve.values).zip(&curve.statuses) {
        let mut r = base("staircase", &src.id, g);
        r.insert("p".into(), num(p));
        r.insert("k_star".into(), json!(k));
        r.insert("status".into(), json!(status.to_string()));
        stamp(&mut r, g, start);
        out.write(&r)?;
    }
    out.finish()?;
    for j in &curve.jumps {
        eprintln!("jump in ({}, {}]: {} -> {}", j.p_lo, j.p_hi, j.from, j.to);
    }
    Ok(())
}

const PSTAR_COLUMNS: Columns = &[
    ("k", "k"),
    ("kind", "kind"),
    ("lo", "lo"),
    ("hi", "hi"),
    ("p_star", "value"),
    ("downgraded", "downgraded"),
];

fn cmd_pstar(g: &Global, m: &MatrixArgs, k: usize, tol: f64, est: &EstimatorArgs) -> Result<()> {
    let start = Instant::now();
    let src = load(g, m)?;
    let ctx = NscContext::new(&src.a, estimator(g, est))?;
    let e = derived::p_star(&ctx, k, tol)?;
    let mut r = base("pstar", &src.id, g);
    r.insert("k".into(), json!(k));
    let (kind, lo, hi) = match e.kind {
        ExponentKind::Empty => ("empty", Value::Null, Value::Null),
        ExponentKind::Interior { lo, hi } => ("interior", num(lo), num(hi)),
        ExponentKind::FullRange => ("full_range", Value::Null, Value::Null),
    };
    r.insert("kind".into(), json!(kind));
    r.insert("lo".into(), lo);
    r.insert("hi".into(), hi);
    r.insert("value".into(), num(e.point()));
    r.insert(
        "status".into(),
        json!(if e.downgraded { Status::LowerBound } else { Status::Exact }.to_string()),
    );
    r.insert("downgraded".into(), json!(e.downgraded));
    stamp(&mut r, g, start);
    let mut out = sink(g, Format::Csv, PSTAR_COLUMNS)?;
    out.write(&r)?;
    out.finish()?;
    Ok(())
}

const CURVE_COLUMNS: Columns = &[("p", "p"), ("k", "k"), ("gamma", "value"), ("status", "status")];

fn cmd_curves(g: &Global, m: &MatrixArgs, grid: &str, kmax: Option<usize>, est: &EstimatorArgs) -> Result<()> {
    let start = Instant::now();
    let src = load(g, m)?;
    let grid = parse_grid(grid)?;
    let ctx = NscContext::new(&src.a, estimator(g, est))?;
    let kmax = kmax.unwrap_or(ctx.spark().l());
    let ks: Vec<usize> = (1..=kmax).collect();
    let table = derived::gamma_curves(&ctx, &grid, &ks)?;
    let mut out = sink(g, Format::Csv, CURVE_COLUMNS)?;
    for row in &table.rows {
        for e in row {
            let mut r = estimate_record("curves", &src.id, g, e);
            r.remove("certificate");
            stamp(&mut r, g, start);
            out.write(&r)?;
        }
    }
    out.finish()?;
    Ok(())
}

const SOLVE_COLUMNS: Columns = &[
    ("op", "op"),
    ("matrix_id", "matrix_id"),
    ("p", "p"),
    ("value", "value"),
    ("x_hat", "x_hat"),
    ("residual", "residual"),
    ("converged", "converged"),
    ("seed", "seed"),
];

fn cmd_solve(g: &Global, m: &MatrixArgs, p: f64, y: &Path, kmax: Option<usize>, irls: &IrlsConfig) -> Result<()> {
    let start = Instant::now();
    let src = load(g, m)?;
    let y = matgen::read_vector(y).with_context(|| format!("reading {}", y.display()))?;
    let mut r = base("recover", &src.id, g);
    r.insert("p".into(), num(p));
    if p == 0.0 {
        let kmax = kmax.unwrap_or(src.a.rows());
        let sol = recovery::solve_l0_exhaustive(&src.a, &y, kmax, L0Limits::default())?;
        r.insert("k".into(), json!(sol.sparsity));
        r.insert("value".into(), json!(sol.sparsity));
        r.insert("x_hat".into(), nums(&sol.solutions[0]));
        r.insert("unique".into(), json!(sol.unique));
        r.insert("solutions".into(), json!(sol.solutions.len()));
        r.insert("truncated".into(), json!(sol.truncated));
    } else {
        let s = recovery::irls_lp(&src.a, &y, p, irls)?;
        r.insert("value".into(), num(s.objective));
        r.insert("x_hat".into(), nums(&s.x_hat));
        r.insert("residual".into(), num(s.residual));
        r.insert("converged".into(), json!(s.converged));
        r.insert("iterations".into(), json!(s.iterations));
    }
    stamp(&mut r, g, start);
    let mut out = sink(g, Format::Jsonl, SOLVE_COLUMNS)?;
    out.write(&r)?;
    out.finish()?;
    Ok(())
}

const RECOVER_COLUMNS: Columns = &[
    ("op", "op"),
    ("matrix_id", "matrix_id"),
    ("p", "p"),
    ("k", "k"),
    ("trial", "trial"),
    ("support", "support"),
    ("success", "success"),
    ("error_inf", "error_inf"),
    ("value", "value"),
    ("seed", "seed"),
];

fn cmd_recover(g: &Global, m: &MatrixArgs, p: f64, k: usize, plan: &TrialPlan, irls: &IrlsConfig) -> Result<()> {
    let start = Instant::now();
    let src = load(g, m)?;
    let report = recovery::recovery_experiment(&src.a, k, p, plan, seed(g), irls)?;
    let mut out = sink(g, Format::Jsonl, RECOVER_COLUMNS)?;
    for (t, o) in report.trials.iter().enumerate() {
        let mut r = base("recover_trial", &src.id, g);
        r.insert("p".into(), num(p));
        r.insert("k".into(), json!(k));
        r.insert("trial".into(), json!(t));
        r.insert("support".into(), one_based(&o.support));
        r.insert("success".into(), json!(o.success));
        r.insert("error_inf".into(), num(o.error_inf));
        r.insert("converged".into(), json!(o.converged));
        r.insert("trial_seed".into(), json!(o.seed));
        out.write(&r)?;
    }
    let mut r = base("recover", &src.id, g);
    r.insert("p".into(), num(p));
    r.insert("k".into(), json!(k));
    r.insert("value".into(), num(report.rate));
    r.insert("successes".into(), json!(report.successes));
    r.insert("trials".into(), json!(report.trials.len()));
    stamp(&mut r, g, start);
    out.write(&r)?;
    out.finish()?;
    eprintln!("recovered {}/{} at p = {p}, k = {k}", report.successes, report.trials.len());
    Ok(())
}

const WITNESS_COLUMNS: Columns = &[
    ("op", "op"),
    ("matrix_id", "matrix_id"),
    ("p", "p"),
    ("k", "k"),
    ("value", "value"),
    ("status", "status"),
    ("x_true", "x_true"),
    ("x_alt", "x_alt"),
    ("strict", "strict"),
    ("seed", "seed"),
];

fn cmd_witness(g: &Global, m: &MatrixArgs, p: f64, k: usize, est: &EstimatorArgs) -> Result<()> {
    let start = Instant::now();
    let src = load(g, m)?;
    let ctx = NscContext::new(&src.a, estimator(g, est))?;
    let e = ctx.estimate(NscQuery::new(p, k)?)?;
    let cert = match &e.certificate {
        Some(c) => c.clone(),
        None if e.status == Status::Infinite => spark_certificate(&ctx)?,
        None => bail!(PropertyFailure(format!(
            "γ = {} at k = {k} has no certificate, so there is no failure witness",
            e.value
        ))),
    };
    let w = recovery::failure_witness(&src.a, &cert, p)?;
    let mut r = base("witness", &src.id, g);
    r.insert("p".into(), num(p));
    r.insert("k".into(), json!(k));
    r.insert("value".into(), num(w.theta_value));
    r.insert("status".into(), json!(e.status.to_string()));
    r.insert("support".into(), one_based(cert.support.indices()));
    r.insert("x_true".into(), nums(&w.instance.x_true));
    r.insert("x_alt".into(), nums(&w.alternative));
    r.insert("y".into(), nums(&w.instance.y));
    r.insert("objective_true".into(), num(w.objective_true));
    r.insert("objective_alt".into(), num(w.objective_alternative));
    r.insert("strict".into(), json!(w.strict()));
    stamp(&mut r, g, start);
    let mut out = sink(g, Format::Jsonl, WITNESS_COLUMNS)?;
    out.write(&r)?;
    out.finish()?;
    Ok(())
}

/// Null vector supported on the spark witness columns, with S = those columns.
fn spark_certificate(ctx: &NscContext) -> Result<Certificate> {
    let a = ctx.matrix();
    let cols = ctx
        .spark()
        .witness
        .clone()
        .context("columns are independent, so γ is never infinite")?;
    let sub = null_space_basis(&a.select_columns(&cols), ctx.rank_tol())?;
    let w = sub.columns().first().context("witness columns are not dependent")?;
    let mut z = vec![0.0; a.cols()];
    for (&j, &v) in cols.iter().zip(w) {
        z[j] = v;
    }
    Ok(Certificate {
        z,
        support: SupportSet::new(cols, a.cols())?,
        theta_value: f64::INFINITY,
    })
}

fn cmd_gen(g: &Global, text: &str, unit_columns: bool) -> Result<()> {
    let mut spec = GeneratorSpec::parse(text, seed(g))?;
    if unit_columns {
        spec = spec.normalized();
    }
    let a = matgen::gen_matrix(&spec);
    let body = matgen::format_matrix(&a);
    match &g.out {
        Some(path) => std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{body}"),
    }
    Ok(())
}

const VERIFY_COLUMNS: Columns = &[
    ("suite", "suite"),
    ("trial", "trial"),
    ("seed", "seed"),
    ("property", "property"),
    ("margin", "margin"),
];

fn cmd_verify(g: &Global, name: &str, trials: Option<usize>, config: Option<&Path>, restarts: usize) -> Result<()> {
    let suites: Vec<Suite> = if name == "all" {
        Suite::ALL.to_vec()
    } else {
        vec![name.parse()?]
    };
    let scales = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(nsclab::Error::from)
                .with_context(|| format!("reading {}", path.display()))?;
            SuiteScales::parse(&text)?
        }
        None => SuiteScales::default(),
    };
    let est = EstimatorConfig {
        restarts,
        rank_tol: g.rank_tol,
        ..EstimatorConfig::default()
    };
    let mut out = sink(g, Format::Jsonl, VERIFY_COLUMNS)?;
    let mut failed = Vec::new();
    for suite in suites {
        let mut scale = scales.get(suite);
        if let Some(t) = trials {
            scale.trials = t;
        }
        if let Some(s) = g.seed {
            scale.seed = s;
        }
        let report = verify::run_suite(suite, scale, &est)?;
        for m in &report.margins {
            let mut r = Record::new();
            r.insert("op".into(), json!("verify_trial"));
            r.insert("suite".into(), json!(suite.name()));
            r.insert("trial".into(), json!(m.trial));
            r.insert("seed".into(), json!(m.seed));
            r.insert("property".into(), json!(m.property));
            r.insert("margin".into(), num(m.margin));
            out.write(&r)?;
        }
        if out.format() == Format::Jsonl {
            let mut r = Record::new();
            r.insert("op".into(), json!("verify"));
            r.insert("suite".into(), json!(suite.name()));
            r.insert("trials".into(), json!(report.trials));
            r.insert("seed".into(), json!(report.seed));
            r.insert("passed".into(), json!(report.passed()));
            r.insert("properties".into(), serde_json::to_value(&report.properties)?);
            r.insert("statuses".into(), serde_json::to_value(report.statuses)?);
            if g.timing {
                r.insert("ms".into(), json!(report.wall_ms));
            }
            out.write(&r)?;
        }
        for p in &report.properties {
            let verdict = if p.passed { "pass" } else { "FAIL" };
            eprintln!(
                "{suite}: {verdict} {} ({} checks, worst margin {:e})",
                p.name, p.checks, p.worst_margin
            );
            if let Some(f) = &p.first_failure {
                eprintln!("  first failure: {f}");
            }
        }
        failed.extend(report.failed_properties().into_iter().map(|p| format!("{suite}/{p}")));
    }
    out.finish()?;
    if !failed.is_empty() {
        bail!(PropertyFailure(format!("failing properties: {}", failed.join(", "))));
    }
    Ok(())
}
