use serde::{Deserialize, Serialize};

use super::exact::{nsc_exact_d1, nsc_exact_l1_enum, nsc_l0, EnumLimits};
use super::search::{angular_grid, multistart, AscentSettings, SearchOutcome};
use super::{Certificate, Diagnostics, Method, NscEstimate, NscQuery, Status, SupportSet};
use crate::error::{Error, Result};
use crate::linalg::{self, NullSpaceBasis, SensingMatrix};
use crate::spark::{self, SparkResult};

/// Which computation `nsc_estimate` may use.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathChoice {
    /// Exact paths where available, then the grid (d = 2) or multistart.
    #[default]
    Auto,
    /// Angular grid; requires a two-dimensional null space.
    Grid,
    /// Multistart ascent regardless of what exact paths exist. Infinite
    /// answers (k ≥ spark) are still reported as such.
    Multistart,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    pub restarts: usize,
    /// Grid angles per half circle on the d = 2 path.
    pub grid_points: usize,
    /// Local maxima of the grid refined by golden section.
    pub refine_cells: usize,
    /// Smoothing parameters ε used in turn by the ascent.
    pub eps_schedule: Vec<f64>,
    pub max_stage_iters: usize,
    pub seed: u64,
    /// Run the ascent once per support of size k instead of tracking top-k.
    pub exhaustive_supports: bool,
    /// Also score every point of the null space with d − 1 zero coordinates.
    pub vertex_seeds: bool,
    pub max_vertices: usize,
    pub path: PathChoice,
    /// Defaults to `1e-10 × max(M, N)`.
    pub rank_tol: Option<f64>,
    pub enum_limits: EnumLimits,
    pub spark_max_cols: usize,
    /// Stop sampling once some point scores at least this much. Used by
    /// threshold questions such as "is γ < 1?".
    pub stop_above: Option<f64>,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            restarts: 64,
            grid_points: 720,
            refine_cells: 8,
            eps_schedule: (0..10).map(|i| 10f64.powi(-i)).collect(),
            max_stage_iters: 200,
            seed: 0,
            exhaustive_supports: false,
            vertex_seeds: true,
            max_vertices: 20_000,
            path: PathChoice::Auto,
            rank_tol: None,
            enum_limits: EnumLimits::default(),
            spark_max_cols: spark::DEFAULT_MAX_COLS,
            stop_above: None,
        }
    }
}

impl EstimatorConfig {
    pub fn with_path(mut self, path: PathChoice) -> Self {
        self.path = path;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.grid_points < 8 || self.eps_schedule.is_empty() {
            return Err(Error::InvalidArgument(
                "restarts, grid_points and the smoothing schedule must be positive".into(),
            ));
        }
        if self.eps_schedule.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::InvalidArgument("smoothing parameters must be positive".into()));
        }
        Ok(())
    }
}

/// A matrix with its spark and null-space basis computed once, for repeated
/// queries.
#[derive(Debug, Clone)]
pub struct NscContext {
    matrix: SensingMatrix,
    rank_tol: f64,
    spark: SparkResult,
    basis: NullSpaceBasis,
    config: EstimatorConfig,
}

impl NscContext {
    pub fn new(a: &SensingMatrix, config: EstimatorConfig) -> Result<Self> {
        config.validate()?;
        let rank_tol = config.rank_tol.unwrap_or_else(|| a.default_rank_tol());
        let spark = spark::compute_spark(a, rank_tol, config.spark_max_cols)?;
        let basis = linalg::null_space_basis(a, rank_tol)?;
        Ok(Self {
            matrix: a.clone(),
            rank_tol,
            spark,
            basis,
            config,
        })
    }

    pub fn matrix(&self) -> &SensingMatrix {
        &self.matrix
    }

    pub fn spark(&self) -> &SparkResult {
        &self.spark
    }

    pub fn basis(&self) -> &NullSpaceBasis {
        &self.basis
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    pub fn estimate(&self, query: NscQuery) -> Result<NscEstimate> {
        self.estimate_with(query, &self.config)
    }

    /// Like [`estimate`](Self::estimate) with a per-call configuration; the
    /// spark and basis computed at construction are reused.
    pub fn estimate_with(&self, query: NscQuery, config: &EstimatorConfig) -> Result<NscEstimate> {
        config.validate()?;
        if query.k >= self.spark.spark {
            return Ok(NscEstimate::infinite(query));
        }
        let d = self.basis.dim();
        if d == 0 {
            return Ok(NscEstimate {
                query,
                value: 0.0,
                status: Status::Exact,
                certificate: None,
                method: Method::TrivialNullSpace,
                diagnostics: Diagnostics::default(),
            });
        }

        match config.path {
            PathChoice::Auto => {
                if query.p == 0.0 {
                    nsc_l0(&self.matrix, &self.spark, query, self.rank_tol)
                } else if d == 1 {
                    nsc_exact_d1(&self.basis, query)
                } else if query.p == 1.0 && config.enum_limits.admits(&self.basis) {
                    nsc_exact_l1_enum(&self.basis, query, config.enum_limits)
                } else if d == 2 {
                    Ok(self.grid(query, config))
                } else {
                    Ok(self.multistart(query, config))
                }
            }
            PathChoice::Grid => {
                if d != 2 {
                    return Err(Error::WrongDimension {
                        expected: 2,
                        found: d,
                    });
                }
                Ok(self.grid(query, config))
            }
            PathChoice::Multistart => Ok(self.multistart(query, config)),
        }
    }

    fn grid(&self, query: NscQuery, config: &EstimatorConfig) -> NscEstimate {
        let out = angular_grid(&self.basis, query, config.grid_points, config.refine_cells);
        let status = if out.resolved {
            Status::Exact
        } else {
            Status::LowerBound
        };
        finish(query, out, status, Method::AngularGrid, Diagnostics {
            grid_points: config.grid_points,
            ..Diagnostics::default()
        })
    }

    fn multistart(&self, query: NscQuery, config: &EstimatorConfig) -> NscEstimate {
        let settings = AscentSettings {
            restarts: config.restarts,
            eps_schedule: config.eps_schedule.clone(),
            max_stage_iters: config.max_stage_iters,
            seed: config.seed,
            exhaustive_supports: config.exhaustive_supports,
            vertex_seeds: config.vertex_seeds,
            max_vertices: config.max_vertices,
            stop_above: config.stop_above,
        };
        let out = multistart(&self.basis, query, &settings);
        finish(query, out, Status::LowerBound, Method::Multistart, Diagnostics {
            restarts: config.restarts,
            ..Diagnostics::default()
        })
    }
}

fn finish(
    query: NscQuery,
    out: SearchOutcome,
    status: Status,
    method: Method,
    mut diagnostics: Diagnostics,
) -> NscEstimate {
    diagnostics.evaluations = out.evaluations;
    diagnostics.iterations = out.iterations;
    let mut z = out.best.z;
    let norm = linalg::normalize(&mut z);
    debug_assert!(norm > 0.0);
    let theta_value = out.best.value;
    NscEstimate {
        query,
        value: theta_value,
        status,
        certificate: Some(Certificate {
            z,
            support: SupportSet::from_sorted(out.best.support),
            theta_value,
        }),
        method,
        diagnostics,
    }
}

/// γ(ℓp, A, k): exact where a closed form or enumeration applies, otherwise a
/// certified lower bound from search.
pub fn nsc_estimate(a: &SensingMatrix, query: NscQuery, config: &EstimatorConfig) -> Result<NscEstimate> {
    NscContext::new(a, config.clone())?.estimate(query)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm2;

    fn mat(rows: &[&[f64]]) -> SensingMatrix {
        SensingMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn counterexample() -> SensingMatrix {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        mat(&[&[h, h], &[h, h]])
    }

    #[test]
    fn routed_examples() {
        let cfg = EstimatorConfig::default();
        let e = nsc_estimate(&counterexample(), NscQuery::new(0.7, 1).unwrap(), &cfg).unwrap();
        assert!((e.value - 1.0).abs() < 1e-12);
        assert_eq!(e.status, Status::Exact);

        let e = nsc_estimate(&mat(&[&[1.0, 2.0]]), NscQuery::new(0.5, 1).unwrap(), &cfg).unwrap();
        assert!((e.value - 2f64.sqrt()).abs() < 1e-12);

        let a = mat(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 1.0]]);
        let e = nsc_estimate(&a, NscQuery::new(0.25, 1).unwrap(), &cfg).unwrap();
        assert!((e.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn infinite_when_k_reaches_spark() {
        let a = mat(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 1.0]]);
        let cfg = EstimatorConfig::default();
        for path in [PathChoice::Auto, PathChoice::Multistart] {
            let e = nsc_estimate(&a, NscQuery::new(0.5, 3).unwrap(), &cfg.clone().with_path(path)).unwrap();
            assert_eq!(e.status, Status::Infinite);
            assert!(e.certificate.is_none());
        }
    }

    #[test]
    fn full_column_rank_gives_zero() {
        let a = mat(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let e = nsc_estimate(&a, NscQuery::new(0.5, 2).unwrap(), &EstimatorConfig::default()).unwrap();
        assert_eq!((e.value, e.status), (0.0, Status::Exact));
        let e = nsc_estimate(&a, NscQuery::new(0.5, 3).unwrap(), &EstimatorConfig::default()).unwrap();
        assert_eq!(e.status, Status::Infinite);
    }

    #[test]
    fn grid_path_needs_two_dimensions() {
        let cfg = EstimatorConfig::default().with_path(PathChoice::Grid);
        assert!(matches!(
            nsc_estimate(&mat(&[&[1.0, 2.0]]), NscQuery::new(0.5, 1).unwrap(), &cfg),
            Err(Error::WrongDimension { .. })
        ));
    }

    #[test]
    fn certificates_attain_their_value() {
        let a = mat(&[&[1.0, 0.3, -0.7, 0.2], &[0.1, 1.0, 0.5, -0.4]]);
        for path in [PathChoice::Auto, PathChoice::Multistart] {
            let cfg = EstimatorConfig::default().with_path(path);
            let ctx = NscContext::new(&a, cfg).unwrap();
            for p in [0.0, 0.3, 1.0] {
                let q = NscQuery::new(p, 1).unwrap();
                let e = ctx.estimate(q).unwrap();
                let c = e.certificate.as_ref().unwrap();
                let chk = c.check(&a, p, q.zero_tol).unwrap();
                assert!((chk.norm - 1.0).abs() < 1e-9);
                assert!(chk.residual < 1e-9);
                assert!((chk.theta_value - e.value).abs() < 1e-9);
                assert!((c.theta_value - e.value).abs() < 1e-12);
                assert!(norm2(&c.z) > 0.0);
            }
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = EstimatorConfig {
            restarts: 0,
            ..EstimatorConfig::default()
        };
        assert!(NscContext::new(&counterexample(), cfg).is_err());
    }
}
