//! Paths that return γ exactly: the ℓ0 closed form, one-dimensional null
//! spaces, and orthant-by-orthant linear programming at p = 1.

use serde::{Deserialize, Serialize};

use super::lp::{self, LpOutcome};
use super::{
    snap_zeros, theta, top_k_support, Certificate, Diagnostics, Method, NscEstimate, NscQuery,
    Status,
};
use crate::combinatorics::Combinations;
use crate::error::{Error, Result};
use crate::linalg::{self, norm2, NullSpaceBasis, SensingMatrix};
use crate::spark::SparkResult;

/// Size limits for [`nsc_exact_l1_enum`], which enumerates 2^(N−1) orthants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumLimits {
    pub max_n: usize,
    pub max_d: usize,
}

impl Default for EnumLimits {
    fn default() -> Self {
        Self { max_n: 12, max_d: 4 }
    }
}

impl EnumLimits {
    pub fn admits(&self, basis: &NullSpaceBasis) -> bool {
        basis.ambient() <= self.max_n && basis.dim() <= self.max_d
    }
}

fn exact(query: NscQuery, value: f64, certificate: Option<Certificate>, method: Method) -> NscEstimate {
    NscEstimate {
        query,
        value,
        status: Status::Exact,
        certificate,
        method,
        diagnostics: Diagnostics::default(),
    }
}

fn trivial(query: NscQuery) -> NscEstimate {
    exact(query, 0.0, None, Method::TrivialNullSpace)
}

/// γ(ℓ0, A, k) = k / (L + 1 − k) for k ≤ L, infinite beyond.
///
/// The certificate is the dependence among the spark witness columns, which
/// has exactly L+1 nonzeros, with S the k largest of them.
pub fn nsc_l0(
    a: &SensingMatrix,
    spark: &SparkResult,
    query: NscQuery,
    rank_tol: f64,
) -> Result<NscEstimate> {
    if query.p != 0.0 {
        return Err(Error::InvalidArgument(format!(
            "the ℓ0 closed form needs p = 0, got {}",
            query.p
        )));
    }
    let k = query.k;
    if k >= spark.spark {
        return Ok(NscEstimate::infinite(query));
    }
    let Some(witness) = &spark.witness else {
        return Ok(trivial(query));
    };
    let sub = a.select_columns(witness);
    let coeffs = linalg::null_space_basis(&sub, rank_tol)?;
    if coeffs.dim() != 1 {
        return Err(Error::NumericalInconsistency(format!(
            "spark witness has a {}-dimensional dependence space",
            coeffs.dim()
        )));
    }
    let mut z = vec![0.0; a.cols()];
    for (&j, &c) in witness.iter().zip(&coeffs.columns()[0]) {
        z[j] = c;
    }
    let support = top_k_support(&z, k);
    let theta_value = theta(0.0, &z, &support, query.zero_tol)?;
    let l = spark.l();
    let value = k as f64 / (l + 1 - k) as f64;
    if theta_value != value {
        return Err(Error::NumericalInconsistency(format!(
            "witness vector does not have {} nonzeros above zero_tol",
            l + 1
        )));
    }
    Ok(exact(
        query,
        value,
        Some(Certificate {
            z,
            support,
            theta_value,
        }),
        Method::L0ClosedForm,
    ))
}

/// Closed form for a one-dimensional null space: the single unit null vector
/// with its k largest magnitudes on top.
pub fn nsc_exact_d1(basis: &NullSpaceBasis, query: NscQuery) -> Result<NscEstimate> {
    if basis.dim() != 1 {
        return Err(Error::WrongDimension {
            expected: 1,
            found: basis.dim(),
        });
    }
    let mut z = basis.columns()[0].clone();
    snap_zeros(&mut z, query.zero_tol);
    let nonzeros = z.iter().filter(|v| **v != 0.0).count();
    if query.k >= nonzeros {
        return Ok(NscEstimate::infinite(query));
    }
    let support = top_k_support(&z, query.k);
    let theta_value = theta(query.p, &z, &support, query.zero_tol)?;
    Ok(exact(
        query,
        theta_value,
        Some(Certificate {
            z,
            support,
            theta_value,
        }),
        Method::D1ClosedForm,
    ))
}

/// Exact γ(ℓ1, A, k) by linear programming.
///
/// Inside the orthant {σᵢ zᵢ ≥ 0} with z = B·w, both sums of θ are linear in
/// w, and θ is scale free, so fixing the complement sum to 1 turns the
/// per-(orthant, S) maximization into
///
/// ```text
/// max Σ_{i∈S} sᵢ   s.t.   σᵢ (B·w)ᵢ − sᵢ = 0,   Σ_{i∉S} sᵢ = 1,   s ≥ 0.
/// ```
///
/// Only orthants that meet the null space are visited; the sign of the first
/// live coordinate is fixed since θ is even in z.
pub fn nsc_exact_l1_enum(
    basis: &NullSpaceBasis,
    query: NscQuery,
    limits: EnumLimits,
) -> Result<NscEstimate> {
    if query.p != 1.0 {
        return Err(Error::InvalidArgument(format!(
            "the enumeration path needs p = 1, got {}",
            query.p
        )));
    }
    let n = basis.ambient();
    let d = basis.dim();
    if n > limits.max_n {
        return Err(Error::TooLarge {
            what: "columns",
            size: n,
            limit: limits.max_n,
        });
    }
    if d > limits.max_d {
        return Err(Error::TooLarge {
            what: "null space dimension",
            size: d,
            limit: limits.max_d,
        });
    }
    if d == 0 {
        return Ok(trivial(query));
    }
    let k = query.k.min(n);

    // Coordinates that vanish on the whole null space never contribute.
    let rows: Vec<Vec<f64>> = (0..n).map(|i| basis.row(i)).collect();
    let live: Vec<usize> = (0..n).filter(|&i| norm2(&rows[i]) > query.zero_tol).collect();
    let nl = live.len();
    if nl == 0 {
        return Ok(trivial(query));
    }
    let nvars = 2 * d + nl;

    let constraint_rows = |sigma: &[f64]| -> Vec<Vec<f64>> {
        live.iter()
            .enumerate()
            .map(|(t, &i)| {
                let mut r = vec![0.0; nvars];
                for c in 0..d {
                    r[c] = sigma[t] * rows[i][c];
                    r[d + c] = -sigma[t] * rows[i][c];
                }
                r[2 * d + t] = -1.0;
                r
            })
            .collect()
    };

    let mut diagnostics = Diagnostics::default();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut zeros_rhs = vec![0.0; nl];
    zeros_rhs.push(1.0);

    for pattern in 0..(1u64 << (nl - 1)) {
        let sigma: Vec<f64> = (0..nl)
            .map(|t| {
                if t > 0 && (pattern >> (t - 1)) & 1 == 1 {
                    -1.0
                } else {
                    1.0
                }
            })
            .collect();
        let mut a = constraint_rows(&sigma);

        // Does the orthant meet the null space outside the origin?
        let mut total = vec![0.0; nvars];
        total[2 * d..].iter_mut().for_each(|v| *v = 1.0);
        a.push(total);
        diagnostics.linear_programs += 1;
        if !matches!(
            lp::maximize(&a, &zeros_rhs, &vec![0.0; nvars]),
            LpOutcome::Optimal { .. }
        ) {
            continue;
        }

        for support in Combinations::new(n, k) {
            let in_s: Vec<bool> = live.iter().map(|i| support.binary_search(i).is_ok()).collect();
            let last = a.last_mut().unwrap();
            let mut objective = vec![0.0; nvars];
            for t in 0..nl {
                last[2 * d + t] = if in_s[t] { 0.0 } else { 1.0 };
                objective[2 * d + t] = if in_s[t] { 1.0 } else { 0.0 };
            }
            diagnostics.linear_programs += 1;
            match lp::maximize(&a, &zeros_rhs, &objective) {
                LpOutcome::Optimal { x, pivots, .. } => {
                    diagnostics.iterations += pivots as u64;
                    let w: Vec<f64> = (0..d).map(|c| x[c] - x[d + c]).collect();
                    let mut z = basis.combine(&w);
                    for i in 0..n {
                        if live.binary_search(&i).is_err() {
                            z[i] = 0.0;
                        }
                    }
                    snap_zeros(&mut z, query.zero_tol);
                    if linalg::normalize(&mut z) == 0.0 {
                        continue;
                    }
                    let s = top_k_support(&z, k);
                    let value = theta(1.0, &z, &s, query.zero_tol)?;
                    diagnostics.evaluations += 1;
                    if best.as_ref().map_or(true, |(b, _)| value > *b) {
                        best = Some((value, z));
                    }
                }
                LpOutcome::Infeasible => {}
                LpOutcome::Unbounded => {
                    return Err(Error::NumericalInconsistency(
                        "unbounded orthant program: some null vector lives inside a k-support"
                            .into(),
                    ))
                }
                LpOutcome::PivotLimit => {
                    return Err(Error::NumericalInconsistency(
                        "simplex pivot limit reached".into(),
                    ))
                }
            }
        }
    }

    let (value, z) = best.ok_or_else(|| {
        Error::NumericalInconsistency("no orthant program was feasible".into())
    })?;
    let support = top_k_support(&z, k);
    if !value.is_finite() {
        return Err(Error::NumericalInconsistency(
            "a vertex of the null space is supported inside a k-support".into(),
        ));
    }
    let mut est = exact(
        query,
        value,
        Some(Certificate {
            z,
            support,
            theta_value: value,
        }),
        Method::L1Enumeration,
    );
    est.diagnostics = diagnostics;
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::null_space_basis;
    use crate::spark::compute_spark;

    fn mat(rows: &[&[f64]]) -> SensingMatrix {
        SensingMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    /// 3×4 matrix whose null space is spanned by [3, 1, 1, 1].
    pub(crate) fn d1_3111() -> SensingMatrix {
        mat(&[
            &[1.0, -3.0, 0.0, 0.0],
            &[1.0, 0.0, -3.0, 0.0],
            &[1.0, 0.0, 0.0, -3.0],
        ])
    }

    fn q(p: f64, k: usize) -> NscQuery {
        NscQuery::new(p, k).unwrap()
    }

    #[test]
    fn d1_closed_form_fixtures() {
        let b = null_space_basis(&d1_3111(), 1e-10).unwrap();
        let e = nsc_exact_d1(&b, q(0.5, 1)).unwrap();
        assert!((e.value - 3f64.sqrt() / 3.0).abs() < 1e-12);
        assert_eq!(e.status, Status::Exact);
        let e2 = nsc_exact_d1(&b, q(0.5, 2)).unwrap();
        assert!((e2.value - (3f64.sqrt() + 1.0) / 2.0).abs() < 1e-12);
        assert_eq!(nsc_exact_d1(&b, q(0.5, 4)).unwrap().status, Status::Infinite);

        let b = null_space_basis(&mat(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 1.0]]), 1e-10).unwrap();
        for p in [0.0, 0.25, 0.6, 1.0] {
            assert!((nsc_exact_d1(&b, q(p, 1)).unwrap().value - 0.5).abs() < 1e-12);
        }

        let b = null_space_basis(&mat(&[&[1.0, 2.0]]), 1e-10).unwrap();
        assert!((nsc_exact_d1(&b, q(1.0, 1)).unwrap().value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn d1_rejects_other_dimensions() {
        let b = null_space_basis(&mat(&[&[1.0, 1.0, 1.0]]), 1e-10).unwrap();
        assert_eq!(
            nsc_exact_d1(&b, q(0.5, 1)),
            Err(Error::WrongDimension {
                expected: 1,
                found: 2
            })
        );
    }

    #[test]
    fn l0_closed_form_and_certificate() {
        let a = d1_3111();
        let spark = compute_spark(&a, 1e-10, 24).unwrap();
        assert_eq!(spark.spark, 4);
        let e = nsc_l0(&a, &spark, q(0.0, 1), 1e-10).unwrap();
        assert_eq!(e.value, 1.0 / 3.0);
        let cert = e.certificate.unwrap();
        assert_eq!(cert.theta_value, e.value);
        assert!(norm2(&a.mul_vec(&cert.z)) < 1e-12);
        assert_eq!(nsc_l0(&a, &spark, q(0.0, 2), 1e-10).unwrap().value, 1.0);
        assert_eq!(
            nsc_l0(&a, &spark, q(0.0, 4), 1e-10).unwrap().status,
            Status::Infinite
        );
        assert!(nsc_l0(&a, &spark, q(0.5, 1), 1e-10).is_err());
    }

    #[test]
    fn l1_enum_fixtures() {
        let check = |a: &SensingMatrix, k: usize, want: f64| {
            let b = null_space_basis(a, 1e-10).unwrap();
            let e = nsc_exact_l1_enum(&b, q(1.0, k), EnumLimits::default()).unwrap();
            assert!((e.value - want).abs() < 1e-10, "{} vs {want}", e.value);
            let c = e.certificate.unwrap();
            assert!(norm2(&a.mul_vec(&c.z)) < 1e-10);
        };
        check(&mat(&[&[1.0, 2.0]]), 1, 2.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        check(&mat(&[&[h, h], &[h, h]]), 1, 1.0);
        check(&d1_3111(), 1, 1.0);
        check(&d1_3111(), 2, 2.0);
    }

    #[test]
    fn l1_enum_limits() {
        let b = null_space_basis(&SensingMatrix::new(1, 13, vec![1.0; 13]).unwrap(), 1e-10).unwrap();
        assert!(matches!(
            nsc_exact_l1_enum(&b, q(1.0, 1), EnumLimits::default()),
            Err(Error::TooLarge { .. })
        ));
        let b = null_space_basis(&SensingMatrix::new(1, 6, vec![1.0; 6]).unwrap(), 1e-10).unwrap();
        assert!(matches!(
            nsc_exact_l1_enum(&b, q(1.0, 1), EnumLimits::default()),
            Err(Error::TooLarge { .. })
        ));
    }
}
