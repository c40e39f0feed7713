//! The null space constant γ(ℓp, A, k).
//!
//! γ is the largest value of the ratio
//!
//! ```text
//! θ(p, z, S) = Σ_{i∈S} |zᵢ|^p / Σ_{i∉S} |zᵢ|^p
//! ```
//!
//! over unit null vectors z of A and index sets S with #S ≤ k. For a fixed z
//! the best S is the k largest magnitudes, so every search below works with
//! `top_k_support` and only varies z.
//!
//! Values carry a [`Status`]: `Exact` when a closed form, an exhaustive
//! enumeration or a resolved one-dimensional search produced them, and
//! `LowerBound` when they come from sampling. Every reported value is attained
//! by its certificate, so a `LowerBound` never overshoots the true constant.

mod estimate;
mod exact;
mod lp;
mod search;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm2, norm_inf, SensingMatrix};

pub use estimate::{nsc_estimate, EstimatorConfig, NscContext, PathChoice};
pub use exact::{nsc_exact_d1, nsc_exact_l1_enum, nsc_l0, EnumLimits};

pub const DEFAULT_ZERO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NscQuery {
    pub p: f64,
    pub k: usize,
    /// Entries with |zᵢ| ≤ zero_tol·‖z‖∞ count as zero.
    pub zero_tol: f64,
}

impl NscQuery {
    pub fn new(p: f64, k: usize) -> Result<Self> {
        Self::with_zero_tol(p, k, DEFAULT_ZERO_TOL)
    }

    pub fn with_zero_tol(p: f64, k: usize, zero_tol: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("p must lie in [0, 1], got {p}")));
        }
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if !(zero_tol >= 0.0) {
            return Err(Error::InvalidArgument("zero_tol must be nonnegative".into()));
        }
        Ok(Self { p, k, zero_tol })
    }
}

/// Sorted set of distinct 0-based column indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SupportSet(Vec<usize>);

impl SupportSet {
    pub fn new(mut indices: Vec<usize>, n: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if indices.iter().any(|&i| i >= n) {
            return Err(Error::InvalidArgument(format!(
                "support index out of range for length {n}"
            )));
        }
        Ok(Self(indices))
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub(crate) fn from_sorted(indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        Self(indices)
    }
}

/// A unit null vector and a support attaining `theta_value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub z: Vec<f64>,
    pub support: SupportSet,
    pub theta_value: f64,
}

impl Certificate {
    /// Recomputes θ and the null-space residual against `a`.
    pub fn check(&self, a: &SensingMatrix, p: f64, zero_tol: f64) -> Result<CertificateCheck> {
        let theta_value = theta(p, &self.z, &self.support, zero_tol)?;
        Ok(CertificateCheck {
            norm: norm2(&self.z),
            residual: norm2(&a.mul_vec(&self.z)),
            theta_value,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateCheck {
    pub norm: f64,
    pub residual: f64,
    pub theta_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Exact,
    LowerBound,
    Infinite,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Exact => "exact",
            Status::LowerBound => "lower_bound",
            Status::Infinite => "infinite",
        })
    }
}

/// Which computation produced an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// k ≥ spark: some null vector is supported inside S.
    SparkBound,
    /// 𝒩(A) = {0}.
    TrivialNullSpace,
    L0ClosedForm,
    D1ClosedForm,
    L1Enumeration,
    AngularGrid,
    Multistart,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::SparkBound => "spark_bound",
            Method::TrivialNullSpace => "trivial_null_space",
            Method::L0ClosedForm => "l0_closed_form",
            Method::D1ClosedForm => "d1_closed_form",
            Method::L1Enumeration => "l1_enumeration",
            Method::AngularGrid => "angular_grid",
            Method::Multistart => "multistart",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub evaluations: u64,
    pub iterations: u64,
    pub restarts: usize,
    pub grid_points: usize,
    pub linear_programs: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NscEstimate {
    pub query: NscQuery,
    /// `f64::INFINITY` when the status is `Infinite`.
    pub value: f64,
    pub status: Status,
    pub certificate: Option<Certificate>,
    pub method: Method,
    pub diagnostics: Diagnostics,
}

impl NscEstimate {
    pub(crate) fn infinite(query: NscQuery) -> Self {
        Self {
            query,
            value: f64::INFINITY,
            status: Status::Infinite,
            certificate: None,
            method: Method::SparkBound,
            diagnostics: Diagnostics::default(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.status != Status::Infinite
    }
}

/// θ(p, z, S) with |zᵢ|⁰ = 1 exactly when |zᵢ| > zero_tol·‖z‖∞.
///
/// Returns +∞ when the complement sum vanishes but the support sum does not.
pub fn theta(p: f64, z: &[f64], support: &SupportSet, zero_tol: f64) -> Result<f64> {
    let scale = norm_inf(z);
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::ZeroVector);
    }
    Ok(theta_unchecked(p, z, support.indices(), zero_tol * scale))
}

/// θ without validation; `abs_zero` is the absolute zero threshold used at p = 0.
pub(crate) fn theta_unchecked(p: f64, z: &[f64], support: &[usize], abs_zero: f64) -> f64 {
    let mut inside = 0.0;
    let mut outside = 0.0;
    let mut s = support.iter().peekable();
    for (i, &v) in z.iter().enumerate() {
        let term = magnitude_pow(v, p, abs_zero);
        if s.peek() == Some(&&i) {
            s.next();
            inside += term;
        } else {
            outside += term;
        }
    }
    ratio(inside, outside)
}

#[inline]
pub fn magnitude_pow(v: f64, p: f64, abs_zero: f64) -> f64 {
    if p == 0.0 {
        if v.abs() > abs_zero {
            1.0
        } else {
            0.0
        }
    } else if p == 1.0 {
        v.abs()
    } else {
        v.abs().powf(p)
    }
}

#[inline]
fn ratio(inside: f64, outside: f64) -> f64 {
    if outside > 0.0 {
        inside / outside
    } else if inside > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Indices of the k largest |zᵢ|, ties broken toward the smaller index.
pub fn top_k_support(z: &[f64], k: usize) -> SupportSet {
    assert!(k <= z.len(), "k = {k} exceeds vector length {}", z.len());
    let mut idx = Vec::with_capacity(z.len());
    top_k_into(z, k, &mut idx);
    SupportSet::from_sorted(idx)
}

/// Allocation-reusing form of [`top_k_support`]; leaves the sorted indices in `out`.
pub(crate) fn top_k_into(z: &[f64], k: usize, out: &mut Vec<usize>) {
    out.clear();
    out.extend(0..z.len());
    out.sort_by(|&a, &b| z[b].abs().total_cmp(&z[a].abs()).then(a.cmp(&b)));
    out.truncate(k);
    out.sort_unstable();
}

/// Zero every entry with |zᵢ| ≤ zero_tol·‖z‖∞.
pub(crate) fn snap_zeros(z: &mut [f64], zero_tol: f64) {
    let cut = zero_tol * norm_inf(z);
    for v in z.iter_mut() {
        if v.abs() <= cut {
            *v = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(ix: &[usize], n: usize) -> SupportSet {
        SupportSet::new(ix.to_vec(), n).unwrap()
    }

    #[test]
    fn theta_fixtures() {
        for p in [0.0, 0.3, 1.0] {
            assert_eq!(theta(p, &[1.0, -1.0], &s(&[0], 2), 1e-9).unwrap(), 1.0);
        }
        assert_eq!(theta(1.0, &[2.0, -1.0], &s(&[0], 2), 1e-9).unwrap(), 2.0);
        assert_eq!(
            theta(0.0, &[3.0, 0.0, -1.0, 2.0], &s(&[0, 1], 4), 1e-9).unwrap(),
            0.5
        );
    }

    #[test]
    fn theta_edge_values() {
        assert_eq!(theta(0.5, &[1.0, 0.0], &s(&[0], 2), 1e-9).unwrap(), f64::INFINITY);
        assert_eq!(theta(0.5, &[0.0, 1.0], &s(&[0], 2), 1e-9).unwrap(), 0.0);
        assert_eq!(theta(0.5, &[0.0, 0.0], &s(&[0], 2), 1e-9), Err(Error::ZeroVector));
        // Below zero_tol relative to the max entry counts as zero at p = 0.
        assert_eq!(theta(0.0, &[1.0, 1e-12, 1.0], &s(&[0], 3), 1e-9).unwrap(), 1.0);
    }

    #[test]
    fn top_k_fixtures() {
        assert_eq!(top_k_support(&[3.0, 1.0, 1.0, 1.0], 1).indices(), &[0]);
        assert_eq!(top_k_support(&[1.0, -2.0, 2.0], 2).indices(), &[1, 2]);
        assert_eq!(top_k_support(&[1.0, 1.0], 1).indices(), &[0]);
        assert!(top_k_support(&[1.0, 1.0], 0).is_empty());
    }

    #[test]
    fn query_validation() {
        assert!(NscQuery::new(1.5, 1).is_err());
        assert!(NscQuery::new(-0.1, 1).is_err());
        assert!(NscQuery::new(0.5, 0).is_err());
        assert!(NscQuery::new(f64::NAN, 1).is_err());
        assert!(NscQuery::new(0.0, 3).is_ok());
    }

    #[test]
    fn support_set_normalizes() {
        assert_eq!(s(&[3, 1, 3], 4).indices(), &[1, 3]);
        assert!(SupportSet::new(vec![4], 4).is_err());
    }
}
