//! Reference computations shared by the integration suites.
//!
//! Everything here is deliberately independent of the crate's own numerics:
//! null vectors come from nalgebra's SVD, supports are enumerated instead of
//! chosen by magnitude, and the p = 1 constant comes from vertex enumeration
//! rather than linear programming.
#![allow(dead_code)]

use nalgebra::DMatrix;
use nsclab::combinatorics::Combinations;
use nsclab::SensingMatrix;

pub fn to_na(a: &SensingMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.rows(), a.cols(), a.entries())
}

/// Orthonormal null-space basis from a full SVD (right singular vectors with
/// singular value below `tol × σ_max`).
pub fn svd_null_basis(a: &DMatrix<f64>, tol: f64) -> Vec<Vec<f64>> {
    let (m, n) = a.shape();
    // Pad to square so the SVD returns all n right singular vectors.
    let mut sq = DMatrix::zeros(n.max(m), n);
    sq.view_mut((0, 0), (m, n)).copy_from(a);
    let svd = sq.svd(false, true);
    let vt = svd.v_t.unwrap();
    let smax = svd.singular_values.max();
    (0..n)
        .filter(|&i| svd.singular_values[i] <= tol * smax)
        .map(|i| vt.row(i).iter().copied().collect())
        .collect()
}

/// θ with an explicit support, straight from the definition.
pub fn ratio(p: f64, z: &[f64], s: &[usize]) -> f64 {
    let scale = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let term = |v: f64| {
        if p == 0.0 {
            if v.abs() > 1e-9 * scale {
                1.0
            } else {
                0.0
            }
        } else {
            v.abs().powf(p)
        }
    };
    let (mut i, mut o) = (0.0, 0.0);
    for (j, &v) in z.iter().enumerate() {
        if s.contains(&j) {
            i += term(v)
        } else {
            o += term(v)
        }
    }
    if o == 0.0 {
        f64::INFINITY
    } else {
        i / o
    }
}

/// max over all #S = k of θ(p, z, S).
pub fn best_over_supports(p: f64, z: &[f64], k: usize) -> f64 {
    Combinations::new(z.len(), k)
        .map(|s| ratio(p, z, &s))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Closed form for a one-dimensional null space spanned by `z`.
pub fn d1_closed_form(p: f64, z: &[f64], k: usize) -> f64 {
    let mut mags: Vec<f64> = z.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let scale = mags[0];
    let term = |v: f64| {
        if p == 0.0 {
            if v > 1e-9 * scale {
                1.0
            } else {
                0.0
            }
        } else {
            v.powf(p)
        }
    };
    let top: f64 = mags[..k].iter().map(|&v| term(v)).sum();
    let rest: f64 = mags[k..].iter().map(|&v| term(v)).sum();
    top / rest
}

/// Null vector of A with the coordinates in `zeroed` forced to zero, when that
/// space is one-dimensional.
fn vertex(a: &DMatrix<f64>, zeroed: &[usize]) -> Option<Vec<f64>> {
    let (m, n) = a.shape();
    let mut aug = DMatrix::zeros(m + zeroed.len(), n);
    aug.view_mut((0, 0), (m, n)).copy_from(a);
    for (r, &i) in zeroed.iter().enumerate() {
        aug[(m + r, i)] = 1.0;
    }
    let basis = svd_null_basis(&aug, 1e-9);
    if basis.len() != 1 {
        return None;
    }
    let mut z = basis[0].clone();
    for &i in zeroed {
        z[i] = 0.0;
    }
    Some(z)
}

/// All rays of the null space with d − 1 forced zero coordinates.
pub fn vertices(a: &SensingMatrix) -> Vec<Vec<f64>> {
    let na = to_na(a);
    let d = svd_null_basis(&na, 1e-10).len();
    if d == 0 {
        return vec![];
    }
    Combinations::new(a.cols(), d - 1)
        .filter_map(|zeroed| vertex(&na, &zeroed))
        .collect()
}

/// γ(ℓ1, A, k) by vertex enumeration: the ratio is quasi-linear on each
/// orthant cone of the null space, so its maximum sits on an extreme ray.
pub fn l1_by_vertices(a: &SensingMatrix, k: usize) -> f64 {
    vertices(a)
        .iter()
        .map(|z| best_over_supports(1.0, z, k))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Sweep of a two-dimensional null space: `samples` uniform angles plus every
/// zero crossing of a coordinate, all supports enumerated.
pub fn d2_sweep(a: &SensingMatrix, p: f64, k: usize, samples: usize) -> f64 {
    let basis = svd_null_basis(&to_na(a), 1e-10);
    assert_eq!(basis.len(), 2, "sweep oracle needs a 2-d null space");
    let n = a.cols();
    let at = |t: f64| -> Vec<f64> {
        (0..n)
            .map(|i| t.cos() * basis[0][i] + t.sin() * basis[1][i])
            .collect()
    };
    let mut best = f64::NEG_INFINITY;
    for j in 0..samples {
        let t = std::f64::consts::PI * j as f64 / samples as f64;
        best = best.max(best_over_supports(p, &at(t), k));
    }
    for z in vertices(a) {
        best = best.max(best_over_supports(p, &z, k));
    }
    best
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
