//! Dense linear-algebra kernel.
//!
//! Everything here works on small row-major matrices (desk scale, N ≤ 24), so
//! the routines are plain Householder factorizations with no blocking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where a matrix came from, when it was generated rather than loaded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    pub seed: u64,
}

/// Dense real `rows × cols` sensing matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
    provenance: Option<Provenance>,
}

impl SensingMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidMatrix(format!(
                "dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if entries.len() != rows * cols {
            return Err(Error::InvalidMatrix(format!(
                "expected {} entries for {rows}x{cols}, got {}",
                rows * cols,
                entries.len()
            )));
        }
        if let Some(pos) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix(format!(
                "non-finite entry at ({}, {})",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self {
            rows,
            cols,
            entries,
            provenance: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidMatrix("ragged rows".into()));
        }
        Self::new(m, n, rows.concat())
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "dimension mismatch in A·x");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// Submatrix made of the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> SensingMatrix {
        let mut entries = Vec::with_capacity(self.rows * cols.len());
        for i in 0..self.rows {
            for &j in cols {
                entries.push(self.get(i, j));
            }
        }
        SensingMatrix {
            rows: self.rows,
            cols: cols.len(),
            entries,
            provenance: None,
        }
    }

    pub fn transpose_entries(&self) -> Vec<f64> {
        let mut t = vec![0.0; self.entries.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[j * self.rows + i] = self.get(i, j);
            }
        }
        t
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn column_norms(&self) -> Vec<f64> {
        (0..self.cols).map(|j| norm2(&self.column(j))).collect()
    }

    /// Rank-tolerance default: `1e-10 × max(M, N)`.
    pub fn default_rank_tol(&self) -> f64 {
        default_rank_tol(self.rows, self.cols)
    }
}

pub fn default_rank_tol(rows: usize, cols: usize) -> f64 {
    1e-10 * rows.max(cols) as f64
}

/// Orthonormal basis of 𝒩(A), stored column by column (each column has length N).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullSpaceBasis {
    parent_rows: usize,
    parent_cols: usize,
    columns: Vec<Vec<f64>>,
}

impl NullSpaceBasis {
    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    /// Ambient length N of each basis vector.
    pub fn ambient(&self) -> usize {
        self.parent_cols
    }

    pub fn parent_dims(&self) -> (usize, usize) {
        (self.parent_rows, self.parent_cols)
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// z = B·w.
    pub fn combine(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.dim());
        let mut z = vec![0.0; self.parent_cols];
        for (col, &c) in self.columns.iter().zip(w) {
            axpy(c, col, &mut z);
        }
        z
    }

    /// w = Bᵀ·g.
    pub fn project(&self, g: &[f64]) -> Vec<f64> {
        self.columns.iter().map(|c| dot(c, g)).collect()
    }

    /// Row i of B, i.e. the linear functional w ↦ (B·w)ᵢ.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }
}

/// Column-pivoted Householder QR of a dense row-major `m × n` matrix.
#[derive(Debug, Clone)]
pub(crate) struct PivotedQr {
    m: usize,
    n: usize,
    /// Upper triangle holds R after factorization.
    r: Vec<f64>,
    reflectors: Vec<(Vec<f64>, f64)>,
    perm: Vec<usize>,
}

impl PivotedQr {
    pub(crate) fn new(m: usize, n: usize, data: &[f64]) -> Self {
        debug_assert_eq!(data.len(), m * n);
        let mut a = data.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let steps = m.min(n);
        let mut reflectors = Vec::with_capacity(steps);

        for j in 0..steps {
            // Pick the remaining column of largest norm; norms are recomputed
            // rather than downdated since the matrices are tiny.
            let (mut best, mut best_norm) = (j, -1.0);
            for c in j..n {
                let s: f64 = (j..m).map(|i| a[i * n + c] * a[i * n + c]).sum();
                if s > best_norm {
                    best = c;
                    best_norm = s;
                }
            }
            if best != j {
                for i in 0..m {
                    a.swap(i * n + j, i * n + best);
                }
                perm.swap(j, best);
            }

            let norm = best_norm.sqrt();
            if norm == 0.0 {
                reflectors.push((vec![0.0; m - j], 0.0));
                continue;
            }
            let x0 = a[j * n + j];
            let alpha = if x0 >= 0.0 { -norm } else { norm };
            let mut v: Vec<f64> = (j..m).map(|i| a[i * n + j]).collect();
            v[0] -= alpha;
            let vtv = dot(&v, &v);
            let beta = if vtv > 0.0 { 2.0 / vtv } else { 0.0 };

            for c in j..n {
                let s: f64 = v
                    .iter()
                    .enumerate()
                    .map(|(t, vt)| vt * a[(j + t) * n + c])
                    .sum();
                let f = beta * s;
                for (t, vt) in v.iter().enumerate() {
                    a[(j + t) * n + c] -= f * vt;
                }
            }
            // Clean the subdiagonal exactly.
            a[j * n + j] = alpha;
            for i in j + 1..m {
                a[i * n + j] = 0.0;
            }
            reflectors.push((v, beta));
        }

        Self {
            m,
            n,
            r: a,
            reflectors,
            perm,
        }
    }

    pub(crate) fn diag(&self) -> Vec<f64> {
        (0..self.m.min(self.n)).map(|j| self.r[j * self.n + j]).collect()
    }

    /// Number of pivots exceeding `rel_tol × |largest pivot|`.
    pub(crate) fn rank(&self, rel_tol: f64) -> usize {
        let d = self.diag();
        let Some(first) = d.first().map(|v| v.abs()) else {
            return 0;
        };
        if first == 0.0 {
            return 0;
        }
        d.iter().filter(|v| v.abs() > rel_tol * first).count()
    }

    /// Apply Q to a length-m vector in place: x ← Q·x.
    pub(crate) fn apply_q(&self, x: &mut [f64]) {
        for (j, (v, beta)) in self.reflectors.iter().enumerate().rev() {
            reflect(&mut x[j..], v, *beta);
        }
    }

    /// Apply Qᵀ to a length-m vector in place.
    pub(crate) fn apply_qt(&self, x: &mut [f64]) {
        for (j, (v, beta)) in self.reflectors.iter().enumerate() {
            reflect(&mut x[j..], v, *beta);
        }
    }

    /// Column c of the full m×m orthogonal factor.
    pub(crate) fn q_column(&self, c: usize) -> Vec<f64> {
        let mut e = vec![0.0; self.m];
        e[c] = 1.0;
        self.apply_q(&mut e);
        e
    }

    #[inline]
    pub(crate) fn r_at(&self, i: usize, j: usize) -> f64 {
        self.r[i * self.n + j]
    }

    pub(crate) fn perm(&self) -> &[usize] {
        &self.perm
    }
}

fn reflect(x: &mut [f64], v: &[f64], beta: f64) {
    if beta == 0.0 {
        return;
    }
    let f = beta * dot(v, &x[..v.len()]);
    for (xi, vi) in x.iter_mut().zip(v) {
        *xi -= f * vi;
    }
}

fn check_finite(a: &SensingMatrix) -> Result<()> {
    if a.entries.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidMatrix("non-finite entries".into()))
    }
}

/// Numerical rank: number of pivots of a column-pivoted QR of Aᵀ that exceed
/// `rank_tol × largest pivot`.
///
/// The factorization of Aᵀ is shared with [`null_space_basis`] so that
/// `dim 𝒩(A) = N − rank(A)` holds exactly.
pub fn rank(a: &SensingMatrix, rank_tol: f64) -> Result<usize> {
    check_finite(a)?;
    let qr = PivotedQr::new(a.cols, a.rows, &a.transpose_entries());
    Ok(qr.rank(rank_tol))
}

/// Orthonormal basis of the null space of `a`.
///
/// Built from the trailing columns of the full orthogonal factor of Aᵀ,
/// re-orthonormalized once, with each column's first nonzero coordinate made
/// positive.
pub fn null_space_basis(a: &SensingMatrix, rank_tol: f64) -> Result<NullSpaceBasis> {
    check_finite(a)?;
    let (m, n) = (a.rows, a.cols);
    let qr = PivotedQr::new(n, m, &a.transpose_entries());
    let r = qr.rank(rank_tol);
    let mut columns: Vec<Vec<f64>> = (r..n).map(|c| qr.q_column(c)).collect();
    orthonormalize(&mut columns);
    for col in &mut columns {
        canonical_sign(col);
    }
    Ok(NullSpaceBasis {
        parent_rows: m,
        parent_cols: n,
        columns,
    })
}

/// Modified Gram-Schmidt in place.
fn orthonormalize(cols: &mut [Vec<f64>]) {
    for i in 0..cols.len() {
        let (done, rest) = cols.split_at_mut(i);
        let c = &mut rest[0];
        for prev in done.iter() {
            let proj = dot(prev, c);
            axpy(-proj, prev, c);
        }
        let nrm = norm2(c);
        if nrm > 0.0 {
            c.iter_mut().for_each(|v| *v /= nrm);
        }
    }
}

/// Flip `v` so that its first coordinate of magnitude above 1e-10 is positive.
pub(crate) fn canonical_sign(v: &mut [f64]) {
    let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-10 * scale.max(1e-300)) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Minimizer of Σ wᵢ xᵢ² subject to A·x = y.
///
/// Solved as a minimum-norm problem in u = W^{1/2}x: with C = A·W^{-1/2},
/// factor Cᵀ = QR and back out u = Q·R⁻ᵀ·y. This avoids forming
/// A·W⁻¹·Aᵀ, whose condition number is the square of C's.
pub fn weighted_min_norm_solve(
    a: &SensingMatrix,
    y: &[f64],
    weights: &[f64],
    rank_tol: f64,
) -> Result<Vec<f64>> {
    check_finite(a)?;
    let (m, n) = (a.rows, a.cols);
    if y.len() != m || weights.len() != n {
        return Err(Error::InvalidArgument(format!(
            "expected y of length {m} and weights of length {n}"
        )));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::InvalidArgument(
            "weights must be finite and strictly positive".into(),
        ));
    }
    let d: Vec<f64> = weights.iter().map(|w| 1.0 / w.sqrt()).collect();
    // Cᵀ is n×m with Cᵀ[j][i] = A[i][j]·d[j].
    let mut ct = vec![0.0; n * m];
    for i in 0..m {
        for j in 0..n {
            ct[j * m + i] = a.get(i, j) * d[j];
        }
    }
    let qr = PivotedQr::new(n, m, &ct);
    if m > n || qr.rank(rank_tol) < m {
        return Err(Error::RankDeficient);
    }
    // Rᵀ v = P ᵀy (forward substitution).
    let perm = qr.perm();
    let mut v = vec![0.0; n];
    for i in 0..m {
        let mut s = y[perm[i]];
        for j in 0..i {
            s -= qr.r_at(j, i) * v[j];
        }
        v[i] = s / qr.r_at(i, i);
    }
    qr.apply_q(&mut v);
    Ok(v.iter().zip(&d).map(|(u, di)| u * di).collect())
}

/// Least-squares solution of min ‖A·x − y‖₂ for A with full column rank.
/// Returns `None` when A is column-rank deficient within `rank_tol`.
pub fn least_squares(a: &SensingMatrix, y: &[f64], rank_tol: f64) -> Option<Vec<f64>> {
    let (m, n) = (a.rows, a.cols);
    if n > m {
        return None;
    }
    let qr = PivotedQr::new(m, n, &a.entries);
    if qr.rank(rank_tol) < n {
        return None;
    }
    let mut qty = y.to_vec();
    qr.apply_qt(&mut qty);
    let mut xp = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = qty[i];
        for j in i + 1..n {
            s -= qr.r_at(i, j) * xp[j];
        }
        xp[i] = s / qr.r_at(i, i);
    }
    let mut x = vec![0.0; n];
    for (k, &p) in qr.perm().iter().enumerate() {
        x[p] = xp[k];
    }
    Some(x)
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn normalize(v: &mut [f64]) -> f64 {
    let n = norm2(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> SensingMatrix {
        SensingMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn assert_vec_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn rank_of_small_fixtures() {
        let id = mat(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        assert_eq!(rank(&id, 1e-10).unwrap(), 3);
        let rep = mat(&[&[1.0, 1.0], &[1.0, 1.0]]);
        assert_eq!(rank(&rep, 1e-10).unwrap(), 1);
        let zero = mat(&[&[0.0, 0.0]]);
        assert_eq!(rank(&zero, 1e-10).unwrap(), 0);
    }

    #[test]
    fn non_finite_entries_are_rejected() {
        assert!(matches!(
            SensingMatrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(Error::InvalidMatrix(_))
        ));
        assert!(SensingMatrix::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn null_space_of_one_by_two() {
        let a = mat(&[&[1.0, 2.0]]);
        let b = null_space_basis(&a, 1e-10).unwrap();
        assert_eq!(b.dim(), 1);
        let s5 = 5f64.sqrt();
        assert_vec_close(&b.columns()[0], &[2.0 / s5, -1.0 / s5], 1e-12);
    }

    #[test]
    fn null_space_of_two_by_three() {
        let a = mat(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 1.0]]);
        let b = null_space_basis(&a, 1e-10).unwrap();
        assert_eq!(b.dim(), 1);
        let s3 = 3f64.sqrt();
        assert_vec_close(&b.columns()[0], &[1.0 / s3, 1.0 / s3, -1.0 / s3], 1e-12);
    }

    #[test]
    fn invertible_matrix_has_trivial_null_space() {
        let a = mat(&[&[2.0, 1.0], &[1.0, 3.0]]);
        assert_eq!(null_space_basis(&a, 1e-10).unwrap().dim(), 0);
    }

    #[test]
    fn weighted_solve_fixtures() {
        let a = mat(&[&[1.0, 2.0]]);
        let x = weighted_min_norm_solve(&a, &[2.0], &[1.0, 1.0], 1e-10).unwrap();
        assert_vec_close(&x, &[0.4, 0.8], 1e-14);

        let x = weighted_min_norm_solve(&a, &[0.0], &[3.0, 0.5], 1e-10).unwrap();
        assert_vec_close(&x, &[0.0, 0.0], 0.0);

        let rows = mat(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
        let x = weighted_min_norm_solve(&rows, &[3.0, -2.0], &[0.1, 7.0, 2.0], 1e-10).unwrap();
        assert_vec_close(&x, &[3.0, -2.0, 0.0], 1e-14);
    }

    #[test]
    fn weighted_solve_detects_rank_deficiency() {
        let a = mat(&[&[1.0, 1.0], &[2.0, 2.0]]);
        assert_eq!(
            weighted_min_norm_solve(&a, &[1.0, 2.0], &[1.0, 1.0], 1e-10),
            Err(Error::RankDeficient)
        );
    }

    #[test]
    fn weights_must_be_positive() {
        let a = mat(&[&[1.0, 2.0]]);
        assert!(weighted_min_norm_solve(&a, &[1.0], &[1.0, 0.0], 1e-10).is_err());
    }

    #[test]
    fn least_squares_recovers_exact_solution() {
        let a = mat(&[&[1.0, 0.0], &[0.0, 2.0], &[1.0, 1.0]]);
        let x = least_squares(&a, &[1.0, 4.0, 3.0], 1e-10).unwrap();
        assert_vec_close(&x, &[1.0, 2.0], 1e-12);
    }
}
