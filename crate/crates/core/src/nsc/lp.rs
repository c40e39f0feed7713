//! Dense two-phase simplex for the tiny linear programs of the p = 1 path.
//!
//! Problems have at most a few dozen columns, so the tableau is dense and
//! reduced costs are recomputed from scratch every iteration. Bland's rule
//! (lowest index enters, lowest basic index leaves on ratio ties) rules out
//! cycling on the heavily degenerate orthant constraints.

const PIVOT_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64, pivots: usize },
    Infeasible,
    Unbounded,
    PivotLimit,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    width: usize,
    pivots: usize,
}

enum Phase {
    Optimal,
    Unbounded,
    PivotLimit,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.width]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let pv = self.rows[r][c];
        self.rows[r].iter_mut().for_each(|v| *v /= pv);
        let prow = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pr) in row.iter_mut().zip(&prow) {
                    *v -= f * pr;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    fn objective(&self, cost: &[f64]) -> f64 {
        self.basis
            .iter()
            .enumerate()
            .map(|(i, &b)| cost[b] * self.rhs(i))
            .sum()
    }

    /// Maximize `cost·x` over columns `< allowed`.
    fn run(&mut self, cost: &[f64], allowed: usize) -> Phase {
        loop {
            if self.pivots >= MAX_PIVOTS {
                return Phase::PivotLimit;
            }
            let entering = (0..allowed).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let reduced = cost[j]
                    - self
                        .basis
                        .iter()
                        .enumerate()
                        .map(|(i, &b)| cost[b] * self.rows[i][j])
                        .sum::<f64>();
                reduced > PIVOT_TOL
            });
            let Some(j) = entering else {
                return Phase::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][j];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - PIVOT_TOL
                                || (ratio <= lr + PIVOT_TOL && self.basis[i] < self.basis[li])
                            {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, j),
                None => return Phase::Unbounded,
            }
        }
    }
}

/// Maximize `c·x` subject to `A·x = b`, `x ≥ 0`.
pub(crate) fn maximize(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> LpOutcome {
    let m = a.len();
    let n = c.len();
    debug_assert!(a.iter().all(|r| r.len() == n) && b.len() == m);

    // Columns: originals, one artificial per row, then the right-hand side.
    let width = n + m;
    let rows: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .enumerate()
        .map(|(i, (row, &bi))| {
            let sign = if bi < 0.0 { -1.0 } else { 1.0 };
            let mut r: Vec<f64> = row.iter().map(|v| sign * v).collect();
            r.extend((0..m).map(|t| if t == i { 1.0 } else { 0.0 }));
            r.push(sign * bi);
            r
        })
        .collect();
    let mut t = Tableau {
        rows,
        basis: (n..n + m).collect(),
        width,
        pivots: 0,
    };

    let mut phase1 = vec![0.0; width];
    phase1[n..].iter_mut().for_each(|v| *v = -1.0);
    match t.run(&phase1, width) {
        Phase::Optimal => {}
        Phase::Unbounded => unreachable!("phase one is bounded by construction"),
        Phase::PivotLimit => return LpOutcome::PivotLimit,
    }
    if t.objective(&phase1) < -FEAS_TOL {
        return LpOutcome::Infeasible;
    }
    // Drive remaining artificials out of the basis where possible; rows where
    // that fails are redundant and keep a zero-valued artificial.
    for i in 0..m {
        if t.basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| !t.basis.contains(&j) && t.rows[i][j].abs() > 1e-9) {
                t.pivot(i, j);
            }
        }
    }

    let mut phase2 = c.to_vec();
    phase2.resize(width, 0.0);
    match t.run(&phase2, n) {
        Phase::Optimal => {}
        Phase::Unbounded => return LpOutcome::Unbounded,
        Phase::PivotLimit => return LpOutcome::PivotLimit,
    }
    let mut x = vec![0.0; n];
    for (i, &bcol) in t.basis.iter().enumerate() {
        if bcol < n {
            x[bcol] = t.rhs(i);
        }
    }
    let value = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    LpOutcome::Optimal {
        x,
        value,
        pivots: t.pivots,
    }
}
