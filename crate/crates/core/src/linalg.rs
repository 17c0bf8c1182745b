//! Dense linear algebra on top of nalgebra: complex determinants, the real
//! matrix exponential, and a sparse generator for exponential actions.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// Determinant of a row-major `n x n` complex matrix via partially pivoted LU.
pub fn det(entries: &[C64], n: usize) -> C64 {
    assert_eq!(entries.len(), n * n);
    if n == 0 {
        return C64::new(1.0, 0.0);
    }
    DMatrix::from_row_slice(n, n, entries).lu().determinant()
}

/// `det(I + A)` for a row-major matrix `A`.
pub fn det_i_plus(a: &[C64], n: usize) -> C64 {
    let mut m = a.to_vec();
    for i in 0..n {
        m[i * n + i] += 1.0;
    }
    det(&m, n)
}

/// Real dense matrix exponential (scaling and squaring with Padé approximants).
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.exp()
}

/// Sparse matrix in compressed-row form, used for Markov generators.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from per-row `(col, val)` lists; duplicates are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in r {
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        SparseMatrix { n, row_ptr, cols, vals }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .map(|k| self.vals[k] * x[self.cols[k]])
                    .sum()
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.cols[k])] += self.vals[k];
            }
        }
        m
    }

    /// Largest `|L_ii|`.
    pub fn max_abs_diag(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.cols[k] == i {
                    m = m.max(self.vals[k].abs());
                }
            }
        }
        m
    }
}

/// `exp(tL) h` for a (sub-)generator `L` (nonnegative off-diagonal entries,
/// nonpositive row sums) by uniformization: `exp(tL) = e^{-Λt} Σ (Λt)^j P^j / j!`
/// with `P = I + L/Λ` entrywise nonnegative. Terms are summed until the
/// remaining Poisson mass falls below `tol`. The time interval is split so that
/// `Λt` stays moderate and the Poisson weights never underflow.
pub fn expm_action_uniformized(l: &SparseMatrix, h: &[f64], t: f64, tol: f64) -> Vec<f64> {
    assert!(t >= 0.0);
    let lambda = l.max_abs_diag().max(1e-300);
    let steps = ((lambda * t) / 50.0).ceil().max(1.0) as usize;
    let dt = t / steps as f64;
    let lt = lambda * dt;
    let mut v = h.to_vec();
    for _ in 0..steps {
        let mut term = v.clone();
        let mut weight = (-lt).exp();
        let mut acc: Vec<f64> = term.iter().map(|x| x * weight).collect();
        let mut mass = weight;
        let mut j = 0usize;
        while 1.0 - mass > tol && j < 10_000 {
            j += 1;
            let lv = l.mul_vec(&term);
            for (tv, lvv) in term.iter_mut().zip(lv) {
                *tv += lvv / lambda;
            }
            weight *= lt / j as f64;
            mass += weight;
            for (a, tv) in acc.iter_mut().zip(&term) {
                *a += weight * tv;
            }
        }
        v = acc;
    }
    v
}
