//! Row-major data matrix plus the small dense solves the estimators need.
//!
//! Factorizations are delegated to `nalgebra`; this module only adapts its
//! results to the error conventions of the crate.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Dense row-major matrix used for observed data and policy features.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RowMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl RowMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        RowMatrix { nrows, ncols, data: alloc::vec![0.0; nrows * ncols] }
    }

    pub fn from_vec(nrows: usize, ncols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != nrows * ncols {
            return Err(Error::Sample(alloc::format!(
                "matrix data has {} entries, expected {nrows}x{ncols}",
                data.len()
            )));
        }
        Ok(RowMatrix { nrows, ncols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * ncols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != ncols {
                return Err(Error::Sample(alloc::format!(
                    "row {i} has {} columns, expected {ncols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(RowMatrix { nrows: rows.len(), ncols, data })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.ncols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.ncols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.nrows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.nrows).map(move |i| self.row(i))
    }

    /// Keeps the listed rows, in order.
    pub fn select_rows(&self, idx: &[usize]) -> RowMatrix {
        let mut data = Vec::with_capacity(idx.len() * self.ncols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        RowMatrix { nrows: idx.len(), ncols: self.ncols, data }
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.nrows, self.ncols, &self.data)
    }
}

/// Accumulates `X'WX` and `X'Wy` one row at a time.
#[derive(Debug, Clone)]
pub(crate) struct NormalEquations {
    pub xtx: DMatrix<f64>,
    pub xty: DVector<f64>,
}

impl NormalEquations {
    pub fn new(k: usize) -> Self {
        NormalEquations { xtx: DMatrix::zeros(k, k), xty: DVector::zeros(k) }
    }

    pub fn add(&mut self, row: &[f64], y: f64, w: f64) {
        let k = row.len();
        for a in 0..k {
            let ra = w * row[a];
            if ra == 0.0 {
                continue;
            }
            self.xty[a] += ra * y;
            for b in a..k {
                self.xtx[(a, b)] += ra * row[b];
            }
        }
    }

    /// Mirrors the upper triangle into the lower one.
    pub fn finish(&mut self) {
        let k = self.xtx.nrows();
        for a in 0..k {
            for b in 0..a {
                self.xtx[(a, b)] = self.xtx[(b, a)];
            }
        }
    }
}

/// Solves a symmetric positive definite system by Cholesky.
pub(crate) fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite(alloc::format!("{}x{} system", a.nrows(), a.ncols())))?;
    Ok(chol.solve(b))
}

/// Smallest eigenvalue of a symmetric matrix.
pub(crate) fn lambda_min(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return f64::INFINITY;
    }
    let eig = SymmetricEigen::new(a.clone());
    eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Minimum-norm least-squares solution `A^+ b` via the SVD.
pub(crate) fn pinv_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let tol = smax * 1e-12 * (a.nrows().max(a.ncols()) as f64);
    svd.solve(b, tol).unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

/// Columns of `x` that are (numerically) linear combinations of earlier
/// columns, found by modified Gram–Schmidt on the column space.
pub(crate) fn collinear_columns(x: &DMatrix<f64>) -> Vec<usize> {
    let (n, k) = x.shape();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut bad = Vec::new();
    for j in 0..k {
        let mut v: DVector<f64> = x.column(j).into_owned();
        let norm0 = v.norm();
        for q in &basis {
            let c = q.dot(&v);
            v.axpy(-c, q, 1.0);
        }
        let norm = v.norm();
        if norm0 == 0.0 || norm <= 1e-9 * norm0.max(1e-300) || n == 0 {
            bad.push(j);
        } else {
            basis.push(v / norm);
        }
    }
    bad
}
