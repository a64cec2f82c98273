use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::RowMatrix;

/// Observed records `(Y, D, X, Z)`, plus the latent selection draw `U` when
/// the sample was simulated. Estimators never read `latent_u`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    y: Vec<f64>,
    d: Vec<f64>,
    x: RowMatrix,
    z: RowMatrix,
    latent_u: Option<Vec<f64>>,
}

impl Sample {
    pub fn new(y: Vec<f64>, d: Vec<f64>, x: RowMatrix, z: RowMatrix, latent_u: Option<Vec<f64>>) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::Sample("sample is empty".into()));
        }
        if d.len() != n || x.nrows() != n || z.nrows() != n {
            return Err(Error::Sample(alloc::format!(
                "column lengths differ: y {n}, d {}, x {}, z {}",
                d.len(),
                x.nrows(),
                z.nrows()
            )));
        }
        if z.ncols() == 0 {
            return Err(Error::Sample("at least one instrument column is required".into()));
        }
        if let Some(i) = d.iter().position(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Sample(alloc::format!("d[{i}] = {} is not binary", d[i])));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::Sample(alloc::format!("y[{i}] is not finite")));
        }
        for (name, m) in [("x", &x), ("z", &z)] {
            if let Some(k) = m.as_slice().iter().position(|v| !v.is_finite()) {
                return Err(Error::Sample(alloc::format!("{name} row {} is not finite", k / m.ncols())));
            }
        }
        if let Some(u) = &latent_u {
            if u.len() != n {
                return Err(Error::Sample("latent_u length differs from y".into()));
            }
            if let Some(i) = u.iter().position(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Sample(alloc::format!("latent_u[{i}] outside [0, 1]")));
            }
        }
        Ok(Sample { y, d, x, z, latent_u })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn dx(&self) -> usize {
        self.x.ncols()
    }

    pub fn dz(&self) -> usize {
        self.z.ncols()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn x(&self) -> &RowMatrix {
        &self.x
    }

    pub fn z(&self) -> &RowMatrix {
        &self.z
    }

    pub fn x_row(&self, i: usize) -> &[f64] {
        self.x.row(i)
    }

    pub fn z_row(&self, i: usize) -> &[f64] {
        self.z.row(i)
    }

    pub fn latent_u(&self) -> Option<&[f64]> {
        self.latent_u.as_deref()
    }

    /// Rows `idx`, in order.
    pub fn subset(&self, idx: &[usize]) -> Sample {
        Sample {
            y: idx.iter().map(|&i| self.y[i]).collect(),
            d: idx.iter().map(|&i| self.d[i]).collect(),
            x: self.x.select_rows(idx),
            z: self.z.select_rows(idx),
            latent_u: self.latent_u.as_ref().map(|u| idx.iter().map(|&i| u[i]).collect()),
        }
    }

    /// Same records with the outcome replaced.
    pub fn with_y(&self, y: Vec<f64>) -> Result<Sample> {
        Sample::new(y, self.d.clone(), self.x.clone(), self.z.clone(), self.latent_u.clone())
    }

    /// Drops the latent draw, as if the data had been read from disk.
    pub fn observed(mut self) -> Sample {
        self.latent_u = None;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> RowMatrix {
        RowMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn rejects_non_binary_treatment() {
        let e = Sample::new(alloc::vec![1.0, 2.0], alloc::vec![0.0, 0.5], m(&[&[1.0], &[1.0]]), m(&[&[0.0], &[1.0]]), None);
        assert!(matches!(e, Err(Error::Sample(_))));
    }

    #[test]
    fn rejects_ragged_columns() {
        let e = Sample::new(alloc::vec![1.0], alloc::vec![0.0, 1.0], m(&[&[1.0], &[1.0]]), m(&[&[0.0], &[1.0]]), None);
        assert!(e.is_err());
    }

    #[test]
    fn subset_keeps_rows() {
        let s = Sample::new(
            alloc::vec![1.0, 2.0, 3.0],
            alloc::vec![0.0, 1.0, 1.0],
            m(&[&[1.0], &[2.0], &[3.0]]),
            m(&[&[4.0], &[5.0], &[6.0]]),
            Some(alloc::vec![0.1, 0.2, 0.3]),
        )
        .unwrap();
        let t = s.subset(&[2, 0]);
        assert_eq!(t.y(), &[3.0, 1.0]);
        assert_eq!(t.z_row(0), &[6.0]);
        assert_eq!(t.latent_u().unwrap(), &[0.3, 0.1]);
    }
}
