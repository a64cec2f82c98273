use alloc::string::String;
use alloc::vec::Vec;

use super::{check_range, MarginalEffect, PolyTheta};
#[allow(unused_imports)]
use crate::math::Float;
use crate::error::{config, Error, Result};
use crate::linalg::{collinear_columns, solve_spd, NormalEquations, RowMatrix};

use crate::model::Sample;
use crate::propensity::Propensity;

/// MTE polynomial in `u`:
/// `MTE(u, x) = x'(β1 − β0) + Σ_{j=2}^J j η_j u^{j−1}`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PolynomialMte {
    pub theta: PolyTheta,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl PolynomialMte {
    pub fn new(theta: PolyTheta) -> Self {
        PolynomialMte { theta }
    }

    /// Regressor names in the order of the stacked coefficients.
    pub fn column_names(dx: usize, j: usize) -> Vec<String> {
        let mut out = Vec::new();
        for k in 1..=dx {
            out.push(alloc::format!("(1-p)*x{k}"));
        }
        for k in 1..=dx {
            out.push(alloc::format!("p*x{k}"));
        }
        for e in 2..=j {
            out.push(alloc::format!("p^{e}"));
        }
        out
    }

    fn delta(&self, x: &[f64]) -> f64 {
        dot(x, &self.theta.beta1) - dot(x, &self.theta.beta0)
    }

    /// `sup_u |Σ j η_j u^{j−1}|` bounded by `Σ j |η_j|`, plus
    /// `Σ_k |β1_k − β0_k| · x_abs[k]`.
    pub fn bound(&self, x_abs: &[f64]) -> f64 {
        let lin: f64 = self.theta.beta1.iter().zip(&self.theta.beta0).zip(x_abs).map(|((a, b), s)| (a - b).abs() * s).sum();
        let poly: f64 = self.theta.eta.iter().enumerate().map(|(k, e)| (k + 2) as f64 * e.abs()).sum();
        lin + poly
    }
}

impl MarginalEffect for PolynomialMte {
    fn eval(&self, u: f64, x: &[f64], _z: &[f64]) -> Result<f64> {
        check_range((0.0, 1.0), u, u)?;
        let poly: f64 = self.theta.eta.iter().enumerate().map(|(k, e)| (k + 2) as f64 * e * u.powi(k as i32 + 1)).sum();
        Ok(self.delta(x) + poly)
    }

    fn integrate(&self, x: &[f64], _z: &[f64], lo: f64, hi: f64) -> Result<f64> {
        check_range((0.0, 1.0), lo, hi)?;
        let poly: f64 = self.theta.eta.iter().enumerate().map(|(k, e)| e * (hi.powi(k as i32 + 2) - lo.powi(k as i32 + 2))).sum();
        Ok((hi - lo) * self.delta(x) + poly)
    }

    fn identified_range(&self, _x: &[f64], _z: &[f64]) -> (f64, f64) {
        (0.0, 1.0)
    }

    fn conditional_mean(&self, x: &[f64], _z: &[f64], u: f64) -> Result<f64> {
        check_range((0.0, 1.0), u, u)?;
        let poly: f64 = self.theta.eta.iter().enumerate().map(|(k, e)| e * u.powi(k as i32 + 2)).sum();
        Ok((1.0 - u) * dot(x, &self.theta.beta0) + u * dot(x, &self.theta.beta1) + poly)
    }
}

/// Least squares of `Y` on `((1 − p̂)X, p̂X, p̂², …, p̂^J)`.
pub fn fit_polynomial_mte(sample: &Sample, p: &dyn Propensity, j: usize) -> Result<PolynomialMte> {
    if j < 2 {
        return Err(config("polynomial MTE needs J ≥ 2"));
    }
    let (n, dx) = (sample.n(), sample.dx());
    let k = 2 * dx + j - 1;
    if n <= k {
        return Err(config(alloc::format!("polynomial MTE with {k} regressors needs more than {k} rows")));
    }
    let mut w = RowMatrix::zeros(n, k);
    let mut ne = NormalEquations::new(k);
    for i in 0..n {
        let x = sample.x_row(i);
        let ph = p.propensity(x, sample.z_row(i));
        let row = w.row_mut(i);
        for c in 0..dx {
            row[c] = (1.0 - ph) * x[c];
            row[dx + c] = ph * x[c];
        }
        for e in 2..=j {
            row[2 * dx + e - 2] = ph.powi(e as i32);
        }
        ne.add(row, sample.y()[i], 1.0);
    }
    let bad = collinear_columns(&w.to_dmatrix());
    if !bad.is_empty() {
        return Err(Error::RankDeficient { columns: bad });
    }
    ne.finish();
    let b = solve_spd(&ne.xtx, &ne.xty).map_err(|_| Error::Estimation(String::from("polynomial MTE normal equations are singular")))?;
    Ok(PolynomialMte::new(PolyTheta {
        beta0: b.iter().take(dx).copied().collect(),
        beta1: b.iter().skip(dx).take(dx).copied().collect(),
        eta: b.iter().skip(2 * dx).copied().collect(),
    }))
}
