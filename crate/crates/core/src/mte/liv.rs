use alloc::vec::Vec;

use super::{check_range, MarginalEffect};
#[allow(unused_imports)]
use crate::math::Float;
use crate::error::{config, Error, Result};
use crate::linalg::{solve_spd, NormalEquations, RowMatrix};

use crate::model::Sample;
use crate::propensity::Propensity;
use crate::stats::{quantile_sorted, std_dev};

pub const MIN_DISTINCT_PROPENSITIES: usize = 30;
const CUTOFF: f64 = 8.0;

/// Local instrumental variables: `g_Y(x̃, u) = E[Y | X̃ = x̃, p̂ = u]` by a
/// local linear smoother in `(x̃, u)`, `MTE` its `u`-slope. Integrals are
/// differences of fitted levels. Valid on the 2%–98% quantile range of `p̂`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LivMte {
    pub x_cols: Vec<usize>,
    pub bandwidth: f64,
    pub x_bandwidths: Vec<f64>,
    pub range: (f64, f64),
    /// Training data sorted by `p̂`.
    p: Vec<f64>,
    x: RowMatrix,
    y: Vec<f64>,
}

impl LivMte {
    /// `(g_Y, ∂g_Y/∂u)` at `(x, u)`.
    pub fn local_fit(&self, x: &[f64], u: f64) -> Result<(f64, f64)> {
        let m = self.x_cols.len();
        let hu = self.bandwidth;
        let a = self.p.partition_point(|&v| v < u - CUTOFF * hu);
        let b = self.p.partition_point(|&v| v <= u + CUTOFF * hu);
        let mut ne = NormalEquations::new(m + 2);
        let mut row = alloc::vec![0.0; m + 2];
        row[0] = 1.0;
        for i in a..b {
            let tu = (self.p[i] - u) / hu;
            let mut d2 = tu * tu;
            row[1] = tu;
            let xi = self.x.row(i);
            for k in 0..m {
                let t = (xi[k] - x[self.x_cols[k]]) / self.x_bandwidths[k];
                d2 += t * t;
                row[2 + k] = t;
            }
            if d2 > CUTOFF * CUTOFF {
                continue;
            }
            ne.add(&row, self.y[i], (-0.5 * d2).exp());
        }
        ne.finish();
        let beta = solve_spd(&ne.xtx, &ne.xty)
            .map_err(|_| Error::Estimation(alloc::format!("local IV fit is singular near u = {u:.4}")))?;
        Ok((beta[0], beta[1] / hu))
    }
}

impl MarginalEffect for LivMte {
    fn eval(&self, u: f64, x: &[f64], _z: &[f64]) -> Result<f64> {
        check_range(self.range, u, u)?;
        Ok(self.local_fit(x, u)?.1)
    }

    fn integrate(&self, x: &[f64], _z: &[f64], lo: f64, hi: f64) -> Result<f64> {
        check_range(self.range, lo, hi)?;
        if lo == hi {
            return Ok(0.0);
        }
        Ok(self.local_fit(x, hi)?.0 - self.local_fit(x, lo)?.0)
    }

    fn identified_range(&self, _x: &[f64], _z: &[f64]) -> (f64, f64) {
        self.range
    }

    fn conditional_mean(&self, x: &[f64], _z: &[f64], u: f64) -> Result<f64> {
        check_range(self.range, u, u)?;
        Ok(self.local_fit(x, u)?.0)
    }
}

/// Fits the local IV model. The `u` bandwidth is `bandwidth`; each
/// non-constant covariate gets `bandwidth · sd(x) / sd(p̂)`.
pub fn fit_liv_mte(sample: &Sample, p: &dyn Propensity, bandwidth: f64) -> Result<LivMte> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(config("local IV bandwidth must be positive"));
    }
    let n = sample.n();
    let ph: Vec<f64> = (0..n).map(|i| p.propensity(sample.x_row(i), sample.z_row(i))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| ph[a].total_cmp(&ph[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| ph[i]).collect();
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() < MIN_DISTINCT_PROPENSITIES {
        return Err(Error::Identification(alloc::format!(
            "only {} distinct propensity values (need {MIN_DISTINCT_PROPENSITIES}); \
             use the partially linear or polynomial MTE model instead",
            distinct.len()
        )));
    }
    let sp = std_dev(&ph);
    let x_cols: Vec<usize> = (0..sample.dx()).filter(|&j| std_dev(&sample.x().column(j)) > 0.0).collect();
    let x_bandwidths = x_cols.iter().map(|&j| bandwidth * std_dev(&sample.x().column(j)) / sp).collect();
    let mut x = RowMatrix::zeros(n, x_cols.len());
    for (r, &i) in order.iter().enumerate() {
        let xi = sample.x_row(i);
        for (c, &j) in x_cols.iter().enumerate() {
            x.set(r, c, xi[j]);
        }
    }
    Ok(LivMte {
        x_cols,
        bandwidth,
        x_bandwidths,
        range: (quantile_sorted(&sorted, 0.02), quantile_sorted(&sorted, 0.98)),
        p: sorted,
        x,
        y: order.iter().map(|&i| sample.y()[i]).collect(),
    })
}
