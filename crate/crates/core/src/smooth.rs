//! One-dimensional local linear regression with a Gaussian kernel.
//!
//! Fits are computed on a fixed grid and interpolated: levels by cubic
//! Hermite interpolation through the fitted slopes, slopes linearly. Several
//! responses sharing one regressor are smoothed in a single pass.

use alloc::vec::Vec;

#[allow(unused_imports)]
use crate::math::Float;
use crate::error::{Error, Result};

pub const GRID_POINTS: usize = 512;
/// Minimum Kish effective sample size at every grid point.
pub const MIN_EFFECTIVE_OBS: f64 = 10.0;
const CUTOFF: f64 = 8.0;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LocalLinear {
    lo: f64,
    hi: f64,
    h: f64,
    grid: Vec<f64>,
    /// `level[r][k]`, `slope[r][k]`: response `r` at grid point `k`.
    level: Vec<Vec<f64>>,
    slope: Vec<Vec<f64>>,
}

impl LocalLinear {
    /// Smooths every response in `ys` on `x` over `[lo, hi]`. When some grid
    /// point has fewer than [`MIN_EFFECTIVE_OBS`] effective observations the
    /// fit is retried once at bandwidth `2h`.
    pub fn fit(x: &[f64], ys: &[&[f64]], h: f64, range: (f64, f64)) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(crate::error::config("smoothing bandwidth must be positive"));
        }
        if ys.iter().any(|y| y.len() != x.len()) {
            return Err(crate::error::config("smoother responses and regressor differ in length"));
        }
        let mut order: Vec<usize> = (0..x.len()).collect();
        order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
        let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
        let sorted: Vec<Vec<f64>> = ys.iter().map(|y| order.iter().map(|&i| y[i]).collect()).collect();
        match Self::fit_sorted(&xs, &sorted, h, range) {
            Err(Error::Estimation(_)) => Self::fit_sorted(&xs, &sorted, 2.0 * h, range),
            r => r,
        }
    }

    fn fit_sorted(xs: &[f64], ys: &[Vec<f64>], h: f64, (lo, hi): (f64, f64)) -> Result<Self> {
        let m = if hi > lo { GRID_POINTS } else { 1 };
        let step = if m > 1 { (hi - lo) / (m - 1) as f64 } else { 0.0 };
        let grid: Vec<f64> = (0..m).map(|k| lo + step * k as f64).collect();
        let r = ys.len();
        let mut level = alloc::vec![Vec::with_capacity(m); r];
        let mut slope = alloc::vec![Vec::with_capacity(m); r];
        let mut t0 = alloc::vec![0.0; r];
        let mut t1 = alloc::vec![0.0; r];
        for &g in &grid {
            let a = xs.partition_point(|&v| v < g - CUTOFF * h);
            let b = xs.partition_point(|&v| v <= g + CUTOFF * h);
            let (mut s0, mut s1, mut s2, mut sw2) = (0.0, 0.0, 0.0, 0.0);
            t0.iter_mut().chain(t1.iter_mut()).for_each(|t| *t = 0.0);
            for i in a..b {
                let d = xs[i] - g;
                let t = d / h;
                let w = (-0.5 * t * t).exp();
                s0 += w;
                s1 += w * d;
                s2 += w * d * d;
                sw2 += w * w;
                for (k, y) in ys.iter().enumerate() {
                    t0[k] += w * y[i];
                    t1[k] += w * d * y[i];
                }
            }
            let n_eff = if sw2 > 0.0 { s0 * s0 / sw2 } else { 0.0 };
            let det = s0 * s2 - s1 * s1;
            if n_eff < MIN_EFFECTIVE_OBS || !(det > 1e-12 * s0 * s0 * h * h) {
                return Err(Error::Estimation(alloc::format!(
                    "only {n_eff:.1} effective observations near {g:.4} at bandwidth {h:.4}"
                )));
            }
            for k in 0..r {
                level[k].push((s2 * t0[k] - s1 * t1[k]) / det);
                slope[k].push((s0 * t1[k] - s1 * t0[k]) / det);
            }
        }
        Ok(LocalLinear { lo, hi, h, grid, level, slope })
    }

    /// Bandwidth actually used (`2h` after a retry).
    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn locate(&self, u: f64) -> (usize, f64) {
        let m = self.grid.len();
        if m == 1 {
            return (0, 0.0);
        }
        let step = (self.hi - self.lo) / (m - 1) as f64;
        let pos = ((u.clamp(self.lo, self.hi) - self.lo) / step).min((m - 1) as f64);
        let k = (pos.floor() as usize).min(m - 2);
        (k, pos - k as f64)
    }

    /// Fitted level of response `r` at `u` (clamped to the grid range).
    pub fn level(&self, r: usize, u: f64) -> f64 {
        let (k, t) = self.locate(u);
        let (lv, sl) = (&self.level[r], &self.slope[r]);
        if self.grid.len() == 1 {
            return lv[0] + sl[0] * (u - self.grid[0]);
        }
        let step = self.grid[k + 1] - self.grid[k];
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * lv[k] + h10 * step * sl[k] + h01 * lv[k + 1] + h11 * step * sl[k + 1]
    }

    /// Fitted slope of response `r` at `u`.
    pub fn slope(&self, r: usize, u: f64) -> f64 {
        if self.grid.len() == 1 {
            return self.slope[r][0];
        }
        let (k, t) = self.locate(u);
        let sl = &self.slope[r];
        sl[k] + t * (sl[k + 1] - sl[k])
    }
}
