use alloc::vec::Vec;

use super::{check_range, MarginalEffect};
use crate::error::{config, Result};
use crate::linalg::{solve_spd, NormalEquations};
use crate::model::Sample;
use crate::propensity::Propensity;
use crate::smooth::LocalLinear;

/// `E[Y | X̃ = x̃, p] = x̃'β0 + p x̃'(β1 − β0) + G(p)`, so
/// `MTE(u, x̃) = x̃'(β1 − β0) + G'(u)`. `X̃` holds the non-constant covariate
/// columns plus optional extra instrument columns; constants are absorbed
/// into `G`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PartiallyLinearMte {
    pub x_cols: Vec<usize>,
    pub z_cols: Vec<usize>,
    pub beta0: Vec<f64>,
    pub beta1: Vec<f64>,
    g: LocalLinear,
}

impl PartiallyLinearMte {
    fn tilde(&self, x: &[f64], z: &[f64]) -> impl Iterator<Item = f64> + '_ {
        let x: Vec<f64> = self.x_cols.iter().map(|&j| x[j]).chain(self.z_cols.iter().map(|&k| z[k])).collect();
        x.into_iter()
    }

    fn parts(&self, x: &[f64], z: &[f64]) -> (f64, f64) {
        let mut a0 = 0.0;
        let mut a1 = 0.0;
        for ((v, b0), b1) in self.tilde(x, z).zip(&self.beta0).zip(&self.beta1) {
            a0 += v * b0;
            a1 += v * b1;
        }
        (a0, a1)
    }

    /// Bandwidth of the `Ĝ` smoother (doubled if the first attempt was too sparse).
    pub fn bandwidth(&self) -> f64 {
        self.g.bandwidth()
    }

    pub fn g_level(&self, u: f64) -> f64 {
        self.g.level(0, u)
    }

    pub fn g_slope(&self, u: f64) -> f64 {
        self.g.slope(0, u)
    }
}

impl MarginalEffect for PartiallyLinearMte {
    fn eval(&self, u: f64, x: &[f64], z: &[f64]) -> Result<f64> {
        check_range(self.g.range(), u, u)?;
        let (a0, a1) = self.parts(x, z);
        Ok(a1 - a0 + self.g.slope(0, u))
    }

    fn integrate(&self, x: &[f64], z: &[f64], lo: f64, hi: f64) -> Result<f64> {
        check_range(self.g.range(), lo, hi)?;
        let (a0, a1) = self.parts(x, z);
        Ok((hi - lo) * (a1 - a0) + self.g.level(0, hi) - self.g.level(0, lo))
    }

    fn identified_range(&self, _x: &[f64], _z: &[f64]) -> (f64, f64) {
        self.g.range()
    }

    fn conditional_mean(&self, x: &[f64], z: &[f64], u: f64) -> Result<f64> {
        check_range(self.g.range(), u, u)?;
        let (a0, a1) = self.parts(x, z);
        Ok(u * a1 + (1.0 - u) * a0 + self.g.level(0, u))
    }
}

/// Double-residual (Robinson) regression: `Y` and the regressors
/// `(p̂X̃, (1 − p̂)X̃)` are smoothed on `p̂` by local linear regression, the
/// residuals give `(β̂1, β̂0)`, and `Ĝ` is the local linear fit of
/// `Y − p̂X̃'β̂1 − (1 − p̂)X̃'β̂0` on `p̂`. The identified range is the span of
/// `p̂` widened by half a bandwidth on each side, within `[0, 1]`.
pub fn fit_partially_linear_mte(
    sample: &Sample,
    p: &dyn Propensity,
    bandwidth: f64,
    extra_z: &[usize],
) -> Result<PartiallyLinearMte> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(config("partially linear MTE bandwidth must be positive"));
    }
    if let Some(k) = extra_z.iter().find(|&&k| k >= sample.dz()) {
        return Err(config(alloc::format!("extra instrument z{} does not exist", k + 1)));
    }
    let n = sample.n();
    let x_cols: Vec<usize> = (0..sample.dx())
        .filter(|&j| {
            let c = sample.x().column(j);
            c.iter().any(|v| *v != c[0])
        })
        .collect();
    let m = x_cols.len() + extra_z.len();
    let tilde = |i: usize| -> Vec<f64> {
        let (x, z) = (sample.x_row(i), sample.z_row(i));
        x_cols.iter().map(|&j| x[j]).chain(extra_z.iter().map(|&k| z[k])).collect()
    };
    let ph: Vec<f64> = (0..n).map(|i| p.propensity(sample.x_row(i), sample.z_row(i))).collect();
    let (pmin, pmax) = ph.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, &v| (a.0.min(v), a.1.max(v)));
    let range = ((pmin - 0.5 * bandwidth).max(0.0), (pmax + 0.5 * bandwidth).min(1.0));

    // Columns: Y, then p̂X̃ (β1), then (1 − p̂)X̃ (β0).
    let mut cols: Vec<Vec<f64>> = alloc::vec![Vec::with_capacity(n); 1 + 2 * m];
    for i in 0..n {
        cols[0].push(sample.y()[i]);
        for (k, v) in tilde(i).into_iter().enumerate() {
            cols[1 + k].push(ph[i] * v);
            cols[1 + m + k].push((1.0 - ph[i]) * v);
        }
    }
    let (beta1, beta0) = if m == 0 {
        (Vec::new(), Vec::new())
    } else {
        let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        let first = LocalLinear::fit(&ph, &refs, bandwidth, range)?;
        let mut ne = NormalEquations::new(2 * m);
        let mut row = alloc::vec![0.0; 2 * m];
        for i in 0..n {
            let ey = cols[0][i] - first.level(0, ph[i]);
            for c in 0..2 * m {
                row[c] = cols[1 + c][i] - first.level(1 + c, ph[i]);
            }
            ne.add(&row, ey, 1.0);
        }
        ne.finish();
        let b = solve_spd(&ne.xtx, &ne.xty)?;
        (b.iter().take(m).copied().collect(), b.iter().skip(m).copied().collect())
    };
    let resid: Vec<f64> = (0..n)
        .map(|i| {
            let t = tilde(i);
            let a1: f64 = t.iter().zip(&beta1).map(|(v, b)| v * b).sum();
            let a0: f64 = t.iter().zip(&beta0).map(|(v, b)| v * b).sum();
            sample.y()[i] - ph[i] * a1 - (1.0 - ph[i]) * a0
        })
        .collect();
    let g = LocalLinear::fit(&ph, &[&resid], bandwidth, range)?;
    Ok(PartiallyLinearMte { x_cols, z_cols: extra_z.to_vec(), beta0, beta1, g })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;

    #[test]
    fn linear_g_is_recovered_exactly() {
        let dgp = presets::canonical();
        let s = dgp.sample(3000, 11).unwrap();
        let y: Vec<f64> = (0..s.n())
            .map(|i| {
                let x2 = s.x_row(i)[1];
                let p = dgp.propensity(s.x_row(i), s.z_row(i));
                (1.0 - p) * 0.3 * x2 + p * 0.5 * x2 + 0.7 - 0.4 * p
            })
            .collect();
        let s = s.with_y(y).unwrap();
        let m = fit_partially_linear_mte(&s, &dgp, 0.05, &[]).unwrap();
        assert!((m.beta0[0] - 0.3).abs() < 1e-8 && (m.beta1[0] - 0.5).abs() < 1e-8);
        let (lo, hi) = m.identified_range(&[], &[]);
        for u in [lo, 0.3, 0.5, hi] {
            assert!((m.eval(u, &[1.0, 0.5], &[]).unwrap() - (0.1 - 0.4)).abs() < 1e-7);
        }
        let whole = m.integrate(&[1.0, 0.5], &[], lo, hi).unwrap();
        assert!((whole - (hi - lo) * (0.1 - 0.4)).abs() < 1e-7);
    }

    #[test]
    fn location_shift_moves_only_the_level() {
        let dgp = presets::canonical();
        let s = dgp.sample(4000, 12).unwrap();
        let a = fit_partially_linear_mte(&s, &dgp, 0.06, &[1]).unwrap();
        let shifted = s.with_y(s.y().iter().map(|y| y + 5.0).collect()).unwrap();
        let b = fit_partially_linear_mte(&shifted, &dgp, 0.06, &[1]).unwrap();
        for (u, v) in a.beta0.iter().zip(&b.beta0).chain(a.beta1.iter().zip(&b.beta1)) {
            assert!((u - v).abs() < 1e-8);
        }
        let (lo, hi) = a.identified_range(&[], &[]);
        let (x, z) = ([1.0, 0.4], [1.0, 1.5]);
        for (u1, u2) in [(lo, hi), (0.3, 0.6), (0.7, 0.2)] {
            let d = a.integrate(&x, &z, u1, u2).unwrap() - b.integrate(&x, &z, u1, u2).unwrap();
            assert!(d.abs() < 1e-8);
        }
        let lvl = b.conditional_mean(&x, &z, 0.5).unwrap() - a.conditional_mean(&x, &z, 0.5).unwrap();
        assert!((lvl - 5.0).abs() < 1e-8);
    }

    #[test]
    fn integral_is_additive_and_antisymmetric() {
        let dgp = presets::canonical();
        let s = dgp.sample(3000, 13).unwrap();
        let m = fit_partially_linear_mte(&s, &dgp, 0.06, &[]).unwrap();
        let x = [1.0, 0.2];
        let f = |a, b| m.integrate(&x, &[], a, b).unwrap();
        assert!((f(0.2, 0.4) + f(0.4, 0.65) - f(0.2, 0.65)).abs() < 1e-9);
        assert_eq!(f(0.3, 0.5), -f(0.5, 0.3));
        assert_eq!(f(0.3, 0.3), 0.0);
        assert!(m.integrate(&x, &[], 0.0, 1.0).is_err() || m.identified_range(&x, &[]) == (0.0, 1.0));
    }
}
