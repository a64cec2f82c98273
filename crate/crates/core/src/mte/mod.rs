//! Marginal treatment effect models: polynomial in the propensity,
//! semiparametric partially linear, and local instrumental variables.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::StructuralDgp;

mod liv;
mod partially_linear;
mod polynomial;

pub use liv::{fit_liv_mte, LivMte, MIN_DISTINCT_PROPENSITIES};
pub use partially_linear::{fit_partially_linear_mte, PartiallyLinearMte};
pub use polynomial::{fit_polynomial_mte, PolynomialMte};

/// A (fitted or true) MTE curve `u ↦ MTE(u, x)`. Models that condition on
/// extra instruments read them from `z`.
pub trait MarginalEffect {
    fn eval(&self, u: f64, x: &[f64], z: &[f64]) -> Result<f64>;

    /// Signed `∫_lo^hi MTE(u, x) du`.
    fn integrate(&self, x: &[f64], z: &[f64], lo: f64, hi: f64) -> Result<f64>;

    /// Interval of `u` on which the model is valid.
    fn identified_range(&self, x: &[f64], z: &[f64]) -> (f64, f64);

    /// `E[Y | X = x, p(X, Z) = u]`.
    fn conditional_mean(&self, x: &[f64], z: &[f64], u: f64) -> Result<f64>;
}

pub(crate) fn check_range(range: (f64, f64), lo: f64, hi: f64) -> Result<()> {
    let (a, b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    if a < range.0 - 1e-9 || b > range.1 + 1e-9 || a.is_nan() || b.is_nan() {
        return Err(Error::Extrapolation { lo: a, hi: b, range_lo: range.0, range_hi: range.1 });
    }
    Ok(())
}

impl MarginalEffect for StructuralDgp {
    fn eval(&self, u: f64, x: &[f64], _z: &[f64]) -> Result<f64> {
        check_range((0.0, 1.0), u, u)?;
        Ok(self.mte(u, x))
    }

    fn integrate(&self, x: &[f64], _z: &[f64], lo: f64, hi: f64) -> Result<f64> {
        check_range((0.0, 1.0), lo, hi)?;
        Ok(self.mte_integral(x, lo, hi))
    }

    fn identified_range(&self, _x: &[f64], _z: &[f64]) -> (f64, f64) {
        (0.0, 1.0)
    }

    fn conditional_mean(&self, x: &[f64], _z: &[f64], u: f64) -> Result<f64> {
        check_range((0.0, 1.0), u, u)?;
        Ok(StructuralDgp::conditional_mean(self, x, u))
    }
}

/// Coefficients of `E[Y | X = x, p] = (1 − p)x'β0 + p x'β1 + Σ_{j=2}^J η_j p^j`;
/// `eta[j − 2]` holds `η_j`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PolyTheta {
    pub beta0: Vec<f64>,
    pub beta1: Vec<f64>,
    pub eta: Vec<f64>,
}

impl PolyTheta {
    /// `(β0, β1, η)` stacked.
    pub fn stacked(&self) -> Vec<f64> {
        self.beta0.iter().chain(&self.beta1).chain(&self.eta).copied().collect()
    }

    pub fn j(&self) -> usize {
        self.eta.len() + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum MteModel {
    Polynomial(PolynomialMte),
    PartiallyLinear(PartiallyLinearMte),
    Liv(LivMte),
}

impl MteModel {
    fn inner(&self) -> &dyn MarginalEffect {
        match self {
            MteModel::Polynomial(m) => m,
            MteModel::PartiallyLinear(m) => m,
            MteModel::Liv(m) => m,
        }
    }
}

impl MarginalEffect for MteModel {
    fn eval(&self, u: f64, x: &[f64], z: &[f64]) -> Result<f64> {
        self.inner().eval(u, x, z)
    }

    fn integrate(&self, x: &[f64], z: &[f64], lo: f64, hi: f64) -> Result<f64> {
        self.inner().integrate(x, z, lo, hi)
    }

    fn identified_range(&self, x: &[f64], z: &[f64]) -> (f64, f64) {
        self.inner().identified_range(x, z)
    }

    fn conditional_mean(&self, x: &[f64], z: &[f64], u: f64) -> Result<f64> {
        self.inner().conditional_mean(x, z, u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;

    #[test]
    fn true_model_rejects_out_of_range() {
        let dgp = presets::canonical();
        assert!(MarginalEffect::eval(&dgp, 1.2, &[1.0, 0.5], &[]).is_err());
        assert!(matches!(dgp.integrate(&[1.0, 0.5], &[], 0.2, -0.1), Err(Error::Extrapolation { .. })));
        let a = dgp.integrate(&[1.0, 0.5], &[], 0.2, 0.7).unwrap();
        let b = dgp.integrate(&[1.0, 0.5], &[], 0.7, 0.2).unwrap();
        assert_eq!(a, -b);
    }
}
