//! Propensity score estimators: parametric logit, local polynomial and
//! series least squares. Every prediction is clamped to
//! `[trim_eps, 1 − trim_eps]`.

use crate::features::Var;
use crate::model::StructuralDgp;

mod cv;
mod local_poly;
mod logit;
mod series;

pub use cv::{cv_bandwidth, CvResult};
pub use local_poly::{fit_local_poly, EigenTrim, Kernel, LocalPolyFit, LocalPolyOptions};
pub use logit::{fit_logit, LogitFit, LogitOptions};
pub use series::{fit_series, BasisTerm, SeriesBasis, SeriesFit};

pub const DEFAULT_TRIM_EPS: f64 = 1e-3;

/// Anything that yields `p(x, z)`.
pub trait Propensity {
    fn propensity(&self, x: &[f64], z: &[f64]) -> f64;
}

impl Propensity for StructuralDgp {
    fn propensity(&self, x: &[f64], z: &[f64]) -> f64 {
        StructuralDgp::propensity(self, x, z)
    }
}

impl<T: Propensity + ?Sized> Propensity for &T {
    fn propensity(&self, x: &[f64], z: &[f64]) -> f64 {
        (**self).propensity(x, z)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum PropensityKind {
    Logit(LogitFit),
    LocalPoly(LocalPolyFit),
    Series(SeriesFit),
}

/// A fitted propensity model.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PropensityModel {
    pub fit: PropensityKind,
    pub trim_eps: f64,
}

impl PropensityModel {
    /// Prediction before clamping.
    pub fn raw(&self, x: &[f64], z: &[f64]) -> f64 {
        match &self.fit {
            PropensityKind::Logit(f) => f.predict(x, z),
            PropensityKind::LocalPoly(f) => f.predict(x, z),
            PropensityKind::Series(f) => f.predict(x, z),
        }
    }

    pub fn predict(&self, x: &[f64], z: &[f64]) -> f64 {
        let p = self.raw(x, z);
        let p = if p.is_nan() { 0.0 } else { p };
        p.clamp(self.trim_eps, 1.0 - self.trim_eps)
    }

    /// Warnings raised while fitting (logit separation).
    pub fn warnings(&self) -> alloc::vec::Vec<alloc::string::String> {
        match &self.fit {
            PropensityKind::Logit(f) if f.separation => {
                alloc::vec![alloc::string::String::from(
                    "perfect separation suspected; coefficients are ridge-penalized"
                )]
            }
            _ => alloc::vec::Vec::new(),
        }
    }
}

impl Propensity for PropensityModel {
    fn propensity(&self, x: &[f64], z: &[f64]) -> f64 {
        self.predict(x, z)
    }
}

pub(crate) fn check_trim(trim_eps: f64) -> crate::Result<()> {
    if !(0.0..0.5).contains(&trim_eps) {
        return Err(crate::error::config("trim_eps must lie in [0, 0.5)"));
    }
    Ok(())
}

/// Non-constant columns of `(x, z)` in the sample, `x` first.
pub fn varying_vars(sample: &crate::Sample) -> alloc::vec::Vec<Var> {
    let varies = |col: alloc::vec::Vec<f64>| col.iter().any(|v| *v != col[0]);
    let mut out = alloc::vec::Vec::new();
    for j in 0..sample.dx() {
        if varies(sample.x().column(j)) {
            out.push(Var::X(j));
        }
    }
    for k in 0..sample.dz() {
        if varies(sample.z().column(k)) {
            out.push(Var::Z(k));
        }
    }
    out
}
