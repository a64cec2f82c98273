//! Per-row welfare gains, Table-1-style reports, doubly robust scores and
//! the binary-instrument variants.

use alloc::vec::Vec;

use crate::error::{config, Error, Result};
use crate::features::FeatureSpec;
use crate::linalg::RowMatrix;
use crate::model::{Manipulation, ManipulationPair, Sample};
use crate::mte::MarginalEffect;
use crate::propensity::Propensity;

mod binary;
mod dr;

pub use binary::{binary_iv_welfare, rationed_welfare, BinaryIvWelfare, RationedWelfare};
pub use dr::{
    dr_scores, fold_assignment, DrScoreSet, EstimatedNuisances, FittedNuisances, GChoice, GSource, KernelRatio,
    MteChoice, NuisanceProvider, OracleNuisances, DEFAULT_FOLDS, DEFAULT_G_MAX,
};

/// Unit cost of an encouragement.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum CostKind {
    /// `C = |α(z1) − z1|`, e.g. the subsidy actually paid.
    ManipulationGap,
    Constant { c: f64 },
    /// One cost per data row, shared by both arms.
    Table { values: Vec<f64> },
}

/// Cost model and budget cap `κ`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CostSpec {
    pub kind: CostKind,
    pub kappa: f64,
}

impl CostSpec {
    pub fn manipulation_gap(kappa: f64) -> Self {
        CostSpec { kind: CostKind::ManipulationGap, kappa }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa >= 0.0) {
            return Err(config("budget cap kappa must be non-negative"));
        }
        match &self.kind {
            CostKind::Constant { c } if !(*c >= 0.0 && c.is_finite()) => {
                Err(config("costs must be finite and non-negative"))
            }
            CostKind::Table { values } if values.iter().any(|c| !(*c >= 0.0 && c.is_finite())) => {
                Err(config("cost table entries must be finite and non-negative"))
            }
            _ => Ok(()),
        }
    }

    /// Cost of giving manipulation `arm` to a unit with status-quo `z`.
    pub fn unit_cost(&self, arm: &Manipulation, z: &[f64], row: Option<usize>) -> Result<f64> {
        match &self.kind {
            CostKind::ManipulationGap => Ok((arm.apply(z[0]) - z[0]).abs()),
            CostKind::Constant { c } => Ok(*c),
            CostKind::Table { values } => {
                let i = row.ok_or_else(|| config("a cost table needs data rows"))?;
                values.get(i).copied().ok_or_else(|| config(alloc::format!("cost table has no row {i}")))
            }
        }
    }
}

/// Everything the optimizers consume: `g_i = ∫_{p̂0_i}^{p̂1_i} MTÊ(u, x_i) du`,
/// `c_{d,i} = C_d(x_i, z_i)·p̂_{d,i}` and the policy features `v_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainVector {
    pub g: Vec<f64>,
    pub p0: Vec<f64>,
    pub p1: Vec<f64>,
    pub c0: Vec<f64>,
    pub c1: Vec<f64>,
    pub v: RowMatrix,
    pub features: FeatureSpec,
    pub pair: ManipulationPair,
}

impl GainVector {
    pub fn n(&self) -> usize {
        self.g.len()
    }

    /// `Ŵ(π) = mean(π_i g_i)`, the welfare contrast against `α0` for all.
    pub fn welfare(&self, labels: &[bool]) -> f64 {
        self.g.iter().zip(labels).filter(|(_, &l)| l).map(|(g, _)| g).sum::<f64>() / self.n() as f64
    }

    /// `B̂(π) = mean(π_i c1_i + (1 − π_i) c0_i)`.
    pub fn budget(&self, labels: &[bool]) -> f64 {
        let s: f64 = (0..self.n()).map(|i| if labels[i] { self.c1[i] } else { self.c0[i] }).sum();
        s / self.n() as f64
    }

    pub fn labels(&self, rule: &crate::policy::Rule) -> Vec<bool> {
        self.v.rows().map(|r| rule.assign(r)).collect()
    }

    /// Same rows with every gain multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> GainVector {
        let mut out = self.clone();
        for g in &mut out.g {
            *g *= factor;
        }
        out
    }
}

/// Builds gains for every row of a sample.
pub fn build_gains(
    sample: &Sample,
    p: &dyn Propensity,
    mte: &dyn MarginalEffect,
    pair: &ManipulationPair,
    cost: &CostSpec,
    features: &FeatureSpec,
) -> Result<GainVector> {
    build_gains_xz(sample.x(), sample.z(), p, mte, pair, cost, features)
}

/// [`build_gains`] on bare `(x, z)` rows. Rows whose shifted margin leaves
/// the identified range of the MTE model are collected and reported
/// together; nothing is clamped.
pub fn build_gains_xz(
    x: &RowMatrix,
    z: &RowMatrix,
    p: &dyn Propensity,
    mte: &dyn MarginalEffect,
    pair: &ManipulationPair,
    cost: &CostSpec,
    features: &FeatureSpec,
) -> Result<GainVector> {
    cost.validate()?;
    features.check_dims(x.ncols(), z.ncols())?;
    let n = x.nrows();
    if let CostKind::Table { values } = &cost.kind {
        if values.len() != n {
            return Err(config(alloc::format!("cost table has {} rows, data has {n}", values.len())));
        }
    }
    let dz = z.ncols();
    let mut z0 = alloc::vec![0.0; dz];
    let mut z1 = alloc::vec![0.0; dz];
    let mut out = GainVector {
        g: Vec::with_capacity(n),
        p0: Vec::with_capacity(n),
        p1: Vec::with_capacity(n),
        c0: Vec::with_capacity(n),
        c1: Vec::with_capacity(n),
        v: RowMatrix::zeros(n, features.len()),
        features: features.clone(),
        pair: *pair,
    };
    let mut bad = Vec::new();
    for i in 0..n {
        let (xi, zi) = (x.row(i), z.row(i));
        pair.alpha0.apply_into(zi, &mut z0);
        pair.alpha1.apply_into(zi, &mut z1);
        let p0 = p.propensity(xi, &z0);
        let p1 = p.propensity(xi, &z1);
        let (lo, hi) = mte.identified_range(xi, zi);
        let g = if p0.min(p1) < lo - 1e-9 || p0.max(p1) > hi + 1e-9 {
            bad.push(i);
            0.0
        } else if pair.is_trivial() {
            0.0
        } else {
            match mte.integrate(xi, zi, p0, p1) {
                Ok(g) => g,
                Err(Error::Extrapolation { .. }) => {
                    bad.push(i);
                    0.0
                }
                Err(e) => return Err(e),
            }
        };
        out.g.push(g);
        out.p0.push(p0);
        out.p1.push(p1);
        out.c0.push(cost.unit_cost(&pair.alpha0, zi, Some(i))? * p0);
        out.c1.push(cost.unit_cost(&pair.alpha1, zi, Some(i))? * p1);
        features.eval_into(xi, zi, out.v.row_mut(i));
    }
    if !bad.is_empty() {
        return Err(Error::ExtrapolationRows { rows: bad });
    }
    Ok(out)
}

/// One row of a Table-1-style report.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WelfareReport {
    pub share_eligible: f64,
    pub welfare_gain: f64,
    pub avg_takeup_change: f64,
    /// Policy relevant treatment effect, gain per net person shifted; NaN
    /// (serialized as null) when take-up does not change.
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_util::nan_as_null"))]
    pub prte: f64,
    pub prte_defined: bool,
}

impl WelfareReport {
    pub fn from_parts(share_eligible: f64, welfare_gain: f64, avg_takeup_change: f64) -> Self {
        let prte_defined = avg_takeup_change != 0.0;
        WelfareReport {
            share_eligible,
            welfare_gain,
            avg_takeup_change,
            prte: if prte_defined { welfare_gain / avg_takeup_change } else { f64::NAN },
            prte_defined,
        }
    }
}

/// Share eligible, welfare gain `mean(π g)`, take-up change
/// `mean(π(p̂1 − p̂0))` and their ratio.
pub fn report(gains: &GainVector, labels: &[bool]) -> WelfareReport {
    let n = gains.n() as f64;
    let mut share = 0.0;
    let mut gain = 0.0;
    let mut takeup = 0.0;
    for i in 0..gains.n() {
        if labels[i] {
            share += 1.0;
            gain += gains.g[i];
            takeup += gains.p1[i] - gains.p0[i];
        }
    }
    WelfareReport::from_parts(share / n, gain / n, takeup / n)
}
