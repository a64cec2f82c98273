//! Doubly robust welfare scores with cross-fitting.
//!
//! `Γ̂_i = φ̂(X_i, p̂(X_i, α1(Z_i))) − φ̂(X_i, p̂(X_i, α0(Z_i)))
//!        + ĝ(X_i, Z_i)·(Y_i − φ̂(X_i, p̂(X_i, Z_i)))`,
//! with `φ(x, u) = E[Y | X = x, p(X, Z) = u]`, the density ratio
//! `g = (f_{X,α1(Z)} − f_{X,α0(Z)}) / f_{X,Z}`, and every nuisance fit on the
//! folds that do not contain `i`.

use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

#[allow(unused_imports)]
use crate::math::Float;
use crate::error::{config, Result};
use crate::features::FeatureSpec;
use crate::linalg::RowMatrix;
use crate::model::{ManipulationPair, Sample, StructuralDgp};
use crate::mte::{fit_liv_mte, fit_partially_linear_mte, fit_polynomial_mte, MarginalEffect, MteModel};
use crate::propensity::{fit_logit, LogitOptions, Propensity, PropensityModel};
use crate::rng::{purpose, stream};
use crate::stats::std_dev;

pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_G_MAX: f64 = 20.0;

/// Where the density ratio came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum GSource {
    Oracle,
    KernelRatio,
}

/// Nuisances fit on one training split.
pub trait FittedNuisances {
    fn propensity(&self, x: &[f64], z: &[f64]) -> f64;
    fn phi(&self, x: &[f64], z: &[f64], u: f64) -> Result<f64>;
    fn density_ratio(&self, x: &[f64], z: &[f64]) -> Result<f64>;
}

/// Fits nuisances on a training split.
pub trait NuisanceProvider {
    fn fit<'s>(&'s self, train: &Sample) -> Result<Box<dyn FittedNuisances + 's>>;
    fn g_source(&self) -> GSource;
}

/// Cross-fitted scores.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DrScoreSet {
    pub gamma: Vec<f64>,
    /// Fold of each row, `1..=k`.
    pub fold_id: Vec<usize>,
    pub k: usize,
    pub g_source: GSource,
    pub g_max: f64,
}

impl DrScoreSet {
    pub fn welfare(&self, labels: &[bool]) -> f64 {
        self.gamma.iter().zip(labels).filter(|(_, &l)| l).map(|(g, _)| g).sum::<f64>() / self.gamma.len() as f64
    }
}

/// Seeded assignment of `n` rows to `k` folds of sizes differing by at most one.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut stream(seed, purpose::FOLDS));
    let mut fold = alloc::vec![0; n];
    for (pos, &i) in perm.iter().enumerate() {
        fold[i] = pos % k + 1;
    }
    fold
}

/// Cross-fitted doubly robust scores; `ĝ` is clamped to `[−g_max, g_max]`.
pub fn dr_scores(
    sample: &Sample,
    k: usize,
    pair: &ManipulationPair,
    provider: &dyn NuisanceProvider,
    g_max: f64,
    seed: u64,
) -> Result<DrScoreSet> {
    let n = sample.n();
    if k < 2 {
        return Err(config("cross-fitting needs at least two folds"));
    }
    if k * 10 > n {
        return Err(config(alloc::format!("{k} folds need at least {} rows, sample has {n}", 10 * k)));
    }
    let fold_id = fold_assignment(n, k, seed);
    let mut gamma = alloc::vec![0.0; n];
    let dz = sample.dz();
    let mut z0 = alloc::vec![0.0; dz];
    let mut z1 = alloc::vec![0.0; dz];
    for f in 1..=k {
        let train: Vec<usize> = (0..n).filter(|&i| fold_id[i] != f).collect();
        let fitted = provider.fit(&sample.subset(&train))?;
        for i in (0..n).filter(|&i| fold_id[i] == f) {
            let (x, z) = (sample.x_row(i), sample.z_row(i));
            pair.alpha0.apply_into(z, &mut z0);
            pair.alpha1.apply_into(z, &mut z1);
            let p0 = fitted.propensity(x, &z0);
            let p1 = fitted.propensity(x, &z1);
            let p = fitted.propensity(x, z);
            let g = fitted.density_ratio(x, z)?.clamp(-g_max, g_max);
            let plug_in = fitted.phi(x, z, p1)? - fitted.phi(x, z, p0)?;
            let correction = if g == 0.0 { 0.0 } else { g * (sample.y()[i] - fitted.phi(x, z, p)?) };
            gamma[i] = plug_in + correction;
        }
    }
    Ok(DrScoreSet { gamma, fold_id, k, g_source: provider.g_source(), g_max })
}

/// True nuisances of a simulated model, optionally corrupted by constant
/// factors (for robustness checks).
#[derive(Debug, Clone)]
pub struct OracleNuisances<'a> {
    pub dgp: &'a StructuralDgp,
    pub pair: ManipulationPair,
    pub phi_scale: f64,
    pub g_scale: f64,
}

impl<'a> OracleNuisances<'a> {
    pub fn new(dgp: &'a StructuralDgp, pair: ManipulationPair) -> Self {
        OracleNuisances { dgp, pair, phi_scale: 1.0, g_scale: 1.0 }
    }
}

impl FittedNuisances for OracleNuisances<'_> {
    fn propensity(&self, x: &[f64], z: &[f64]) -> f64 {
        self.dgp.propensity(x, z)
    }

    fn phi(&self, x: &[f64], _z: &[f64], u: f64) -> Result<f64> {
        Ok(self.phi_scale * self.dgp.conditional_mean(x, u))
    }

    fn density_ratio(&self, _x: &[f64], z: &[f64]) -> Result<f64> {
        Ok(self.g_scale * self.dgp.density_ratio(&self.pair, z)?)
    }
}

impl NuisanceProvider for OracleNuisances<'_> {
    fn fit<'s>(&'s self, _train: &Sample) -> Result<Box<dyn FittedNuisances + 's>> {
        Ok(Box::new(self.clone()))
    }

    fn g_source(&self) -> GSource {
        GSource::Oracle
    }
}

/// MTE model used to build `φ̂` from data.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum MteChoice {
    Polynomial { j: usize },
    PartiallyLinear { bandwidth: f64, extra: Vec<usize> },
    Liv { bandwidth: f64 },
}

impl MteChoice {
    pub fn fit(&self, sample: &Sample, p: &dyn Propensity) -> Result<MteModel> {
        match self {
            MteChoice::Polynomial { j } => fit_polynomial_mte(sample, p, *j).map(MteModel::Polynomial),
            MteChoice::PartiallyLinear { bandwidth, extra } => {
                fit_partially_linear_mte(sample, p, *bandwidth, extra).map(MteModel::PartiallyLinear)
            }
            MteChoice::Liv { bandwidth } => fit_liv_mte(sample, p, *bandwidth).map(MteModel::Liv),
        }
    }
}

/// Density ratio from Gaussian product-kernel density estimates of
/// `(X, α1(Z))`, `(X, α0(Z))` and `(X, Z)` sharing one bandwidth (in units of
/// each column's standard deviation; Silverman's rule when `None`).
/// Columns constant on the training split are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelRatio {
    pair: ManipulationPair,
    cols: Vec<(bool, usize)>,
    scale: Vec<f64>,
    h: f64,
    base: RowMatrix,
    shifted0: RowMatrix,
    shifted1: RowMatrix,
}

impl KernelRatio {
    pub fn fit(train: &Sample, pair: &ManipulationPair, bandwidth: Option<f64>) -> Result<Self> {
        let mut cols = Vec::new();
        let mut scale = Vec::new();
        for j in 0..train.dx() {
            let s = std_dev(&train.x().column(j));
            if s > 0.0 {
                cols.push((false, j));
                scale.push(s);
            }
        }
        for k in 0..train.dz() {
            let s = std_dev(&train.z().column(k));
            if s > 0.0 || k == 0 {
                cols.push((true, k));
                scale.push(if s > 0.0 { s } else { 1.0 });
            }
        }
        let d = cols.len() as f64;
        let n = train.n();
        let h = match bandwidth {
            Some(h) if h > 0.0 => h,
            Some(_) => return Err(config("kernel-ratio bandwidth must be positive")),
            None => (4.0 / (d + 2.0)).powf(1.0 / (d + 4.0)) * (n as f64).powf(-1.0 / (d + 4.0)),
        };
        let dz = train.dz();
        let mut zb = alloc::vec![0.0; dz];
        let mut base = RowMatrix::zeros(n, cols.len());
        let mut shifted0 = RowMatrix::zeros(n, cols.len());
        let mut shifted1 = RowMatrix::zeros(n, cols.len());
        for i in 0..n {
            let (x, z) = (train.x_row(i), train.z_row(i));
            for (c, &(is_z, j)) in cols.iter().enumerate() {
                let v = if is_z { z[j] } else { x[j] };
                base.set(i, c, v / scale[c]);
            }
            for (m, target) in [(&pair.alpha0, &mut shifted0), (&pair.alpha1, &mut shifted1)] {
                m.apply_into(z, &mut zb);
                for (c, &(is_z, j)) in cols.iter().enumerate() {
                    let v = if is_z { zb[j] } else { x[j] };
                    target.set(i, c, v / scale[c]);
                }
            }
        }
        Ok(KernelRatio { pair: *pair, cols, scale, h, base, shifted0, shifted1 })
    }

    fn density(&self, points: &RowMatrix, q: &[f64]) -> f64 {
        let inv = 1.0 / self.h;
        let mut s = 0.0;
        for r in points.rows() {
            let mut d2 = 0.0;
            for (a, b) in r.iter().zip(q) {
                let t = (a - b) * inv;
                d2 += t * t;
            }
            s += (-0.5 * d2).exp();
        }
        s
    }

    pub fn ratio(&self, x: &[f64], z: &[f64]) -> f64 {
        if self.pair.is_trivial() {
            return 0.0;
        }
        let q: Vec<f64> = self
            .cols
            .iter()
            .zip(&self.scale)
            .map(|(&(is_z, j), s)| if is_z { z[j] / s } else { x[j] / s })
            .collect();
        let f = self.density(&self.base, &q);
        if f <= 0.0 {
            return 0.0;
        }
        (self.density(&self.shifted1, &q) - self.density(&self.shifted0, &q)) / f
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }
}

/// How the density ratio is obtained when the other nuisances are estimated.
#[derive(Debug, Clone)]
pub enum GChoice<'a> {
    Oracle(&'a StructuralDgp),
    KernelRatio { bandwidth: Option<f64> },
}

/// Logit propensity, an MTE model for `φ̂`, and an oracle or kernel density ratio.
#[derive(Debug, Clone)]
pub struct EstimatedNuisances<'a> {
    pub pair: ManipulationPair,
    pub logit_features: FeatureSpec,
    pub mte: MteChoice,
    pub g: GChoice<'a>,
}

struct Fitted<'a> {
    p: PropensityModel,
    mte: MteModel,
    g: FittedG<'a>,
}

enum FittedG<'a> {
    Oracle(&'a StructuralDgp, ManipulationPair),
    Kernel(KernelRatio),
}

impl FittedNuisances for Fitted<'_> {
    fn propensity(&self, x: &[f64], z: &[f64]) -> f64 {
        self.p.propensity(x, z)
    }

    fn phi(&self, x: &[f64], z: &[f64], u: f64) -> Result<f64> {
        self.mte.conditional_mean(x, z, u)
    }

    fn density_ratio(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        match &self.g {
            FittedG::Oracle(dgp, pair) => dgp.density_ratio(pair, z),
            FittedG::Kernel(k) => Ok(k.ratio(x, z)),
        }
    }
}

impl NuisanceProvider for EstimatedNuisances<'_> {
    fn fit<'s>(&'s self, train: &Sample) -> Result<Box<dyn FittedNuisances + 's>> {
        let p = fit_logit(train, &self.logit_features, &LogitOptions::default())?;
        let mte = self.mte.fit(train, &p)?;
        let g = match &self.g {
            GChoice::Oracle(dgp) => FittedG::Oracle(dgp, self.pair),
            GChoice::KernelRatio { bandwidth } => FittedG::Kernel(KernelRatio::fit(train, &self.pair, *bandwidth)?),
        };
        Ok(Box::new(Fitted { p, mte, g }))
    }

    fn g_source(&self) -> GSource {
        match self.g {
            GChoice::Oracle(_) => GSource::Oracle,
            GChoice::KernelRatio { .. } => GSource::KernelRatio,
        }
    }
}
