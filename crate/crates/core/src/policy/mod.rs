//! Empirical welfare maximization over encouragement-rule classes.
//!
//! Linear eligibility scores (LES) `1{λ0 + λ'v ≥ 0}` are solved exactly by
//! enumerating every labeling the class induces on the sample, or by a
//! branch-and-bound MILP. Threshold allocations (TA) `1{σ_k v_k ≤ v̄_k ∀k}`
//! are searched exhaustively over observed thresholds.

use alloc::vec::Vec;

use crate::error::{config, Error, Result};
use crate::features::FeatureSpec;
use crate::linalg::RowMatrix;
use crate::model::ManipulationPair;
use crate::welfare::{DrScoreSet, GainVector};

mod les;
mod milp;
pub mod reference;
mod search;
mod ta;

pub use milp::MilpOptions;
pub use search::Objective;

/// Threshold of a TA rule; infinite thresholds select nobody / everybody
/// along their coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Threshold {
    NegInf,
    Value(f64),
    PosInf,
}

impl Threshold {
    /// `t ≤ self`.
    pub fn admits(&self, t: f64) -> bool {
        match *self {
            Threshold::NegInf => false,
            Threshold::Value(v) => t <= v,
            Threshold::PosInf => true,
        }
    }
}

/// Eligibility classifier.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "class", rename_all = "snake_case"))]
pub enum Rule {
    /// `1{coef[0] + Σ_k coef[k+1]·v_k ≥ 0}`, normalized to `‖coef‖∞ = 1`.
    Les { coef: Vec<f64> },
    /// `1{signs[k]·v_k ≤ thresholds[k] ∀k}`.
    Ta { thresholds: Vec<Threshold>, signs: Vec<i8> },
    /// No feasible rule exists (budget-constrained learning only). Assigns nobody.
    Empty,
}

impl Rule {
    pub fn assign(&self, v: &[f64]) -> bool {
        match self {
            Rule::Les { coef } => les_score(coef, v) >= 0.0,
            Rule::Ta { thresholds, signs } => {
                thresholds.iter().zip(signs).zip(v).all(|((t, &s), &x)| t.admits(f64::from(s) * x))
            }
            Rule::Empty => false,
        }
    }

    pub fn is_empty_sentinel(&self) -> bool {
        matches!(self, Rule::Empty)
    }

    /// Constant LES rule.
    pub fn constant(on: bool, dv: usize) -> Rule {
        let mut coef = alloc::vec![0.0; dv + 1];
        coef[0] = if on { 1.0 } else { -1.0 };
        Rule::Les { coef }
    }

    /// VC dimension of the class the rule belongs to (`d_v + 1` for LES, `d_v` for TA).
    pub fn vc_dimension(&self) -> Option<usize> {
        match self {
            Rule::Les { coef } => Some(coef.len()),
            Rule::Ta { thresholds, .. } => Some(thresholds.len()),
            Rule::Empty => None,
        }
    }
}

pub(crate) fn les_score(coef: &[f64], v: &[f64]) -> f64 {
    coef[0] + coef[1..].iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
}

/// Scales a coefficient vector to unit sup-norm.
pub(crate) fn normalize(coef: &mut [f64]) {
    let m = coef.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    if m > 0.0 {
        for c in coef.iter_mut() {
            *c /= m;
        }
    }
}

/// A binary encouragement rule: who gets `α1` (everyone else gets `α0`).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PolicySpec {
    pub rule: Rule,
    /// Features the classifier reads, evaluated at the status-quo `(x, z)`.
    pub features: FeatureSpec,
    pub pair: ManipulationPair,
    #[cfg_attr(feature = "serde", serde(default))]
    pub empirical_welfare: Option<f64>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub empirical_budget: Option<f64>,
}

impl PolicySpec {
    pub fn new(rule: Rule, features: FeatureSpec, pair: ManipulationPair) -> Self {
        PolicySpec { rule, features, pair, empirical_welfare: None, empirical_budget: None }
    }

    /// `π ≡ 1` or `π ≡ 0` (reads no features).
    pub fn constant(on: bool, pair: ManipulationPair) -> Self {
        PolicySpec::new(Rule::constant(on, 0), FeatureSpec::default(), pair)
    }

    pub fn assign(&self, x: &[f64], z: &[f64]) -> bool {
        match &self.rule {
            Rule::Les { coef } => {
                let s = coef[0]
                    + coef[1..].iter().zip(&self.features.terms).map(|(c, t)| c * t.value(x, z)).sum::<f64>();
                s >= 0.0
            }
            Rule::Ta { thresholds, signs } => thresholds
                .iter()
                .zip(signs)
                .zip(&self.features.terms)
                .all(|((th, &s), t)| th.admits(f64::from(s) * t.value(x, z))),
            Rule::Empty => false,
        }
    }

    pub fn is_empty_sentinel(&self) -> bool {
        self.rule.is_empty_sentinel()
    }
}

/// Policy class to optimize over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ClassKind {
    Les,
    Ta,
}

/// Solver for LES classes (TA is always exhaustive).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Backend {
    Enumerate,
    Milp(MilpOptions),
}

impl Default for Backend {
    fn default() -> Self {
        Backend::Enumerate
    }
}

/// Maximizer of `Ŵ(π) = mean(π_i g_i)` over the class.
pub fn solve_fewm(gains: &GainVector, class: ClassKind, backend: Backend) -> Result<PolicySpec> {
    let obj = Objective::new(&gains.g, &gains.v)?;
    finish(solve(&obj, class, backend)?, gains, None)
}

/// Maximizer of `Ŵ(π)` subject to `B̂(π) = mean(π_i c1_i + (1 − π_i) c0_i) ≤ κ`;
/// the empty sentinel when no rule in the class is feasible.
pub fn solve_bewm(gains: &GainVector, class: ClassKind, kappa: f64, backend: Backend) -> Result<PolicySpec> {
    let obj = Objective::new(&gains.g, &gains.v)?.with_budget(&gains.c0, &gains.c1, kappa)?;
    finish(solve(&obj, class, backend)?, gains, Some(kappa))
}

/// Maximizer of `mean(π_i Γ̂_i)` over the class, for doubly robust scores.
pub fn solve_dr_ewm(
    dr: &DrScoreSet,
    v: &RowMatrix,
    features: &FeatureSpec,
    pair: ManipulationPair,
    class: ClassKind,
    backend: Backend,
) -> Result<PolicySpec> {
    let obj = Objective::new(&dr.gamma, v)?;
    let rule = solve(&obj, class, backend)?;
    let labels: Vec<bool> = v.rows().map(|r| rule.assign(r)).collect();
    let mut spec = PolicySpec::new(rule, features.clone(), pair);
    spec.empirical_welfare = Some(obj.welfare(&labels));
    Ok(spec)
}

/// Exhaustive threshold-allocation search.
pub fn solve_ta(gains: &GainVector) -> Result<PolicySpec> {
    solve_fewm(gains, ClassKind::Ta, Backend::Enumerate)
}

/// Solves a raw objective.
pub fn solve(obj: &Objective<'_>, class: ClassKind, backend: Backend) -> Result<Rule> {
    match (class, backend) {
        (ClassKind::Les, Backend::Enumerate) => les::enumerate(obj),
        (ClassKind::Les, Backend::Milp(opts)) => milp::solve_les(obj, &opts),
        (ClassKind::Ta, _) => ta::search(obj),
    }
}

fn finish(rule: Rule, gains: &GainVector, kappa: Option<f64>) -> Result<PolicySpec> {
    let labels: Vec<bool> = gains.v.rows().map(|r| rule.assign(r)).collect();
    let mut spec = PolicySpec::new(rule, gains.features.clone(), gains.pair);
    if !spec.is_empty_sentinel() {
        spec.empirical_welfare = Some(gains.welfare(&labels));
        spec.empirical_budget = Some(gains.budget(&labels));
    }
    if let (Some(k), Some(b)) = (kappa, spec.empirical_budget) {
        if b > k + 1e-9 {
            return Err(Error::Estimation(alloc::format!("solver returned a rule with budget {b} > κ = {k}")));
        }
    }
    Ok(spec)
}

pub(crate) fn check_dv(obj: &Objective<'_>, max: usize, what: &str) -> Result<()> {
    if obj.dv() > max {
        return Err(config(alloc::format!("{what} supports at most {max} policy features, got {}", obj.dv())));
    }
    Ok(())
}
