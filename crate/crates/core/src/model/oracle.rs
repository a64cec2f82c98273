//! Ground-truth welfare, budget and compliance quantities of a simulated
//! model, used to validate estimators and to measure regret.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{config, Error, Result};
use crate::model::{Law, StructuralDgp};
use crate::policy::PolicySpec;
use crate::rng::{purpose, stream};
use crate::stats::{Estimate, RunningMean};
use crate::welfare::CostSpec;

/// How [`oracle_welfare`] integrates over the population.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum WelfareMethod {
    /// Draws `(X, Z)` and integrates the MTE exactly over the shifted margin.
    Formula,
    /// Draws `(X, Z, U, noise)` and averages realized counterfactual outcomes.
    Simulation,
}

/// `MTE(u, x) = m1(x, u) − m0(x, u)` for `u ∈ [0, 1]`.
pub fn oracle_mte(dgp: &StructuralDgp, u: f64, x: &[f64]) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::Domain(alloc::format!("u = {u} is outside [0, 1]")));
    }
    if x.len() != dgp.dx() {
        return Err(Error::Domain(alloc::format!("x has {} entries, expected {}", x.len(), dgp.dx())));
    }
    Ok(dgp.mte(u, x))
}

fn check(dgp: &StructuralDgp, rule: &PolicySpec, draws: usize) -> Result<()> {
    dgp.validate()?;
    rule.features.check_dims(dgp.dx(), dgp.dz())?;
    if draws == 0 {
        return Err(config("need at least one Monte Carlo draw"));
    }
    Ok(())
}

/// Social welfare `W(α^π) = E[Y(D(α^π(X, Z)))]` of an encouragement rule.
///
/// The formula route evaluates `E[Y] + E[∫ MTE(u,X)(1{p(X,α^π)≥u} − 1{p(X,Z)≥u}) du]`
/// with the inner integral exact; the simulation route never touches the MTE.
pub fn oracle_welfare(
    dgp: &StructuralDgp,
    rule: &PolicySpec,
    method: WelfareMethod,
    draws: usize,
    seed: u64,
) -> Result<Estimate> {
    check(dgp, rule, draws)?;
    let (dx, dz) = (dgp.dx(), dgp.dz());
    let mut x = alloc::vec![0.0; dx];
    let mut z = alloc::vec![0.0; dz];
    let mut za = alloc::vec![0.0; dz];
    let mut acc = RunningMean::default();
    match method {
        WelfareMethod::Formula => {
            let mut rng = stream(seed, purpose::WELFARE_FORMULA);
            for _ in 0..draws {
                dgp.draw_xz(&mut rng, &mut x, &mut z);
                let p = dgp.propensity(&x, &z);
                rule.pair.arm(rule.assign(&x, &z)).apply_into(&z, &mut za);
                let pa = dgp.propensity(&x, &za);
                acc.push(dgp.conditional_mean(&x, p) + dgp.mte_integral(&x, p, pa));
            }
        }
        WelfareMethod::Simulation => {
            let mut rng = stream(seed, purpose::WELFARE_SIMULATION);
            for _ in 0..draws {
                dgp.draw_xz(&mut rng, &mut x, &mut z);
                let u: f64 = rng.random();
                let e: f64 = StandardNormal.sample(&mut rng);
                rule.pair.arm(rule.assign(&x, &z)).apply_into(&z, &mut za);
                let treated = dgp.propensity(&x, &za) >= u;
                acc.push(dgp.outcome(treated, &x, u) + dgp.noise_scale * e);
            }
        }
    }
    Ok(acc.estimate())
}

/// Welfare contrast against giving everyone `α0`:
/// `E[π(X, Z) ∫_{p(X,α0(Z))}^{p(X,α1(Z))} MTE(u, X) du]`.
pub fn oracle_contrast(dgp: &StructuralDgp, rule: &PolicySpec, draws: usize, seed: u64) -> Result<Estimate> {
    check(dgp, rule, draws)?;
    let (dx, dz) = (dgp.dx(), dgp.dz());
    let mut x = alloc::vec![0.0; dx];
    let mut z = alloc::vec![0.0; dz];
    let mut z0 = alloc::vec![0.0; dz];
    let mut z1 = alloc::vec![0.0; dz];
    let mut acc = RunningMean::default();
    let mut rng = stream(seed, purpose::WELFARE_FORMULA);
    for _ in 0..draws {
        dgp.draw_xz(&mut rng, &mut x, &mut z);
        if !rule.assign(&x, &z) {
            acc.push(0.0);
            continue;
        }
        rule.pair.alpha0.apply_into(&z, &mut z0);
        rule.pair.alpha1.apply_into(&z, &mut z1);
        acc.push(dgp.mte_integral(&x, dgp.propensity(&x, &z0), dgp.propensity(&x, &z1)));
    }
    Ok(acc.estimate())
}

/// Expected program cost `B = E[C(X, Z)·D(α^π(X, Z))]`, where the unit cost is
/// evaluated at the manipulation the rule assigns.
pub fn oracle_budget(
    dgp: &StructuralDgp,
    rule: &PolicySpec,
    cost: &CostSpec,
    method: WelfareMethod,
    draws: usize,
    seed: u64,
) -> Result<Estimate> {
    check(dgp, rule, draws)?;
    cost.validate()?;
    let (dx, dz) = (dgp.dx(), dgp.dz());
    let mut x = alloc::vec![0.0; dx];
    let mut z = alloc::vec![0.0; dz];
    let mut za = alloc::vec![0.0; dz];
    let mut acc = RunningMean::default();
    let mut rng = stream(seed, purpose::BUDGET);
    for _ in 0..draws {
        dgp.draw_xz(&mut rng, &mut x, &mut z);
        let arm = rule.pair.arm(rule.assign(&x, &z));
        arm.apply_into(&z, &mut za);
        let c = cost.unit_cost(arm, &z, None)?;
        let p = dgp.propensity(&x, &za);
        let v = match method {
            WelfareMethod::Formula => c * p,
            WelfareMethod::Simulation => {
                let u: f64 = rng.random();
                if p >= u {
                    c
                } else {
                    0.0
                }
            }
        };
        acc.push(v);
    }
    Ok(acc.estimate())
}

/// Response types to binary instruments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ComplianceGroup {
    NeverTaker,
    AlwaysTaker,
    /// Complier with respect to `Z1` (the only complier type with one instrument).
    Z1Complier,
    Z2Complier,
    Eager,
    Reluctant,
}

/// One compliance group at a covariate value: its population share and the
/// integral of the MTE over its `U` interval (share × group CATE).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupShare {
    pub group: ComplianceGroup,
    pub share: f64,
    pub effect_mass: f64,
}

impl GroupShare {
    /// Conditional average treatment effect of the group (0 for empty groups).
    pub fn cate(&self) -> f64 {
        if self.share > 0.0 {
            self.effect_mass / self.share
        } else {
            0.0
        }
    }
}

/// Compliance groups at covariate value `x` for models with one or two
/// binary instruments and a propensity increasing in each of them.
pub fn compliance_groups(dgp: &StructuralDgp, x: &[f64]) -> Result<Vec<GroupShare>> {
    for law in &dgp.instruments {
        let binary = law.atoms().is_some_and(|a| a.iter().all(|(v, _)| *v == 0.0 || *v == 1.0));
        if !binary {
            return Err(config("compliance groups need binary instruments"));
        }
    }
    let p = |z: &[f64]| dgp.propensity(x, z);
    use ComplianceGroup::*;
    let intervals: Vec<(ComplianceGroup, f64, f64)> = match dgp.dz() {
        1 => {
            let (p0, p1) = (p(&[0.0]), p(&[1.0]));
            if p1 < p0 {
                return Err(Error::Domain("propensity decreases in the instrument".into()));
            }
            alloc::vec![(AlwaysTaker, 0.0, p0), (Z1Complier, p0, p1), (NeverTaker, p1, 1.0)]
        }
        2 => {
            let (p00, p01, p10, p11) = (p(&[0.0, 0.0]), p(&[0.0, 1.0]), p(&[1.0, 0.0]), p(&[1.0, 1.0]));
            if p10 < p00 || p11 < p01 || p01 < p00 || p11 < p10 {
                return Err(Error::Domain("propensity is not increasing in each instrument".into()));
            }
            let (lo, hi) = (p01.min(p10), p01.max(p10));
            alloc::vec![
                (AlwaysTaker, 0.0, p00),
                (Eager, p00, lo),
                (Z1Complier, p01, p01.max(p10)),
                (Z2Complier, p10, p10.max(p01)),
                (Reluctant, hi, p11),
                (NeverTaker, p11, 1.0),
            ]
        }
        _ => return Err(config("compliance groups are defined for one or two instruments")),
    };
    Ok(intervals
        .into_iter()
        .map(|(group, lo, hi)| GroupShare { group, share: hi - lo, effect_mass: dgp.mte_integral(x, lo, hi) })
        .collect())
}

/// Binary-instrument welfare under random rationing, by direct simulation:
/// if the rule would push expected take-up above `kappa`, each eligible
/// person receives the encouragement with the probability that exhausts the
/// budget. The rule may only read covariates.
pub fn oracle_rationed_welfare(
    dgp: &StructuralDgp,
    rule: &PolicySpec,
    kappa: f64,
    draws: usize,
    seed: u64,
) -> Result<Estimate> {
    check(dgp, rule, draws)?;
    if rule.features.terms.iter().any(|t| t.0.iter().any(|v| matches!(v, crate::Var::Z(_)))) {
        return Err(config("rationing rules assign the instrument and may only read covariates"));
    }
    let (ed0, edpi) = binary_takeups(dgp, rule)?;
    if ed0 > kappa {
        return Err(Error::Infeasible(alloc::format!("status-quo take-up {ed0} exceeds the budget {kappa}")));
    }
    let scale = if edpi > kappa { (kappa - ed0) / (edpi - ed0) } else { 1.0 };
    let dz = dgp.dz();
    let mut x = alloc::vec![0.0; dgp.dx()];
    let mut z = alloc::vec![0.0; dz];
    let mut acc = RunningMean::default();
    let mut rng = stream(seed, purpose::WELFARE_SIMULATION);
    for _ in 0..draws {
        dgp.draw_xz(&mut rng, &mut x, &mut z);
        let u: f64 = rng.random();
        let e: f64 = StandardNormal.sample(&mut rng);
        let coin: f64 = rng.random();
        z[0] = if rule.assign(&x, &z) && coin < scale { 1.0 } else { 0.0 };
        let treated = dgp.propensity(&x, &z) >= u;
        acc.push(dgp.outcome(treated, &x, u) + dgp.noise_scale * e);
    }
    Ok(acc.estimate())
}

/// `(E[D(0)], E[D(π)])` by quadrature over the covariate laws.
fn binary_takeups(dgp: &StructuralDgp, rule: &PolicySpec) -> Result<(f64, f64)> {
    if dgp.dz() != 1 || dgp.instruments[0].atoms().is_none() {
        return Err(config("rationing needs a single binary instrument"));
    }
    let grids: Vec<Vec<(f64, f64)>> = dgp.covariates.iter().map(|l: &Law| l.quadrature(48)).collect();
    let mut x = alloc::vec![0.0; dgp.dx()];
    let mut out = (0.0, 0.0);
    fn rec(
        dgp: &StructuralDgp,
        rule: &PolicySpec,
        grids: &[Vec<(f64, f64)>],
        k: usize,
        w: f64,
        x: &mut Vec<f64>,
        out: &mut (f64, f64),
    ) {
        if k == grids.len() {
            let p0 = dgp.propensity(x, &[0.0]);
            let p1 = dgp.propensity(x, &[1.0]);
            out.0 += w * p0;
            out.1 += w * if rule.assign(x, &[0.0]) { p1 } else { p0 };
            return;
        }
        for &(v, wk) in &grids[k] {
            x[k] = v;
            rec(dgp, rule, grids, k + 1, w * wk, x, out);
        }
    }
    rec(dgp, rule, &grids, 0, 1.0, &mut x, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureSpec, Var};
    use crate::model::{presets, Manipulation, ManipulationPair, SelectionIndex};
    use crate::policy::Rule;
    use crate::welfare::CostKind;

    fn les(coef: [f64; 3], pair: ManipulationPair) -> PolicySpec {
        PolicySpec::new(Rule::Les { coef: coef.to_vec() }, FeatureSpec::vars(&[Var::Z(0), Var::Z(1)]), pair)
    }

    #[test]
    fn mte_domain() {
        let dgp = presets::canonical();
        assert!(oracle_mte(&dgp, 1.2, &[1.0, 0.5]).is_err());
        assert!(oracle_mte(&dgp, -0.1, &[1.0, 0.5]).is_err());
        let x = [1.0, 0.25];
        for k in 0..100 {
            let u = k as f64 / 99.0;
            let direct = dgp.outcome_m1.value(&x, u) - dgp.outcome_m0.value(&x, u);
            assert!((oracle_mte(&dgp, u, &x).unwrap() - direct).abs() <= 1e-12);
        }
    }

    #[test]
    fn identical_outcomes_give_zero_mte() {
        let mut dgp = presets::canonical();
        dgp.outcome_m1 = dgp.outcome_m0.clone();
        assert_eq!(oracle_mte(&dgp, 0.3, &[1.0, 0.2]).unwrap(), 0.0);
    }

    #[test]
    fn no_manipulation_gives_mean_outcome() {
        let dgp = presets::canonical();
        let pair = ManipulationPair::from_status_quo(Manipulation::Identity);
        let rule = PolicySpec::constant(true, pair);
        let w = oracle_welfare(&dgp, &rule, WelfareMethod::Formula, 20_000, 4).unwrap();
        // With the same draws, E[φ(X, p(X, Z))] is the formula's E[Y].
        let c = oracle_contrast(&dgp, &rule, 20_000, 4).unwrap();
        assert_eq!(c.value, 0.0);
        let s = dgp.sample(200_000, 5).unwrap();
        let ey = Estimate::from_draws(s.y());
        assert!((w.value - ey.value).abs() <= 3.0 * w.se.hypot(ey.se));
    }

    #[test]
    fn constant_mte_pulls_out_of_integral() {
        let mut dgp = presets::canonical();
        dgp.outcome_m1 = dgp.outcome_m0.clone();
        dgp.outcome_m1.beta[0] += 0.7;
        let pair = ManipulationPair::from_status_quo(Manipulation::CapSubsidy { a: 2.5 });
        let rule = les([-1.0, 0.5, 0.0], pair);
        let c = oracle_contrast(&dgp, &rule, 5000, 1).unwrap();
        let mut rng = stream(1, purpose::WELFARE_FORMULA);
        let (mut x, mut z, mut z1) = ([0.0; 2], [0.0; 2], [0.0; 2]);
        let mut acc = 0.0;
        for _ in 0..5000 {
            dgp.draw_xz(&mut rng, &mut x, &mut z);
            if rule.assign(&x, &z) {
                pair.alpha1.apply_into(&z, &mut z1);
                acc += 0.7 * (dgp.propensity(&x, &z1) - dgp.propensity(&x, &z));
            }
        }
        assert!((c.value - acc / 5000.0).abs() < 1e-12);
    }

    #[test]
    fn extreme_manipulations_nest_treatment_rules() {
        let mut dgp = presets::canonical();
        dgp.selection = SelectionIndex::Logistic {
            features: FeatureSpec::linear(&[Var::Z(0)]),
            coef: alloc::vec![0.0, -1.0],
        };
        let pair = ManipulationPair::new(Manipulation::SetTo { v: 1000.0 }, Manipulation::SetTo { v: -1000.0 });
        let rule = PolicySpec::new(Rule::Les { coef: alloc::vec![-0.5, 1.0] }, FeatureSpec::vars(&[Var::X(1)]), pair);
        let w = oracle_welfare(&dgp, &rule, WelfareMethod::Formula, 50_000, 2).unwrap();
        // E[Y(0)] + E[π ∫_0^1 MTE] with the same (X, Z) draws.
        let mut rng = stream(2, purpose::WELFARE_FORMULA);
        let (mut x, mut z) = ([0.0; 2], [0.0; 2]);
        let mut acc = 0.0;
        for _ in 0..50_000 {
            dgp.draw_xz(&mut rng, &mut x, &mut z);
            let y0 = dgp.conditional_mean(&x, 0.0);
            let pi = if rule.assign(&x, &z) { 1.0 } else { 0.0 };
            acc += y0 + pi * dgp.mte_integral(&x, 0.0, 1.0);
        }
        assert!((w.value - acc / 50_000.0).abs() < 1e-10);
    }

    #[test]
    fn budget_special_cases() {
        let dgp = presets::canonical();
        let pair = ManipulationPair::from_status_quo(Manipulation::CapSubsidy { a: 1.0 });
        let rule = les([0.2, -0.1, 0.3], pair);
        let zero = CostSpec { kind: CostKind::Constant { c: 0.0 }, kappa: 1.0 };
        assert_eq!(oracle_budget(&dgp, &rule, &zero, WelfareMethod::Formula, 1000, 1).unwrap().value, 0.0);
        let neg = CostSpec { kind: CostKind::Constant { c: -1.0 }, kappa: 1.0 };
        assert!(matches!(oracle_budget(&dgp, &rule, &neg, WelfareMethod::Formula, 10, 1), Err(Error::Config(_))));
        // π ≡ 0 with α0 = identity: status-quo take-up times the unit cost.
        let one = CostSpec { kind: CostKind::Constant { c: 2.0 }, kappa: 1.0 };
        let nobody = PolicySpec::constant(false, pair);
        let b = oracle_budget(&dgp, &nobody, &one, WelfareMethod::Formula, 200_000, 3).unwrap();
        assert!((b.value - 2.0 * dgp.expected_takeup(32)).abs() <= 3.0 * b.se);
    }

    #[test]
    fn budget_formula_matches_simulation() {
        let dgp = presets::canonical();
        let pair = ManipulationPair::from_status_quo(Manipulation::CapSubsidy { a: 2.5 });
        let rule = les([-0.4, 0.3, -0.2], pair);
        let cost = CostSpec { kind: CostKind::ManipulationGap, kappa: 1.0 };
        let f = oracle_budget(&dgp, &rule, &cost, WelfareMethod::Formula, 1_000_000, 11).unwrap();
        let s = oracle_budget(&dgp, &rule, &cost, WelfareMethod::Simulation, 1_000_000, 12).unwrap();
        assert!(f.minus(s).within(0.0, 3.0), "{f:?} {s:?}");
    }

    #[test]
    fn single_binary_instrument_groups() {
        let dgp = presets::binary_iv();
        let g = compliance_groups(&dgp, &[1.0, 1.0]).unwrap();
        let total: f64 = g.iter().map(|s| s.share).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let c = g.iter().find(|s| s.group == ComplianceGroup::Z1Complier).unwrap();
        let p0 = dgp.propensity(&[1.0, 1.0], &[0.0]);
        let p1 = dgp.propensity(&[1.0, 1.0], &[1.0]);
        assert!((c.share - (p1 - p0)).abs() < 1e-15);
    }

    #[test]
    fn two_binary_instrument_groups_partition_the_unit_interval() {
        let mut dgp = presets::binary_iv();
        dgp.instruments.push(Law::Bernoulli { p: 0.4 });
        dgp.selection = SelectionIndex::Logistic {
            features: FeatureSpec::linear(&[Var::Z(0), Var::Z(1), Var::X(1)]),
            coef: alloc::vec![-1.0, 1.0, 0.6, 0.3],
        };
        let x = [1.0, 2.0];
        let g = compliance_groups(&dgp, &x).unwrap();
        let total: f64 = g.iter().map(|s| s.share).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let mass: f64 = g.iter().map(|s| s.effect_mass).sum();
        assert!((mass - dgp.mte_integral(&x, 0.0, 1.0)).abs() < 1e-12);
        // Z1 moves 1c and eager compliers when z2 = 0.
        let share = |k| g.iter().find(|s| s.group == k).unwrap().share;
        let p00 = dgp.propensity(&x, &[0.0, 0.0]);
        let p10 = dgp.propensity(&x, &[1.0, 0.0]);
        assert!((share(ComplianceGroup::Z1Complier) + share(ComplianceGroup::Eager) - (p10 - p00)).abs() < 1e-12);
    }
}
