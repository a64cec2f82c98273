//! Ready-made simulation designs. These are implementer-chosen test beds,
//! not designs taken from any published study.

use crate::features::{FeatureSpec, Var};
use crate::model::{Law, OutcomeEquation, SelectionIndex, StructuralDgp};

fn selection(coef: [f64; 4]) -> SelectionIndex {
    SelectionIndex::Logistic {
        features: FeatureSpec::linear(&[Var::Z(0), Var::Z(1), Var::X(1)]),
        coef: coef.to_vec(),
    }
}

/// `m_d(x, u) = x'β_d + θ_d(1 − 2u)`.
fn outcome(beta: [f64; 2], theta: f64) -> OutcomeEquation {
    OutcomeEquation::new(beta.to_vec(), alloc::vec![theta, -2.0 * theta])
}

/// Canonical design: `X = (1, X2)`, `X2 ~ U[0,1]`; `Z1 ~ U[0,4]`,
/// `Z2 ~ U[0,2]`; `ν = logistic(1 − 0.9 z1 − 0.6 z2 + x2)`;
/// `β0 = (1.0, 0.3)`, `β1 = (0.9, 0.5)`, `θ1 = 0.3`, `θ0 = −0.2`; noise 0.1.
///
/// The MTE is `−0.1 + 0.2 x2 + 0.5(1 − 2u)`.
pub fn canonical() -> StructuralDgp {
    StructuralDgp {
        covariates: alloc::vec![Law::Constant { value: 1.0 }, Law::Uniform { lo: 0.0, hi: 1.0 }],
        instruments: alloc::vec![Law::Uniform { lo: 0.0, hi: 4.0 }, Law::Uniform { lo: 0.0, hi: 2.0 }],
        selection: selection([1.0, -0.9, -0.6, 1.0]),
        outcome_m1: outcome([0.9, 0.5], 0.3),
        outcome_m0: outcome([1.0, 0.3], -0.2),
        noise_scale: 0.1,
        mte_bound: Some(2.0),
    }
}

/// Canonical design with `Z1 ~ N(2, 1)`, so that shifting `Z1` keeps a
/// density and the doubly robust density ratio is defined everywhere.
pub fn canonical_dr() -> StructuralDgp {
    let mut dgp = canonical();
    dgp.instruments[0] = Law::Normal { mean: 2.0, sd: 1.0 };
    dgp
}

/// Canonical outcomes with centered regressors `X2, Z1, Z2 ~ U[−2, 2]` and
/// `ν = logistic(0.2 − 0.6 z1 − 0.5 z2 + 0.8 x2)`: a well-conditioned logit
/// for coefficient-recovery checks.
pub fn logit_matched() -> StructuralDgp {
    let c = Law::Uniform { lo: -2.0, hi: 2.0 };
    StructuralDgp {
        covariates: alloc::vec![Law::Constant { value: 1.0 }, c.clone()],
        instruments: alloc::vec![c.clone(), c],
        selection: selection([0.2, -0.6, -0.5, 0.8]),
        outcome_m1: outcome([0.9, 0.5], 0.3),
        outcome_m0: outcome([1.0, 0.3], -0.2),
        noise_scale: 0.1,
        mte_bound: Some(2.5),
    }
}

/// Binary instrument `Z1 ~ Bernoulli(0.5)` with discrete `X2 ∈ {0, 1, 2}`;
/// `ν = logistic(−1 + 1.5 z1 + 0.5 x2)` is increasing in `z1`.
pub fn binary_iv() -> StructuralDgp {
    StructuralDgp {
        covariates: alloc::vec![
            Law::Constant { value: 1.0 },
            Law::Discrete { values: alloc::vec![0.0, 1.0, 2.0], probs: alloc::vec![0.3, 0.4, 0.3] },
        ],
        instruments: alloc::vec![Law::Bernoulli { p: 0.5 }],
        selection: SelectionIndex::Logistic {
            features: FeatureSpec::linear(&[Var::Z(0), Var::X(1)]),
            coef: alloc::vec![-1.0, 1.5, 0.5],
        },
        outcome_m1: OutcomeEquation::new(alloc::vec![0.6, 0.4], alloc::vec![0.3, -0.6]),
        outcome_m0: OutcomeEquation::new(alloc::vec![1.0, 0.1], alloc::vec![-0.2, 0.4]),
        noise_scale: 0.2,
        mte_bound: Some(3.0),
    }
}
