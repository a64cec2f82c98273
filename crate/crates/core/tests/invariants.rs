use std::sync::OnceLock;

use encourage_core::linalg::RowMatrix;
use encourage_core::model::presets;
use encourage_core::mte::{fit_partially_linear_mte, fit_polynomial_mte, PartiallyLinearMte, PolynomialMte};
use encourage_core::policy::reference::{grid_best, GridOptions};
use encourage_core::policy::{self, Backend, ClassKind, Objective};
use encourage_core::propensity::{fit_logit, LogitOptions};
use encourage_core::{FeatureSpec, MarginalEffect, PropensityModel, Var};
use proptest::prelude::*;

fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (5usize..25).prop_flat_map(|n| {
        (proptest::collection::vec(-2.0f64..2.0, n), proptest::collection::vec(-3.0f64..3.0, 2 * n))
    })
}

fn labels_of(rule: &encourage_core::Rule, v: &RowMatrix) -> Vec<bool> {
    v.rows().map(|r| rule.assign(r)).collect()
}

struct Fitted {
    logit: PropensityModel,
    poly: PolynomialMte,
    pl: PartiallyLinearMte,
}

fn fitted() -> &'static Fitted {
    static CELL: OnceLock<Fitted> = OnceLock::new();
    CELL.get_or_init(|| {
        let dgp = presets::canonical();
        let s = dgp.sample(4000, 11).unwrap();
        let feats = FeatureSpec::linear(&[Var::Z(0), Var::Z(1), Var::X(1)]);
        let logit = fit_logit(&s, &feats, &LogitOptions::default()).unwrap();
        let poly = fit_polynomial_mte(&s, &logit, 3).unwrap();
        let pl = fit_partially_linear_mte(&s, &logit, 0.1, &[]).unwrap();
        Fitted { logit, poly, pl }
    })
}

fn within(m: &dyn MarginalEffect, x: &[f64], t: f64) -> f64 {
    let (lo, hi) = m.identified_range(x, &[0.0, 0.0]);
    lo + t * (hi - lo)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn les_beats_both_constants((w, v) in instance()) {
        let n = w.len();
        let v = RowMatrix::from_vec(n, 2, v).unwrap();
        let obj = Objective::new(&w, &v).unwrap();
        let rule = policy::solve(&obj, ClassKind::Les, Backend::Enumerate).unwrap();
        let got = obj.welfare(&labels_of(&rule, &v));
        prop_assert!(got >= -1e-12);
        prop_assert!(got >= obj.welfare(&vec![true; n]) - 1e-12);
    }

    #[test]
    fn positive_rescaling_keeps_an_argmax((w, v) in instance(), factor in 0.01f64..100.0) {
        let n = w.len();
        let v = RowMatrix::from_vec(n, 2, v).unwrap();
        let obj = Objective::new(&w, &v).unwrap();
        let best = obj.welfare(&labels_of(&policy::solve(&obj, ClassKind::Les, Backend::Enumerate).unwrap(), &v));
        let scaled: Vec<f64> = w.iter().map(|x| factor * x).collect();
        let sobj = Objective::new(&scaled, &v).unwrap();
        for class in [ClassKind::Les, ClassKind::Ta] {
            let rule = policy::solve(&sobj, class, Backend::Enumerate).unwrap();
            let lab = labels_of(&rule, &v);
            let unscaled = obj.welfare(&lab);
            let direct = obj.welfare(&labels_of(&policy::solve(&obj, class, Backend::Enumerate).unwrap(), &v));
            prop_assert!((unscaled - direct).abs() <= 1e-9 * (1.0 + best.abs()));
        }
    }

    #[test]
    fn unbounded_budget_matches_unconstrained((w, v) in instance(), c in proptest::collection::vec(0.0f64..1.0, 25)) {
        let n = w.len();
        let v = RowMatrix::from_vec(n, 2, v).unwrap();
        let c0 = vec![0.0; n];
        let c1 = c[..n].to_vec();
        let free = Objective::new(&w, &v).unwrap();
        let capped = Objective::new(&w, &v).unwrap().with_budget(&c0, &c1, f64::INFINITY).unwrap();
        for class in [ClassKind::Les, ClassKind::Ta] {
            let a = labels_of(&policy::solve(&free, class, Backend::Enumerate).unwrap(), &v);
            let b = labels_of(&policy::solve(&capped, class, Backend::Enumerate).unwrap(), &v);
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn exact_search_dominates_the_reference_grid((w, v) in instance()) {
        let n = w.len();
        let v = RowMatrix::from_vec(n, 2, v).unwrap();
        let obj = Objective::new(&w, &v).unwrap();
        let opts = GridOptions { directions: 64, refine: 16, quantiles: 16 };
        for class in [ClassKind::Les, ClassKind::Ta] {
            let exact = obj.welfare(&labels_of(&policy::solve(&obj, class, Backend::Enumerate).unwrap(), &v));
            let (_, grid) = grid_best(&obj, class, &opts).unwrap();
            prop_assert!(grid <= exact + 1e-12);
        }
    }

    #[test]
    fn mte_integrals_are_additive_and_antisymmetric(x2 in 0.0f64..1.0, a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0) {
        let f = fitted();
        let x = [1.0, x2];
        let z = [0.0, 0.0];
        for m in [&f.poly as &dyn MarginalEffect, &f.pl as &dyn MarginalEffect] {
            let (ua, ub, uc) = (within(m, &x, a), within(m, &x, b), within(m, &x, c));
            let ab = m.integrate(&x, &z, ua, ub).unwrap();
            let bc = m.integrate(&x, &z, ub, uc).unwrap();
            let ac = m.integrate(&x, &z, ua, uc).unwrap();
            prop_assert!((ab + bc - ac).abs() <= 1e-9);
            prop_assert!((ab + m.integrate(&x, &z, ub, ua).unwrap()).abs() <= 1e-12);
            prop_assert_eq!(m.integrate(&x, &z, ua, ua).unwrap(), 0.0);
        }
    }

    #[test]
    fn polynomial_mte_respects_its_bound(x2 in -5.0f64..5.0, u in 0.0f64..1.0) {
        let f = fitted();
        let x = [1.0, x2];
        let bound = f.poly.bound(&[1.0, x2.abs()]);
        prop_assert!(f.poly.eval(u, &x, &[0.0, 0.0]).unwrap().abs() <= bound + 1e-12);
    }

    #[test]
    fn trimmed_propensity_stays_inside_bounds(x2 in -50.0f64..50.0, z1 in -50.0f64..50.0, z2 in -50.0f64..50.0) {
        let f = fitted();
        let p = f.logit.predict(&[1.0, x2], &[z1, z2]);
        prop_assert!((f.logit.trim_eps..=1.0 - f.logit.trim_eps).contains(&p));
    }
}
