use alloc::vec::Vec;

use nalgebra::DVector;

use super::local_poly::multi_indices;
use super::{check_trim, varying_vars, PropensityKind, PropensityModel};
#[allow(unused_imports)]
use crate::math::Float;
use crate::error::{config, Result};
use crate::features::{FeatureSpec, Var};
use crate::linalg::{lambda_min, pinv_solve, RowMatrix};

use crate::model::Sample;
use crate::stats::quantile;

/// Requested sieve. `vars = None` uses every non-constant column.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum SeriesBasis {
    /// First `k` monomials in graded order (1, x, y, x², xy, y², …).
    Polynomial { vars: Option<Vec<Var>>, k: usize },
    /// Additive cubic truncated-power splines with `k` terms: intercept,
    /// powers 1 to 3 of every regressor, then knots at sample quantiles
    /// assigned round-robin.
    Spline { vars: Option<Vec<Var>>, k: usize },
    /// Explicit terms.
    Terms { features: FeatureSpec },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum BasisTerm {
    Monomial { powers: Vec<(Var, u32)> },
    /// `(v − knot)³₊`.
    Knot { var: Var, knot: f64 },
}

impl BasisTerm {
    pub fn value(&self, x: &[f64], z: &[f64]) -> f64 {
        match self {
            BasisTerm::Monomial { powers } => powers.iter().map(|(v, e)| v.value(x, z).powi(*e as i32)).product(),
            BasisTerm::Knot { var, knot } => {
                let t = var.value(x, z) - knot;
                if t > 0.0 {
                    t * t * t
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SeriesFit {
    pub terms: Vec<BasisTerm>,
    pub coef: Vec<f64>,
    /// `max_i ‖b^k(x̃_i)‖`.
    pub zeta_k: f64,
    /// `λ_min(E_n b b')^{-1/2}`; infinite for a singular Gram matrix.
    pub lambda_k: f64,
}

impl SeriesFit {
    pub fn predict(&self, x: &[f64], z: &[f64]) -> f64 {
        self.terms.iter().zip(&self.coef).map(|(t, c)| c * t.value(x, z)).sum()
    }
}

fn build_terms(sample: &Sample, basis: &SeriesBasis) -> Result<Vec<BasisTerm>> {
    let pick = |vars: &Option<Vec<Var>>| vars.clone().unwrap_or_else(|| varying_vars(sample));
    let terms = match basis {
        SeriesBasis::Terms { features } => {
            features.check_dims(sample.dx(), sample.dz())?;
            features
                .terms
                .iter()
                .map(|t| {
                    let mut powers: Vec<(Var, u32)> = Vec::new();
                    for v in &t.0 {
                        match powers.iter_mut().find(|(w, _)| w == v) {
                            Some(p) => p.1 += 1,
                            None => powers.push((*v, 1)),
                        }
                    }
                    BasisTerm::Monomial { powers }
                })
                .collect()
        }
        SeriesBasis::Polynomial { vars, k } => {
            let vars = pick(vars);
            let mut out = Vec::with_capacity(*k);
            let mut degree = 0;
            while out.len() < *k {
                if vars.is_empty() && degree > 0 {
                    break;
                }
                let prev = if degree == 0 { 0 } else { multi_indices(vars.len(), degree - 1).len() };
                for idx in multi_indices(vars.len(), degree).into_iter().skip(prev) {
                    if out.len() == *k {
                        break;
                    }
                    let powers = vars.iter().zip(&idx).filter(|(_, &e)| e > 0).map(|(v, &e)| (*v, e)).collect();
                    out.push(BasisTerm::Monomial { powers });
                }
                degree += 1;
            }
            out
        }
        SeriesBasis::Spline { vars, k } => {
            let vars = pick(vars);
            let mut out = alloc::vec![BasisTerm::Monomial { powers: Vec::new() }];
            for e in 1..=3 {
                for v in &vars {
                    out.push(BasisTerm::Monomial { powers: alloc::vec![(*v, e)] });
                }
            }
            out.truncate(*k);
            if *k > out.len() && !vars.is_empty() {
                let left = *k - out.len();
                let d = vars.len();
                for (j, v) in vars.iter().enumerate() {
                    let m = left / d + usize::from(j < left % d);
                    let col: Vec<f64> = (0..sample.n()).map(|i| v.value(sample.x_row(i), sample.z_row(i))).collect();
                    for q in 1..=m {
                        out.push(BasisTerm::Knot { var: *v, knot: quantile(&col, q as f64 / (m + 1) as f64) });
                    }
                }
            }
            out
        }
    };
    for t in &terms {
        if let BasisTerm::Monomial { powers } = t {
            let vars: Vec<Var> = powers.iter().map(|p| p.0).collect();
            FeatureSpec::vars(&vars).check_dims(sample.dx(), sample.dz())?;
        }
    }
    Ok(terms)
}

/// Least-squares series regression of `D` on a sieve, solved with the
/// Moore–Penrose pseudo-inverse so singular Gram matrices are allowed.
pub fn fit_series(sample: &Sample, basis: &SeriesBasis, trim_eps: f64) -> Result<PropensityModel> {
    check_trim(trim_eps)?;
    let terms = build_terms(sample, basis)?;
    let (n, k) = (sample.n(), terms.len());
    if k == 0 {
        return Err(config("series basis is empty"));
    }
    if k > n {
        return Err(config(alloc::format!("series with {k} terms needs at least {k} rows, got {n}")));
    }
    let mut design = RowMatrix::zeros(n, k);
    let mut zeta = 0.0f64;
    for i in 0..n {
        let row = design.row_mut(i);
        for (c, t) in terms.iter().enumerate() {
            row[c] = t.value(sample.x_row(i), sample.z_row(i));
        }
        zeta = zeta.max(row.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    let b = design.to_dmatrix();
    let gram = b.transpose() * &b / n as f64;
    let lmin = lambda_min(&gram);
    let lambda_k = if lmin > 1e-12 * gram.amax() { 1.0 / lmin.sqrt() } else { f64::INFINITY };
    let coef = pinv_solve(&b, &DVector::from_column_slice(sample.d()));
    Ok(PropensityModel {
        fit: PropensityKind::Series(SeriesFit { terms, coef: coef.iter().copied().collect(), zeta_k: zeta, lambda_k }),
        trim_eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;

    fn series(m: &PropensityModel) -> &SeriesFit {
        match &m.fit {
            PropensityKind::Series(f) => f,
            _ => unreachable!(),
        }
    }

    #[test]
    fn constant_basis_is_the_mean() {
        let s = presets::canonical().sample(700, 1).unwrap();
        let m = fit_series(&s, &SeriesBasis::Polynomial { vars: None, k: 1 }, 1e-3).unwrap();
        assert!((m.predict(&[1.0, 0.3], &[1.0, 1.0]) - crate::stats::mean(s.d())).abs() < 1e-12);
    }

    #[test]
    fn graded_order() {
        let s = presets::canonical().sample(50, 1).unwrap();
        let m = fit_series(&s, &SeriesBasis::Polynomial { vars: Some(alloc::vec![Var::Z(0), Var::Z(1)]), k: 5 }, 1e-3)
            .unwrap();
        let t = &series(&m).terms;
        assert_eq!(t[1], BasisTerm::Monomial { powers: alloc::vec![(Var::Z(0), 1)] });
        assert_eq!(t[2], BasisTerm::Monomial { powers: alloc::vec![(Var::Z(1), 1)] });
        assert_eq!(t[3], BasisTerm::Monomial { powers: alloc::vec![(Var::Z(0), 2)] });
        assert_eq!(t[4], BasisTerm::Monomial { powers: alloc::vec![(Var::Z(0), 1), (Var::Z(1), 1)] });
    }

    #[test]
    fn spline_knots_fill_round_robin() {
        let s = presets::canonical().sample(200, 1).unwrap();
        let m = fit_series(&s, &SeriesBasis::Spline { vars: Some(alloc::vec![Var::Z(0), Var::Z(1)]), k: 10 }, 1e-3)
            .unwrap();
        let knots = series(&m).terms.iter().filter(|t| matches!(t, BasisTerm::Knot { .. })).count();
        assert_eq!(knots, 3);
        assert!(series(&m).lambda_k.is_finite());
    }

    #[test]
    fn duplicated_column_matches_deduplicated_fit() {
        let s = presets::canonical().sample(600, 2).unwrap();
        let a = FeatureSpec::parse(&["1", "z1", "x2"]).unwrap();
        let b = FeatureSpec::parse(&["1", "z1", "z1", "x2"]).unwrap();
        let ma = fit_series(&s, &SeriesBasis::Terms { features: a }, 1e-3).unwrap();
        let mb = fit_series(&s, &SeriesBasis::Terms { features: b }, 1e-3).unwrap();
        assert!(series(&mb).lambda_k.is_infinite());
        for i in 0..20 {
            let (x, z) = (s.x_row(i), s.z_row(i));
            assert!((series(&ma).predict(x, z) - series(&mb).predict(x, z)).abs() < 1e-9);
        }
    }

    #[test]
    fn too_many_terms() {
        let s = presets::canonical().sample(5, 2).unwrap();
        assert!(fit_series(&s, &SeriesBasis::Polynomial { vars: None, k: 6 }, 1e-3).is_err());
    }
}
