use alloc::vec::Vec;

use nalgebra::DVector;

use super::{check_trim, PropensityKind, PropensityModel, DEFAULT_TRIM_EPS};
use crate::error::{config, Error, Result};
use crate::features::FeatureSpec;
use crate::linalg::{collinear_columns, solve_spd, NormalEquations, RowMatrix};
use crate::math::{logistic, softplus};
use crate::model::Sample;

/// Linear indices beyond this magnitude are read as separation.
const SEPARATION_INDEX: f64 = 15.0;
const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct LogitOptions {
    pub trim_eps: f64,
    pub max_iter: usize,
    /// Stop when the sup-norm of the mean score is below this.
    pub tol: f64,
    /// Ridge penalty on the mean log-likelihood, used only after separation.
    pub ridge: f64,
}

impl Default for LogitOptions {
    fn default() -> Self {
        LogitOptions { trim_eps: DEFAULT_TRIM_EPS, max_iter: 100, tol: 1e-8, ridge: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LogitFit {
    pub features: FeatureSpec,
    pub coef: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Set when separation was detected and the ridge fit was used.
    pub separation: bool,
}

impl LogitFit {
    pub fn index(&self, x: &[f64], z: &[f64]) -> f64 {
        self.features.terms.iter().zip(&self.coef).map(|(t, c)| c * t.value(x, z)).sum()
    }

    pub fn predict(&self, x: &[f64], z: &[f64]) -> f64 {
        logistic(self.index(x, z))
    }
}

struct Newton {
    iterations: usize,
    converged: bool,
    coef: DVector<f64>,
}

/// Mean log-likelihood minus the ridge term.
fn objective(design: &RowMatrix, d: &[f64], coef: &DVector<f64>, ridge: f64) -> f64 {
    let mut ll = 0.0;
    for (row, &di) in design.rows().zip(d) {
        let eta: f64 = row.iter().zip(coef.iter()).map(|(a, b)| a * b).sum();
        ll += di * eta - softplus(eta);
    }
    ll / d.len() as f64 - 0.5 * ridge * coef.norm_squared()
}

fn newton(design: &RowMatrix, d: &[f64], ridge: f64, opts: &LogitOptions) -> Newton {
    let (n, k) = (design.nrows(), design.ncols());
    let mut coef = DVector::zeros(k);
    let mut value = objective(design, d, &coef, ridge);
    for it in 0..opts.max_iter {
        let mut ne = NormalEquations::new(k);
        let mut grad = DVector::zeros(k);
        for (row, &di) in design.rows().zip(d) {
            let eta: f64 = row.iter().zip(coef.iter()).map(|(a, b)| a * b).sum();
            let p = logistic(eta);
            ne.add(row, 0.0, p * (1.0 - p));
            for (g, r) in grad.iter_mut().zip(row) {
                *g += (di - p) * r;
            }
        }
        ne.finish();
        let mut hess = ne.xtx / n as f64;
        grad /= n as f64;
        grad -= &coef * ridge;
        for j in 0..k {
            hess[(j, j)] += ridge;
        }
        if grad.amax() < opts.tol {
            return Newton { iterations: it, converged: true, coef };
        }
        let step = match solve_spd(&hess, &grad) {
            Ok(s) => s,
            Err(_) => return Newton { iterations: it, converged: false, coef },
        };
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..=MAX_HALVINGS {
            let cand = &coef + &step * t;
            let v = objective(design, d, &cand, ridge);
            if v >= value {
                coef = cand;
                value = v;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            return Newton { iterations: it + 1, converged: false, coef };
        }
    }
    Newton { iterations: opts.max_iter, converged: false, coef }
}

/// Maximum-likelihood logit of `D` on the listed features by damped Newton
/// iterations. When the fit fails to converge or some fitted index exceeds
/// 15 in magnitude the data are treated as separated: the fit is redone with
/// a small ridge penalty and `separation` is set.
pub fn fit_logit(sample: &Sample, features: &FeatureSpec, opts: &LogitOptions) -> Result<PropensityModel> {
    check_trim(opts.trim_eps)?;
    features.check_dims(sample.dx(), sample.dz())?;
    let (n, k) = (sample.n(), features.len());
    if k == 0 {
        return Err(config("logit needs at least one feature"));
    }
    if n <= k {
        return Err(config(alloc::format!("logit with {k} features needs more than {k} rows, got {n}")));
    }
    let mut design = RowMatrix::zeros(n, k);
    for i in 0..n {
        features.eval_into(sample.x_row(i), sample.z_row(i), design.row_mut(i));
    }
    let bad = collinear_columns(&design.to_dmatrix());
    if !bad.is_empty() {
        return Err(Error::RankDeficient { columns: bad });
    }
    let separated = |fit: &Newton| {
        !fit.converged
            || design
                .rows()
                .any(|r| r.iter().zip(fit.coef.iter()).map(|(a, b)| a * b).sum::<f64>().abs() > SEPARATION_INDEX)
    };
    let mut fit = newton(&design, sample.d(), 0.0, opts);
    let separation = separated(&fit);
    if separation {
        fit = newton(&design, sample.d(), opts.ridge, opts);
    }
    Ok(PropensityModel {
        fit: PropensityKind::Logit(LogitFit {
            features: features.clone(),
            coef: fit.coef.iter().copied().collect(),
            iterations: fit.iterations,
            converged: fit.converged,
            separation,
        }),
        trim_eps: opts.trim_eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Var;
    use crate::model::presets;

    fn logit(model: &PropensityModel) -> &LogitFit {
        match &model.fit {
            PropensityKind::Logit(f) => f,
            _ => unreachable!(),
        }
    }

    #[test]
    fn constant_treatment_triggers_separation_fallback() {
        let s = presets::canonical().sample(500, 1).unwrap();
        let s = Sample::new(s.y().to_vec(), alloc::vec![1.0; 500], s.x().clone(), s.z().clone(), None).unwrap();
        let m = fit_logit(&s, &FeatureSpec::linear(&[Var::Z(0)]), &LogitOptions::default()).unwrap();
        assert!(logit(&m).separation);
        assert!(!m.warnings().is_empty());
        assert_eq!(m.predict(&[1.0, 0.5], &[2.0, 1.0]), 1.0 - 1e-3);
    }

    #[test]
    fn intercept_only_is_the_sample_mean() {
        let s = presets::canonical().sample(2000, 3).unwrap();
        let m = fit_logit(&s, &FeatureSpec::linear(&[]), &LogitOptions::default()).unwrap();
        let mean = crate::stats::mean(s.d());
        assert!((m.predict(&[1.0, 0.1], &[0.0, 0.0]) - mean).abs() < 1e-9);
        assert!(!logit(&m).separation);
    }

    #[test]
    fn predictions_invariant_to_affine_rescaling() {
        let s = presets::canonical().sample(3000, 4).unwrap();
        let spec = FeatureSpec::linear(&[Var::Z(0), Var::Z(1), Var::X(1)]);
        let a = fit_logit(&s, &spec, &LogitOptions::default()).unwrap();
        let mut z = s.z().clone();
        for i in 0..s.n() {
            let v = z.get(i, 0);
            z.set(i, 0, 3.0 * v - 7.0);
        }
        let t = Sample::new(s.y().to_vec(), s.d().to_vec(), s.x().clone(), z, None).unwrap();
        let b = fit_logit(&t, &spec, &LogitOptions::default()).unwrap();
        for i in (0..s.n()).step_by(97) {
            let pa = a.predict(s.x_row(i), s.z_row(i));
            let pb = b.predict(t.x_row(i), t.z_row(i));
            assert!((pa - pb).abs() < 1e-8);
        }
    }

    #[test]
    fn duplicated_feature_is_rank_deficient() {
        let s = presets::canonical().sample(200, 5).unwrap();
        let spec = FeatureSpec::linear(&[Var::Z(0), Var::Z(0)]);
        assert!(matches!(
            fit_logit(&s, &spec, &LogitOptions::default()),
            Err(Error::RankDeficient { columns }) if columns == alloc::vec![2]
        ));
    }
}
