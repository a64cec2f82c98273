use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::{check_trim, varying_vars, PropensityKind, PropensityModel, DEFAULT_TRIM_EPS};
#[allow(unused_imports)]
use crate::math::Float;
use crate::error::{config, Result};
use crate::features::Var;
use crate::linalg::{lambda_min, RowMatrix};
use crate::math::std_normal_pdf;
use crate::model::Sample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Kernel {
    #[default]
    Gaussian,
    Epanechnikov,
}

impl Kernel {
    fn weight(&self, t: f64) -> f64 {
        match self {
            Kernel::Gaussian if t.abs() <= 8.0 => std_normal_pdf(t),
            Kernel::Epanechnikov if t.abs() < 1.0 => 0.75 * (1.0 - t * t),
            _ => 0.0,
        }
    }
}

/// Threshold on the smallest eigenvalue of the local Gram matrix below
/// which the prediction is set to 0.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", content = "value", rename_all = "snake_case"))]
pub enum EigenTrim {
    /// `1 / ln n`.
    #[default]
    LogN,
    Off,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct LocalPolyOptions {
    /// Regressors; every non-constant column of `(x, z)` when `None`.
    pub vars: Option<Vec<Var>>,
    pub degree: usize,
    /// In units of each regressor's sample range.
    pub bandwidth: f64,
    pub kernel: Kernel,
    pub eigen_trim: EigenTrim,
    pub trim_eps: f64,
}

impl Default for LocalPolyOptions {
    fn default() -> Self {
        LocalPolyOptions {
            vars: None,
            degree: 1,
            bandwidth: 0.1,
            kernel: Kernel::Gaussian,
            eigen_trim: EigenTrim::LogN,
            trim_eps: DEFAULT_TRIM_EPS,
        }
    }
}

/// A local polynomial fit; predictions solve the local weighted least
/// squares problem at the query point against the stored training data.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LocalPolyFit {
    pub vars: Vec<Var>,
    pub degree: usize,
    pub bandwidth: f64,
    pub kernel: Kernel,
    pub eigen_threshold: f64,
    lo: Vec<f64>,
    span: Vec<f64>,
    /// Multi-indices of the monomial basis, intercept first.
    powers: Vec<Vec<u32>>,
    points: RowMatrix,
    d: Vec<f64>,
}

pub(super) fn multi_indices(dim: usize, degree: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for total in 0..=degree {
        let mut cur = alloc::vec![0u32; dim];
        fill(&mut out, &mut cur, 0, total as u32);
    }
    out
}

fn fill(out: &mut Vec<Vec<u32>>, cur: &mut Vec<u32>, pos: usize, left: u32) {
    if pos + 1 >= cur.len() {
        if let Some(last) = cur.last_mut() {
            *last = left;
            out.push(cur.clone());
            *cur.last_mut().unwrap() = 0;
        } else if left == 0 {
            out.push(Vec::new());
        }
        return;
    }
    for k in (0..=left).rev() {
        cur[pos] = k;
        fill(out, cur, pos + 1, left - k);
    }
    cur[pos] = 0;
}

impl LocalPolyFit {
    fn scaled(&self, x: &[f64], z: &[f64], out: &mut [f64]) {
        for (k, v) in self.vars.iter().enumerate() {
            out[k] = (v.value(x, z) - self.lo[k]) / self.span[k];
        }
    }

    /// Intercept of the local fit, 0 when the eigenvalue trim bites.
    pub fn predict(&self, x: &[f64], z: &[f64]) -> f64 {
        let dim = self.vars.len();
        let mut q = alloc::vec![0.0; dim];
        self.scaled(x, z, &mut q);
        self.predict_scaled(&q, None)
    }

    pub(crate) fn predict_scaled(&self, q: &[f64], skip: Option<usize>) -> f64 {
        let dim = q.len();
        let k = self.powers.len();
        let h = self.bandwidth;
        let mut b = DMatrix::<f64>::zeros(k, k);
        let mut r = DVector::<f64>::zeros(k);
        let mut t = alloc::vec![0.0; dim];
        let mut u = alloc::vec![0.0; k];
        let mut count = 0usize;
        for (i, p) in self.points.rows().enumerate() {
            if skip == Some(i) {
                continue;
            }
            count += 1;
            let mut w = 1.0;
            for j in 0..dim {
                t[j] = (p[j] - q[j]) / h;
                w *= self.kernel.weight(t[j]);
                if w == 0.0 {
                    break;
                }
            }
            if w == 0.0 {
                continue;
            }
            for (a, pw) in self.powers.iter().enumerate() {
                u[a] = pw.iter().zip(&t).map(|(&e, &tj)| tj.powi(e as i32)).product();
            }
            for a in 0..k {
                let wa = w * u[a];
                r[a] += wa * self.d[i];
                for c in a..k {
                    b[(a, c)] += wa * u[c];
                }
            }
        }
        let norm = 1.0 / (count.max(1) as f64 * h.powi(dim as i32));
        for a in 0..k {
            r[a] *= norm;
            for c in a..k {
                b[(a, c)] *= norm;
                b[(c, a)] = b[(a, c)];
            }
        }
        if self.eigen_threshold > f64::NEG_INFINITY && !(lambda_min(&b) >= self.eigen_threshold) {
            return 0.0;
        }
        match b.cholesky() {
            Some(ch) => ch.solve(&r)[0],
            None => 0.0,
        }
    }

    pub(crate) fn training_point(&self, i: usize) -> &[f64] {
        self.points.row(i)
    }

    pub(crate) fn training_d(&self) -> &[f64] {
        &self.d
    }

    pub(crate) fn with_bandwidth(&self, h: f64) -> LocalPolyFit {
        LocalPolyFit { bandwidth: h, ..self.clone() }
    }
}

/// Local polynomial regression of `D` on the chosen regressors, each scaled
/// to its unit sample range. The prediction at `x̃` is the intercept of the
/// local fit times `1{λ_min(B(x̃)) ≥ threshold}`.
pub fn fit_local_poly(sample: &Sample, opts: &LocalPolyOptions) -> Result<PropensityModel> {
    check_trim(opts.trim_eps)?;
    if !(opts.bandwidth > 0.0 && opts.bandwidth.is_finite()) {
        return Err(config("local polynomial bandwidth must be positive"));
    }
    let vars = match &opts.vars {
        Some(v) => v.clone(),
        None => varying_vars(sample),
    };
    for v in &vars {
        crate::features::FeatureSpec::vars(&[*v]).check_dims(sample.dx(), sample.dz())?;
    }
    let n = sample.n();
    let dim = vars.len();
    let mut lo = alloc::vec![f64::INFINITY; dim];
    let mut hi = alloc::vec![f64::NEG_INFINITY; dim];
    for i in 0..n {
        for (k, v) in vars.iter().enumerate() {
            let val = v.value(sample.x_row(i), sample.z_row(i));
            lo[k] = lo[k].min(val);
            hi[k] = hi[k].max(val);
        }
    }
    let span: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| if b > a { b - a } else { 1.0 }).collect();
    let eigen_threshold = match opts.eigen_trim {
        EigenTrim::LogN => 1.0 / (n.max(3) as f64).ln(),
        EigenTrim::Off => f64::NEG_INFINITY,
        EigenTrim::Value(t) => t,
    };
    let mut fit = LocalPolyFit {
        vars,
        degree: opts.degree,
        bandwidth: opts.bandwidth,
        kernel: opts.kernel,
        eigen_threshold,
        lo,
        span,
        powers: multi_indices(dim, opts.degree),
        points: RowMatrix::zeros(n, dim),
        d: sample.d().to_vec(),
    };
    for i in 0..n {
        let mut row = alloc::vec![0.0; dim];
        fit.scaled(sample.x_row(i), sample.z_row(i), &mut row);
        fit.points.row_mut(i).copy_from_slice(&row);
    }
    Ok(PropensityModel { fit: PropensityKind::LocalPoly(fit), trim_eps: opts.trim_eps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;

    fn local(m: &PropensityModel) -> &LocalPolyFit {
        match &m.fit {
            PropensityKind::LocalPoly(f) => f,
            _ => unreachable!(),
        }
    }

    #[test]
    fn multi_index_counts() {
        assert_eq!(multi_indices(3, 1).len(), 4);
        assert_eq!(multi_indices(2, 2).len(), 6);
        assert_eq!(multi_indices(3, 0), alloc::vec![alloc::vec![0, 0, 0]]);
        assert_eq!(multi_indices(2, 1)[0], alloc::vec![0, 0]);
    }

    #[test]
    fn degree_zero_is_nadaraya_watson() {
        let s = presets::canonical().sample(300, 2).unwrap();
        let opts = LocalPolyOptions {
            vars: Some(alloc::vec![Var::Z(0)]),
            degree: 0,
            bandwidth: 0.2,
            eigen_trim: EigenTrim::Off,
            ..Default::default()
        };
        let m = fit_local_poly(&s, &opts).unwrap();
        let q = 1.7;
        let zs = s.z().column(0);
        let (lo, hi) = zs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, &v| (a.0.min(v), a.1.max(v)));
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..s.n() {
            let t = ((zs[i] - lo) / (hi - lo) - (q - lo) / (hi - lo)) / 0.2;
            let w = (-0.5 * t * t).exp();
            num += w * s.d()[i];
            den += w;
        }
        assert!((local(&m).predict(&[1.0, 0.0], &[q, 0.0]) - num / den).abs() < 1e-10);
    }

    #[test]
    fn constant_treatment_predicts_one() {
        let s = presets::canonical().sample(400, 3).unwrap();
        let s = Sample::new(s.y().to_vec(), alloc::vec![1.0; 400], s.x().clone(), s.z().clone(), None).unwrap();
        let m = fit_local_poly(&s, &LocalPolyOptions { bandwidth: 0.3, ..Default::default() }).unwrap();
        assert!((local(&m).predict(&[1.0, 0.5], &[2.0, 1.0]) - 1.0).abs() < 1e-9);
        assert_eq!(m.predict(&[1.0, 0.5], &[2.0, 1.0]), 1.0 - 1e-3);
    }

    #[test]
    fn empty_neighbourhood_is_trimmed_to_zero() {
        let s = presets::canonical().sample(400, 3).unwrap();
        let m = fit_local_poly(
            &s,
            &LocalPolyOptions { bandwidth: 0.01, kernel: Kernel::Epanechnikov, ..Default::default() },
        )
        .unwrap();
        assert_eq!(local(&m).predict(&[1.0, 9.0], &[50.0, 9.0]), 0.0);
        assert_eq!(m.predict(&[1.0, 9.0], &[50.0, 9.0]), 1e-3);
    }

    #[test]
    fn huge_bandwidth_matches_global_least_squares() {
        let s = presets::canonical().sample(500, 7).unwrap();
        let opts = LocalPolyOptions {
            vars: Some(alloc::vec![Var::Z(0), Var::X(1)]),
            degree: 1,
            bandwidth: 1e4,
            eigen_trim: EigenTrim::Off,
            ..Default::default()
        };
        let m = fit_local_poly(&s, &opts).unwrap();
        let mut ne = crate::linalg::NormalEquations::new(3);
        for i in 0..s.n() {
            ne.add(&[1.0, s.z_row(i)[0], s.x_row(i)[1]], s.d()[i], 1.0);
        }
        ne.finish();
        let b = crate::linalg::solve_spd(&ne.xtx, &ne.xty).unwrap();
        let (q1, q2) = (2.5, 0.4);
        let ols = b[0] + b[1] * q1 + b[2] * q2;
        assert!((local(&m).predict(&[1.0, q2], &[q1, 0.0]) - ols).abs() < 1e-6);
    }
}
