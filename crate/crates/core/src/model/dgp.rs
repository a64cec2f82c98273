use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

#[allow(unused_imports)]
use crate::math::Float;
use crate::error::{config, Error, Result};
use crate::features::FeatureSpec;
use crate::linalg::RowMatrix;
use crate::math::logistic;
use crate::model::{Law, ManipulationPair, Sample};
use crate::mte::PolyTheta;
use crate::rng::{purpose, stream};

/// Nodes of the composite trapezoid rule used when an MTE is not polynomial in `u`.
pub const TRAPEZOID_NODES: usize = 512;

/// Normalized latent index `ν(x, z)`, equal to the propensity score.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum SelectionIndex {
    Logistic { features: FeatureSpec, coef: Vec<f64> },
    Constant { p: f64 },
}

impl SelectionIndex {
    pub fn value(&self, x: &[f64], z: &[f64]) -> f64 {
        match self {
            SelectionIndex::Logistic { features, coef } => {
                let t: f64 = features.terms.iter().zip(coef).map(|(f, c)| c * f.value(x, z)).sum();
                logistic(t)
            }
            SelectionIndex::Constant { p } => *p,
        }
    }
}

/// Sinusoidal component `amplitude·sin(2π·frequency·u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Wave {
    pub amplitude: f64,
    pub frequency: f64,
}

/// `m_d(x, u) = x'β + Σ_k c_k u^k [+ wave(u)]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OutcomeEquation {
    pub beta: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub u_poly: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub wave: Option<Wave>,
}

impl OutcomeEquation {
    pub fn new(beta: Vec<f64>, u_poly: Vec<f64>) -> Self {
        OutcomeEquation { beta, u_poly, wave: None }
    }

    pub fn linear_part(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.beta).map(|(a, b)| a * b).sum()
    }

    pub fn u_part(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.u_poly.iter().rev() {
            acc = acc * u + c;
        }
        if let Some(w) = self.wave {
            acc += w.amplitude * (2.0 * core::f64::consts::PI * w.frequency * u).sin();
        }
        acc
    }

    pub fn value(&self, x: &[f64], u: f64) -> f64 {
        self.linear_part(x) + self.u_part(u)
    }

    /// Antiderivative of the polynomial part of `u_part`, zero at 0.
    fn poly_antiderivative(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for (k, c) in self.u_poly.iter().enumerate().rev() {
            acc = acc * u + c / (k + 1) as f64;
        }
        acc * u
    }

    pub fn is_polynomial(&self) -> bool {
        self.wave.is_none()
    }

    fn bound(&self, xb: &[f64]) -> f64 {
        let lin: f64 = self.beta.iter().zip(xb).map(|(b, x)| b.abs() * x).sum();
        lin + self.u_poly.iter().map(|c| c.abs()).sum::<f64>() + self.wave.map_or(0.0, |w| w.amplitude.abs())
    }
}

/// Generalized Roy model: `D = 1{ν(X, Z) ≥ U}` with `U ~ Unif[0, 1]`
/// independent of `(X, Z)`, and `Y = m_D(X, U) + noise`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StructuralDgp {
    pub covariates: Vec<Law>,
    pub instruments: Vec<Law>,
    pub selection: SelectionIndex,
    pub outcome_m1: OutcomeEquation,
    pub outcome_m0: OutcomeEquation,
    pub noise_scale: f64,
    /// Declared bound on `|MTE|`; checked against the bound implied by the
    /// parameters.
    #[cfg_attr(feature = "serde", serde(default))]
    pub mte_bound: Option<f64>,
}

impl StructuralDgp {
    pub fn dx(&self) -> usize {
        self.covariates.len()
    }

    pub fn dz(&self) -> usize {
        self.instruments.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.instruments.is_empty() {
            return Err(config("at least one instrument is required"));
        }
        for law in self.covariates.iter().chain(&self.instruments) {
            law.validate()?;
        }
        for (name, eq) in [("outcome_m1", &self.outcome_m1), ("outcome_m0", &self.outcome_m0)] {
            if eq.beta.len() != self.dx() {
                return Err(config(alloc::format!(
                    "{name} has {} coefficients but there are {} covariates",
                    eq.beta.len(),
                    self.dx()
                )));
            }
        }
        match &self.selection {
            SelectionIndex::Logistic { features, coef } => {
                features.check_dims(self.dx(), self.dz())?;
                if features.len() != coef.len() {
                    return Err(config("selection index: features and coefficients differ in length"));
                }
            }
            SelectionIndex::Constant { p } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(config("constant selection index must lie in [0, 1]"));
                }
            }
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(config("noise_scale must be finite and non-negative"));
        }
        let implied = self.implied_mte_bound();
        if !implied.is_finite() {
            return Err(config("MTE is unbounded: a covariate with an MTE loading has unbounded support"));
        }
        if let Some(m) = self.mte_bound {
            if implied > m {
                return Err(config(alloc::format!("declared MTE bound {m} is below the implied bound {implied}")));
            }
        }
        Ok(())
    }

    /// Bound on `|MTE(u, x)|` over `[0, 1] × support(X)`.
    pub fn implied_mte_bound(&self) -> f64 {
        let xb: Vec<f64> = self.covariates.iter().map(Law::abs_bound).collect();
        let diff = OutcomeEquation {
            beta: self.outcome_m1.beta.iter().zip(&self.outcome_m0.beta).map(|(a, b)| a - b).collect(),
            u_poly: Vec::new(),
            wave: None,
        };
        // `0·∞` is NaN; covariates without a loading do not count.
        let lin: f64 = diff
            .beta
            .iter()
            .zip(&xb)
            .filter(|(b, _)| **b != 0.0)
            .map(|(b, x)| b.abs() * x)
            .sum();
        let u1 = OutcomeEquation { beta: Vec::new(), ..self.outcome_m1.clone() };
        let u0 = OutcomeEquation { beta: Vec::new(), ..self.outcome_m0.clone() };
        lin + u1.bound(&[]) + u0.bound(&[])
    }

    pub fn propensity(&self, x: &[f64], z: &[f64]) -> f64 {
        self.selection.value(x, z)
    }

    pub fn outcome(&self, treated: bool, x: &[f64], u: f64) -> f64 {
        if treated {
            self.outcome_m1.value(x, u)
        } else {
            self.outcome_m0.value(x, u)
        }
    }

    /// `m1(x, u) − m0(x, u)` without a domain check.
    pub fn mte(&self, u: f64, x: &[f64]) -> f64 {
        self.outcome_m1.value(x, u) - self.outcome_m0.value(x, u)
    }

    /// Signed `∫_lo^hi MTE(u, x) du`: closed form for polynomial outcome
    /// equations, a 512-node trapezoid rule otherwise.
    pub fn mte_integral(&self, x: &[f64], lo: f64, hi: f64) -> f64 {
        if lo == hi {
            return 0.0;
        }
        let (m1, m0) = (&self.outcome_m1, &self.outcome_m0);
        if m1.is_polynomial() && m0.is_polynomial() {
            let lin = (m1.linear_part(x) - m0.linear_part(x)) * (hi - lo);
            lin + (m1.poly_antiderivative(hi) - m1.poly_antiderivative(lo))
                - (m0.poly_antiderivative(hi) - m0.poly_antiderivative(lo))
        } else {
            let (a, b, sign) = if lo <= hi { (lo, hi, 1.0) } else { (hi, lo, -1.0) };
            let k = TRAPEZOID_NODES - 1;
            let step = (b - a) / k as f64;
            let mut s = 0.5 * (self.mte(a, x) + self.mte(b, x));
            for i in 1..k {
                s += self.mte(a + step * i as f64, x);
            }
            sign * s * step
        }
    }

    /// `φ(x, u) = E[Y | X = x, p(X, Z) = u] = ∫_u^1 m0 + ∫_0^u m1`.
    pub fn conditional_mean(&self, x: &[f64], u: f64) -> f64 {
        self.outcome_integral(false, x, 0.0, 1.0) + self.mte_integral(x, 0.0, u)
    }

    fn outcome_integral(&self, treated: bool, x: &[f64], lo: f64, hi: f64) -> f64 {
        let m = if treated { &self.outcome_m1 } else { &self.outcome_m0 };
        if m.is_polynomial() {
            m.linear_part(x) * (hi - lo) + m.poly_antiderivative(hi) - m.poly_antiderivative(lo)
        } else {
            let k = TRAPEZOID_NODES - 1;
            let step = (hi - lo) / k as f64;
            let mut s = 0.5 * (m.value(x, lo) + m.value(x, hi));
            for i in 1..k {
                s += m.value(x, lo + step * i as f64);
            }
            s * step
        }
    }

    pub fn draw_xz<R: Rng + ?Sized>(&self, rng: &mut R, x: &mut [f64], z: &mut [f64]) {
        for (v, law) in x.iter_mut().zip(&self.covariates) {
            *v = law.sample(rng);
        }
        for (v, law) in z.iter_mut().zip(&self.instruments) {
            *v = law.sample(rng);
        }
    }

    /// Draws `n` records. Identical `(dgp, n, seed)` give identical samples.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Sample> {
        self.validate()?;
        if n == 0 {
            return Err(config("sample size must be at least 1"));
        }
        let mut rng = stream(seed, purpose::SAMPLE);
        let (dx, dz) = (self.dx(), self.dz());
        let mut x = RowMatrix::zeros(n, dx);
        let mut z = RowMatrix::zeros(n, dz);
        let mut y = Vec::with_capacity(n);
        let mut d = Vec::with_capacity(n);
        let mut us = Vec::with_capacity(n);
        for i in 0..n {
            for (j, law) in self.covariates.iter().enumerate() {
                x.set(i, j, law.sample(&mut rng));
            }
            for (k, law) in self.instruments.iter().enumerate() {
                z.set(i, k, law.sample(&mut rng));
            }
            let u: f64 = rng.random();
            let e: f64 = StandardNormal.sample(&mut rng);
            let treated = self.propensity(x.row(i), z.row(i)) >= u;
            y.push(self.outcome(treated, x.row(i), u) + self.noise_scale * e);
            d.push(if treated { 1.0 } else { 0.0 });
            us.push(u);
        }
        Sample::new(y, d, x, z, Some(us))
    }

    /// `g(x, z) = (f_{X,α1(Z)} − f_{X,α0(Z)}) / f_{X,Z}` at `(x, z)`. Components
    /// are independent and only `z1` moves, so only the `Z1` factor survives.
    pub fn density_ratio(&self, pair: &ManipulationPair, z: &[f64]) -> Result<f64> {
        let law = &self.instruments[0];
        let base = law.density(z[0]);
        if base <= 0.0 {
            return Err(Error::Domain(alloc::format!("z1 = {} is outside the instrument support", z[0])));
        }
        let f1 = pair.alpha1.pushforward_density(law, z[0])?;
        let f0 = pair.alpha0.pushforward_density(law, z[0])?;
        Ok((f1 - f0) / base)
    }

    /// True coefficients of the polynomial MTE model with `J` powers of the
    /// propensity: `E[Y|X=x, p] = (1−p)x'β0 + p x'β1 + Σ_{j≥2} η_j p^j`.
    /// Needs a constant first covariate equal to 1 and polynomial outcome
    /// equations of low enough degree.
    pub fn polynomial_theta(&self, j_max: usize) -> Result<PolyTheta> {
        if !matches!(self.covariates.first(), Some(Law::Constant { value }) if *value == 1.0) {
            return Err(config("polynomial MTE coefficients need x1 ≡ 1"));
        }
        if !(self.outcome_m1.is_polynomial() && self.outcome_m0.is_polynomial()) {
            return Err(config("outcome equations are not polynomial in u"));
        }
        let c1 = &self.outcome_m1.u_poly;
        let c0 = &self.outcome_m0.u_poly;
        let deg = c1.len().max(c0.len());
        let coef = |c: &Vec<f64>, k: usize| c.get(k).copied().unwrap_or(0.0);
        for k in j_max..deg {
            if coef(c1, k) != coef(c0, k) {
                return Err(config(alloc::format!("MTE has degree {} in u, above J − 1 = {}", k, j_max - 1)));
            }
        }
        // The common part of m1 and m0 of degree ≥ J still enters E[Y|X, p]
        // through H0(1) only, a constant.
        let h0_at_1: f64 = c0.iter().enumerate().map(|(k, c)| c / (k + 1) as f64).sum();
        let mut beta0 = self.outcome_m0.beta.clone();
        let mut beta1 = self.outcome_m1.beta.clone();
        beta0[0] += h0_at_1;
        beta1[0] += h0_at_1 + (coef(c1, 0) - coef(c0, 0));
        let eta = (2..=j_max).map(|j| (coef(c1, j - 1) - coef(c0, j - 1)) / j as f64).collect();
        Ok(PolyTheta { beta0, beta1, eta })
    }

    /// `E[ν(X, Z)]` by product quadrature over the independent components.
    pub fn expected_takeup(&self, nodes: usize) -> f64 {
        let grids: Vec<Vec<(f64, f64)>> =
            self.covariates.iter().chain(&self.instruments).map(|l| l.quadrature(nodes)).collect();
        let dx = self.dx();
        let mut point = alloc::vec![0.0; grids.len()];
        fn rec(
            dgp: &StructuralDgp,
            grids: &[Vec<(f64, f64)>],
            k: usize,
            w: f64,
            point: &mut [f64],
            dx: usize,
        ) -> f64 {
            if k == grids.len() {
                return w * dgp.propensity(&point[..dx], &point[dx..]);
            }
            let mut s = 0.0;
            for &(v, wk) in &grids[k] {
                point[k] = v;
                s += rec(dgp, grids, k + 1, w * wk, point, dx);
            }
            s
        }
        rec(self, &grids, 0, 1.0, &mut point, dx)
    }
}
