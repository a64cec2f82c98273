//! Marginal laws for covariate and instrument components.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

#[allow(unused_imports)]
use crate::math::Float;
use crate::error::{config, Result};
use crate::math::std_normal_pdf;

/// Distribution of a single covariate or instrument component. Components
/// of a DGP are drawn independently.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "law", rename_all = "snake_case"))]
pub enum Law {
    Constant { value: f64 },
    Uniform { lo: f64, hi: f64 },
    Bernoulli { p: f64 },
    Discrete { values: Vec<f64>, probs: Vec<f64> },
    Normal { mean: f64, sd: f64 },
}

impl Law {
    pub fn validate(&self) -> Result<()> {
        match self {
            Law::Constant { value } if value.is_finite() => Ok(()),
            Law::Uniform { lo, hi } if lo.is_finite() && hi.is_finite() && lo < hi => Ok(()),
            Law::Bernoulli { p } if (0.0..=1.0).contains(p) => Ok(()),
            Law::Discrete { values, probs } => {
                let total: f64 = probs.iter().sum();
                if values.is_empty()
                    || values.len() != probs.len()
                    || probs.iter().any(|p| !(*p >= 0.0))
                    || (total - 1.0).abs() > 1e-9
                    || values.iter().any(|v| !v.is_finite())
                {
                    Err(config(alloc::format!("invalid discrete law {values:?} / {probs:?}")))
                } else {
                    Ok(())
                }
            }
            Law::Normal { mean, sd } if mean.is_finite() && sd.is_finite() && *sd > 0.0 => Ok(()),
            other => Err(config(alloc::format!("invalid law {other:?}"))),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Law::Constant { value } => *value,
            Law::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Law::Bernoulli { p } => {
                if rng.random::<f64>() < *p {
                    1.0
                } else {
                    0.0
                }
            }
            Law::Discrete { values, probs } => {
                let t: f64 = rng.random();
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if t < acc {
                        return *v;
                    }
                }
                *values.last().expect("validated non-empty")
            }
            Law::Normal { mean, sd } => {
                let e: f64 = StandardNormal.sample(rng);
                mean + sd * e
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Law::Constant { value } => *value,
            Law::Uniform { lo, hi } => 0.5 * (lo + hi),
            Law::Bernoulli { p } => *p,
            Law::Discrete { values, probs } => values.iter().zip(probs).map(|(v, p)| v * p).sum(),
            Law::Normal { mean, .. } => *mean,
        }
    }

    /// Whether the law has a Lebesgue density.
    pub fn is_continuous(&self) -> bool {
        matches!(self, Law::Uniform { .. } | Law::Normal { .. })
    }

    /// Support points and probabilities of a discrete law.
    pub fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            Law::Constant { value } => Some(alloc::vec![(*value, 1.0)]),
            Law::Bernoulli { p } => Some(alloc::vec![(0.0, 1.0 - p), (1.0, *p)]),
            Law::Discrete { values, probs } => {
                Some(values.iter().copied().zip(probs.iter().copied()).collect())
            }
            _ => None,
        }
    }

    /// Density for continuous laws, probability mass for discrete ones.
    pub fn density(&self, t: f64) -> f64 {
        match self {
            Law::Uniform { lo, hi } => {
                if t >= *lo && t <= *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            Law::Normal { mean, sd } => std_normal_pdf((t - mean) / sd) / sd,
            _ => self
                .atoms()
                .unwrap_or_default()
                .iter()
                .filter(|(v, _)| (v - t).abs() <= 1e-12 * v.abs().max(1.0))
                .map(|(_, p)| p)
                .sum(),
        }
    }

    /// Smallest interval containing the support.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Law::Uniform { lo, hi } => (*lo, *hi),
            Law::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            _ => {
                let a = self.atoms().unwrap_or_default();
                let lo = a.iter().map(|x| x.0).fold(f64::INFINITY, f64::min);
                let hi = a.iter().map(|x| x.0).fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
        }
    }

    /// Sup of `|t|` over the support.
    pub fn abs_bound(&self) -> f64 {
        let (lo, hi) = self.bounds();
        lo.abs().max(hi.abs())
    }

    /// Nodes and weights integrating smooth functions against the law:
    /// Gauss–Legendre for uniform laws, Gauss–Legendre on ±8 sd for normal
    /// laws, the atoms themselves for discrete laws.
    pub fn quadrature(&self, k: usize) -> Vec<(f64, f64)> {
        match self {
            Law::Uniform { lo, hi } => gauss_legendre(k)
                .into_iter()
                .map(|(t, w)| (lo + 0.5 * (hi - lo) * (t + 1.0), 0.5 * w))
                .collect(),
            Law::Normal { mean, sd } => {
                let nodes: Vec<(f64, f64)> = gauss_legendre(k)
                    .into_iter()
                    .map(|(t, w)| (8.0 * t, 8.0 * w * std_normal_pdf(8.0 * t)))
                    .collect();
                let total: f64 = nodes.iter().map(|n| n.1).sum();
                nodes.into_iter().map(|(t, w)| (mean + sd * t, w / total)).collect()
            }
            _ => self.atoms().unwrap_or_default(),
        }
    }
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(k: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(k);
    let kf = k as f64;
    for i in 0..k {
        let mut t = (core::f64::consts::PI * (i as f64 + 0.75) / (kf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for j in 2..=k {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * t * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            if k == 1 {
                p0 = 1.0;
                p1 = t;
            }
            dp = kf * (t * p1 - p0) / (t * t - 1.0);
            let step = p1 / dp;
            t -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        out.push((t, 2.0 / ((1.0 - t * t) * dp * dp)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let q = gauss_legendre(5);
        let s: f64 = q.iter().map(|(t, w)| w * t.powi(8)).sum();
        assert!((s - 2.0 / 9.0).abs() < 1e-13);
        let s0: f64 = q.iter().map(|(_, w)| w).sum();
        assert!((s0 - 2.0).abs() < 1e-13);
    }

    #[test]
    fn normal_quadrature_moments() {
        let q = Law::Normal { mean: 1.0, sd: 2.0 }.quadrature(64);
        let m: f64 = q.iter().map(|(t, w)| w * t).sum();
        let v: f64 = q.iter().map(|(t, w)| w * (t - 1.0) * (t - 1.0)).sum();
        assert!((m - 1.0).abs() < 1e-10);
        assert!((v - 4.0).abs() < 1e-8);
    }

    #[test]
    fn invalid_laws_rejected() {
        assert!(Law::Uniform { lo: 1.0, hi: 1.0 }.validate().is_err());
        assert!(Law::Bernoulli { p: 1.5 }.validate().is_err());
        assert!(Law::Discrete { values: alloc::vec![0.0], probs: alloc::vec![0.5] }.validate().is_err());
        assert!(Law::Normal { mean: 0.0, sd: 0.0 }.validate().is_err());
    }

    #[test]
    fn discrete_sampling_frequencies() {
        let law = Law::Discrete { values: alloc::vec![0.0, 1.0, 2.0], probs: alloc::vec![0.2, 0.3, 0.5] };
        let mut rng = stream(1, 0);
        let n = 20_000;
        let twos = (0..n).filter(|_| law.sample(&mut rng) == 2.0).count() as f64 / n as f64;
        assert!((twos - 0.5).abs() < 0.02);
        assert!((law.density(1.0) - 0.3).abs() < 1e-12);
    }
}
