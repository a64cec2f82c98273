//! Small descriptive-statistics helpers.

use alloc::vec::Vec;

#[allow(unused_imports)]
use crate::math::Float;

/// A Monte Carlo or sampling estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    /// Mean and standard error of the mean of `xs`.
    pub fn from_draws(xs: &[f64]) -> Estimate {
        let (m, v) = mean_var(xs);
        Estimate { value: m, se: (v / xs.len().max(1) as f64).sqrt() }
    }

    /// Difference of two independent estimates.
    pub fn minus(self, other: Estimate) -> Estimate {
        Estimate { value: self.value - other.value, se: self.se.hypot(other.se) }
    }

    /// True when `|self − target| ≤ k·se`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.se
    }
}

/// Streaming mean and variance.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunningMean {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningMean {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn estimate(&self) -> Estimate {
        let var = if self.n > 1 { self.m2 / (self.n - 1) as f64 } else { 0.0 };
        Estimate { value: self.mean, se: (var / self.n.max(1) as f64).sqrt() }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean and unbiased variance (Welford).
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let mut m = 0.0;
    let mut s = 0.0;
    for (k, &x) in xs.iter().enumerate() {
        let d = x - m;
        m += d / (k + 1) as f64;
        s += d * (x - m);
    }
    let v = if xs.len() > 1 { s / (xs.len() - 1) as f64 } else { 0.0 };
    (m, v)
}

pub fn std_dev(xs: &[f64]) -> f64 {
    mean_var(xs).1.sqrt()
}

/// Linear-interpolation quantile (type 7).
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v: Vec<f64> = xs.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, q)
}

pub fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let mx = mean(x);
    let my = mean(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
