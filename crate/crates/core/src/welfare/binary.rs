//! Welfare of binary encouragement rules when the instrument itself is
//! binary: the rule sets `Z = 1` for eligible units, so welfare is
//! identified from `E[Y | X, Z]` without looking at `D`.

use alloc::vec::Vec;

#[allow(unused_imports)]
use crate::math::Float;
use crate::error::{config, Error, Result};

use crate::model::Sample;
use crate::stats::{std_dev, Estimate};

/// Conditional means by arm, evaluated at every sample row.
struct ArmMeans {
    /// `Ê[Y | X, Z = 1]`, `Ê[Y | X, Z = 0]`.
    m1: Vec<f64>,
    m0: Vec<f64>,
    /// `Ê[D | X, Z = 1]`, `Ê[D | X, Z = 0]`.
    q1: Vec<f64>,
    q0: Vec<f64>,
    /// `P̂(Z = 1 | X)`.
    e: Vec<f64>,
}

fn binary_instrument(sample: &Sample) -> Result<Vec<bool>> {
    if sample.dz() != 1 {
        return Err(config("binary-instrument welfare needs exactly one instrument column"));
    }
    sample
        .z()
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v == 0.0 || v == 1.0 {
                Ok(v == 1.0)
            } else {
                Err(Error::Sample(alloc::format!("z1[{i}] = {v} is not binary")))
            }
        })
        .collect()
}

/// Cell means when covariates take few distinct values (at most one cell
/// per 20 rows), Gaussian-kernel local linear regression otherwise.
fn arm_means(sample: &Sample, z: &[bool]) -> Result<ArmMeans> {
    let n = sample.n();
    let mut cells: Vec<Vec<f64>> = Vec::new();
    let mut cell_of = Vec::with_capacity(n);
    for i in 0..n {
        let x = sample.x_row(i);
        let c = match cells.iter().position(|c| c.as_slice() == x) {
            Some(c) => c,
            None => {
                cells.push(x.to_vec());
                cells.len() - 1
            }
        };
        cell_of.push(c);
        if cells.len() * 20 > n {
            return local_means(sample, z);
        }
    }
    let k = cells.len();
    let mut sums = alloc::vec![[0.0f64; 6]; k];
    for i in 0..n {
        let s = &mut sums[cell_of[i]];
        let (y, d) = (sample.y()[i], sample.d()[i]);
        if z[i] {
            s[0] += 1.0;
            s[1] += y;
            s[2] += d;
        } else {
            s[3] += 1.0;
            s[4] += y;
            s[5] += d;
        }
    }
    let missing: Vec<usize> = (0..k).filter(|&c| sums[c][0] == 0.0 || sums[c][3] == 0.0).collect();
    if !missing.is_empty() {
        return Err(Error::MissingArm { cells: missing });
    }
    let at = |f: &dyn Fn(&[f64; 6]) -> f64| cell_of.iter().map(|&c| f(&sums[c])).collect::<Vec<f64>>();
    Ok(ArmMeans {
        m1: at(&|s| s[1] / s[0]),
        m0: at(&|s| s[4] / s[3]),
        q1: at(&|s| s[2] / s[0]),
        q0: at(&|s| s[5] / s[3]),
        e: at(&|s| s[0] / (s[0] + s[3])),
    })
}

fn local_means(sample: &Sample, z: &[bool]) -> Result<ArmMeans> {
    let n = sample.n();
    let cols: Vec<usize> = (0..sample.dx()).filter(|&j| std_dev(&sample.x().column(j)) > 0.0).collect();
    let d = cols.len().max(1) as f64;
    let rule = (4.0 / (d + 2.0)).powf(1.0 / (d + 4.0)) * (n as f64).powf(-1.0 / (d + 4.0));
    let h: Vec<f64> = cols.iter().map(|&j| rule * std_dev(&sample.x().column(j))).collect();
    let k = cols.len() + 1;
    let mut out = ArmMeans {
        m1: Vec::with_capacity(n),
        m0: Vec::with_capacity(n),
        q1: Vec::with_capacity(n),
        q0: Vec::with_capacity(n),
        e: Vec::with_capacity(n),
    };
    let mut row = alloc::vec![0.0; k];
    for i in 0..n {
        let xi = sample.x_row(i);
        let mut ne = [
            crate::linalg::NormalEquations::new(k),
            crate::linalg::NormalEquations::new(k),
        ];
        let mut ne_d = [
            crate::linalg::NormalEquations::new(k),
            crate::linalg::NormalEquations::new(k),
        ];
        let (mut w1, mut w_all) = (0.0, 0.0);
        for j in 0..n {
            let xj = sample.x_row(j);
            let mut d2 = 0.0;
            row[0] = 1.0;
            for (c, (&col, hc)) in cols.iter().zip(&h).enumerate() {
                let t = (xj[col] - xi[col]) / hc;
                d2 += t * t;
                row[c + 1] = t;
            }
            let w = (-0.5 * d2).exp();
            if w < 1e-300 {
                continue;
            }
            let arm = usize::from(z[j]);
            ne[arm].add(&row, sample.y()[j], w);
            ne_d[arm].add(&row, sample.d()[j], w);
            w_all += w;
            if z[j] {
                w1 += w;
            }
        }
        let fit = |ne: &mut crate::linalg::NormalEquations| -> Result<f64> {
            ne.finish();
            crate::linalg::solve_spd(&ne.xtx, &ne.xty)
                .map(|b| b[0])
                .map_err(|_| Error::MissingArm { cells: alloc::vec![i] })
        };
        let [ref mut a0, ref mut a1] = ne;
        let [ref mut b0, ref mut b1] = ne_d;
        out.m1.push(fit(a1)?);
        out.m0.push(fit(a0)?);
        out.q1.push(fit(b1)?);
        out.q0.push(fit(b0)?);
        out.e.push(w1 / w_all);
    }
    Ok(out)
}

/// Plug-in welfare of a binary-instrument rule and its contrast against
/// encouraging nobody, with influence-function standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BinaryIvWelfare {
    /// `mean(Ê[Y|X,Z=1]·π + Ê[Y|X,Z=0]·(1 − π))`.
    pub welfare: Estimate,
    /// `mean(π·(Ê[Y|X,Z=1] − Ê[Y|X,Z=0]))`.
    pub contrast: Estimate,
}

pub fn binary_iv_welfare(sample: &Sample, assignments: &[bool]) -> Result<BinaryIvWelfare> {
    let z = binary_instrument(sample)?;
    check_len(sample, assignments)?;
    let m = arm_means(sample, &z)?;
    let n = sample.n();
    let mut w = Vec::with_capacity(n);
    let mut c = Vec::with_capacity(n);
    let mut psi_w = Vec::with_capacity(n);
    let mut psi_c = Vec::with_capacity(n);
    for i in 0..n {
        let pi = if assignments[i] { 1.0 } else { 0.0 };
        let y = sample.y()[i];
        let r1 = if z[i] { (y - m.m1[i]) / m.e[i] } else { 0.0 };
        let r0 = if z[i] { 0.0 } else { (y - m.m0[i]) / (1.0 - m.e[i]) };
        w.push(pi * m.m1[i] + (1.0 - pi) * m.m0[i]);
        c.push(pi * (m.m1[i] - m.m0[i]));
        psi_w.push(w[i] + pi * r1 + (1.0 - pi) * r0);
        psi_c.push(c[i] + pi * (r1 - r0));
    }
    let est = |v: &[f64], psi: &[f64]| Estimate {
        value: crate::stats::mean(v),
        se: std_dev(psi) / (n as f64).sqrt(),
    };
    Ok(BinaryIvWelfare { welfare: est(&w, &psi_w), contrast: est(&c, &psi_c) })
}

/// Welfare under random rationing of the encouragement.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RationedWelfare {
    pub welfare: Estimate,
    /// `min{1, (κ − Ê[D(0)]) / (Ê[D(π)] − Ê[D(0)])}`.
    pub scale: f64,
    pub takeup_status_quo: f64,
    pub takeup_policy: f64,
}

/// `W^κ(π) = E[Y(D(0))] + E[(Y(D(1)) − Y(D(0)))·π]·scale`. The standard
/// error treats the rationing scale as known.
pub fn rationed_welfare(sample: &Sample, assignments: &[bool], kappa: f64) -> Result<RationedWelfare> {
    let z = binary_instrument(sample)?;
    check_len(sample, assignments)?;
    let m = arm_means(sample, &z)?;
    let n = sample.n();
    let ed0 = crate::stats::mean(&m.q0);
    let edpi = (0..n).map(|i| if assignments[i] { m.q1[i] } else { m.q0[i] }).sum::<f64>() / n as f64;
    if ed0 > kappa {
        return Err(Error::Infeasible(alloc::format!("estimated status-quo take-up {ed0} exceeds κ = {kappa}")));
    }
    let scale = if edpi > ed0 { ((kappa - ed0) / (edpi - ed0)).min(1.0) } else { 1.0 };
    let mut w = Vec::with_capacity(n);
    let mut psi = Vec::with_capacity(n);
    for i in 0..n {
        let pi = if assignments[i] { 1.0 } else { 0.0 };
        let y = sample.y()[i];
        let r1 = if z[i] { (y - m.m1[i]) / m.e[i] } else { 0.0 };
        let r0 = if z[i] { 0.0 } else { (y - m.m0[i]) / (1.0 - m.e[i]) };
        let v = m.m0[i] + scale * pi * (m.m1[i] - m.m0[i]);
        w.push(v);
        psi.push(v + r0 + scale * pi * (r1 - r0));
    }
    Ok(RationedWelfare {
        welfare: Estimate { value: crate::stats::mean(&w), se: std_dev(&psi) / (n as f64).sqrt() },
        scale,
        takeup_status_quo: ed0,
        takeup_policy: edpi,
    })
}

fn check_len(sample: &Sample, assignments: &[bool]) -> Result<()> {
    if assignments.len() != sample.n() {
        return Err(config("assignments and sample differ in length"));
    }
    Ok(())
}
