//! Class-best rules on large evaluation samples, used as the regret
//! benchmark. Exact enumeration is quadratic in `n`, so `d_v = 2` classes are
//! searched over a fixed grid of directions (LES) or threshold quantiles
//! (TA), each with an exact sweep over the remaining degree of freedom.

use alloc::vec::Vec;

use super::search::{argsort, Incumbent, Objective};
use super::{les, normalize, ta, ClassKind, Rule, Threshold};
#[allow(unused_imports)]
use crate::math::Float;
use crate::error::Result;
use crate::stats::quantile_sorted;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridOptions {
    /// Normal directions on the full circle (LES).
    pub directions: usize,
    /// Extra directions spread over the two coarse cells next to the best one.
    pub refine: usize,
    /// Candidate thresholds per leading coordinate (TA).
    pub quantiles: usize,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions { directions: 256, refine: 128, quantiles: 256 }
    }
}

/// Best rule in the class over the reference grid, with its welfare.
/// Classes with one feature are solved exactly.
pub fn grid_best(obj: &Objective<'_>, class: ClassKind, opts: &GridOptions) -> Result<(Rule, f64)> {
    let rule = match (class, obj.dv()) {
        (ClassKind::Les, 0 | 1) => les::enumerate(obj)?,
        (ClassKind::Ta, 0 | 1) => ta::search(obj)?,
        (ClassKind::Les, 2) => les_grid(obj, opts),
        (ClassKind::Ta, 2) => ta_grid(obj, opts),
        _ => return Err(crate::error::config("reference grids support at most two policy features")),
    };
    let labels: Vec<bool> = obj.v.rows().map(|r| rule.assign(r)).collect();
    let w = if rule.is_empty_sentinel() { f64::NEG_INFINITY } else { obj.welfare(&labels) };
    Ok((rule, w))
}

fn les_grid(obj: &Objective<'_>, opts: &GridOptions) -> Rule {
    let mut inc = Incumbent::new(obj);
    let n = obj.n();
    let wsum: f64 = obj.w.iter().sum();
    let csum: f64 = (0..n).map(|i| obj.dc(i)).sum();
    inc.offer(0.0, 0.0, 0, || Rule::constant(false, 2));
    inc.offer(wsum, csum, n, || Rule::constant(true, 2));
    let two_pi = 2.0 * core::f64::consts::PI;
    let k = opts.directions.max(4);
    let mut best_theta = 0.0;
    let mut best_w = f64::NEG_INFINITY;
    for d in 0..k {
        let theta = two_pi * d as f64 / k as f64;
        let w = direction_sweep(obj, theta, &mut inc);
        if w > best_w {
            best_w = w;
            best_theta = theta;
        }
    }
    let cell = two_pi / k as f64;
    for r in 0..opts.refine {
        let theta = best_theta - cell + 2.0 * cell * (r as f64 + 0.5) / opts.refine as f64;
        direction_sweep(obj, theta, &mut inc);
    }
    inc.into_rule()
}

/// Offers every upper set `{θ'v ≥ t}` along one direction; returns the best
/// feasible welfare sum seen.
fn direction_sweep(obj: &Objective<'_>, theta: f64, inc: &mut Incumbent) -> f64 {
    let (c, s) = (theta.cos(), theta.sin());
    let proj: Vec<f64> = obj.v.rows().map(|r| c * r[0] + s * r[1]).collect();
    let order = argsort(&proj);
    let n = order.len();
    let (mut sw, mut sc) = (0.0, 0.0);
    let mut best = f64::NEG_INFINITY;
    for pos in (0..n).rev() {
        let i = order[pos];
        sw += obj.w[i];
        sc += obj.dc(i);
        if pos > 0 && proj[order[pos - 1]] == proj[i] {
            continue;
        }
        if inc.feasible(sc) && sw > best {
            best = sw;
        }
        let t = proj[i];
        inc.offer(sw, sc, n - pos, || {
            let mut coef = alloc::vec![-t, c, s];
            normalize(&mut coef);
            Rule::Les { coef }
        });
    }
    best
}

fn ta_grid(obj: &Objective<'_>, opts: &GridOptions) -> Rule {
    let mut inc = Incumbent::new(obj);
    for mask in 0..4u32 {
        let signs: Vec<i8> = (0..2).map(|k| if mask >> k & 1 == 1 { -1 } else { 1 }).collect();
        let w0: Vec<f64> = obj.v.rows().map(|r| f64::from(signs[0]) * r[0]).collect();
        let w1: Vec<f64> = obj.v.rows().map(|r| f64::from(signs[1]) * r[1]).collect();
        let mut sorted = w0.clone();
        sorted.sort_by(f64::total_cmp);
        let mut cands = alloc::vec![Threshold::NegInf];
        for q in 0..=opts.quantiles {
            cands.push(Threshold::Value(quantile_sorted(&sorted, q as f64 / opts.quantiles as f64)));
        }
        cands.push(Threshold::PosInf);
        let order = argsort(&w1);
        for t0 in cands {
            let rows: Vec<usize> = order.iter().copied().filter(|&i| t0.admits(w0[i])).collect();
            let make = |t1: Threshold| {
                let s = signs.clone();
                move || Rule::Ta { thresholds: alloc::vec![t0, t1], signs: s }
            };
            inc.offer(0.0, 0.0, 0, make(Threshold::NegInf));
            let (mut sw, mut sc) = (0.0, 0.0);
            for (pos, &i) in rows.iter().enumerate() {
                sw += obj.w[i];
                sc += obj.dc(i);
                if pos + 1 < rows.len() && w1[rows[pos + 1]] == w1[i] {
                    continue;
                }
                inc.offer(sw, sc, pos + 1, make(Threshold::Value(w1[i])));
            }
        }
    }
    inc.into_rule()
}
