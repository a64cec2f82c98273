//! Exact enumeration of the labelings induced by linear eligibility scores.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::search::{argsort, Incumbent, Objective};
use super::{check_dv, les_score, normalize, Rule};
#[allow(unused_imports)]
use crate::math::Float;
use crate::error::Result;
use crate::linalg::pinv_solve;

/// Event angles closer than this are treated as simultaneous.
const ANGLE_TOL: f64 = 1e-12;

pub(crate) fn enumerate(obj: &Objective<'_>) -> Result<Rule> {
    check_dv(obj, 3, "the enumerate backend")?;
    let mut inc = Incumbent::new(obj);
    let dv = obj.dv();
    let n = obj.n();
    let wsum: f64 = obj.w.iter().sum();
    let csum: f64 = (0..n).map(|i| obj.dc(i)).sum();
    inc.offer(0.0, 0.0, 0, || Rule::constant(false, dv));
    inc.offer(wsum, csum, n, || Rule::constant(true, dv));
    match dv {
        0 => {}
        1 => line(obj, &mut inc),
        2 => plane_sweep(obj, &mut inc),
        _ => triples(obj, &mut inc),
    }
    Ok(inc.into_rule())
}

fn les_rule(mut coef: Vec<f64>) -> Rule {
    normalize(&mut coef);
    Rule::Les { coef }
}

/// `d_v = 1`: rules `1{v ≥ t}` and `1{v ≤ t}` at every observed `t`.
fn line(obj: &Objective<'_>, inc: &mut Incumbent) {
    let v: Vec<f64> = obj.v.rows().map(|r| r[0]).collect();
    let order = argsort(&v);
    let n = order.len();
    // Prefixes in increasing order realize `v ≤ t`.
    let (mut w, mut c) = (0.0, 0.0);
    for k in 0..n {
        let i = order[k];
        w += obj.w[i];
        c += obj.dc(i);
        if k + 1 < n && v[order[k + 1]] == v[i] {
            continue;
        }
        let t = v[i];
        inc.offer(w, c, k + 1, || les_rule(alloc::vec![t, -1.0]));
    }
    // Suffixes realize `v ≥ t`.
    let (mut w, mut c) = (0.0, 0.0);
    for k in (0..n).rev() {
        let i = order[k];
        w += obj.w[i];
        c += obj.dc(i);
        if k > 0 && v[order[k - 1]] == v[i] {
            continue;
        }
        let t = v[i];
        inc.offer(w, c, n - k, || les_rule(alloc::vec![-t, 1.0]));
    }
}

/// `d_v = 2`: every non-constant halfplane labeling can be realized by a
/// line through some data point (the pivot) that separates the remaining
/// points strictly, with the pivot and its duplicates on either side. For
/// each pivot the normal direction is rotated through a full turn; the
/// strictly-positive set only changes when the normal becomes orthogonal to
/// `v_i − pivot`, so one candidate per arc between those angles suffices.
fn plane_sweep(obj: &Objective<'_>, inc: &mut Incumbent) {
    let n = obj.n();
    let pts: Vec<(f64, f64)> = obj.v.rows().map(|r| (r[0], r[1])).collect();
    let pts = pts.as_slice();
    let two_pi = 2.0 * core::f64::consts::PI;
    let half_pi = 0.5 * core::f64::consts::PI;
    let mut events: Vec<(f64, bool, usize)> = Vec::with_capacity(2 * n);
    let mut inside = alloc::vec![false; n];
    for p in 0..n {
        let (px, py) = pts[p];
        let (mut gw, mut gc, mut gn) = (0.0, 0.0, 0usize);
        events.clear();
        for i in 0..n {
            let (dx, dy) = (pts[i].0 - px, pts[i].1 - py);
            if dx == 0.0 && dy == 0.0 {
                gw += obj.w[i];
                gc += obj.dc(i);
                gn += 1;
                continue;
            }
            // `i` is strictly positive for normals in (a − π/2, a + π/2).
            let a = dy.atan2(dx);
            events.push((wrap(a - half_pi, two_pi), true, i));
            events.push((wrap(a + half_pi, two_pi), false, i));
        }
        if events.is_empty() {
            continue;
        }
        events.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)).then(a.1.cmp(&b.1)));
        // Start strictly inside the arc that wraps past 2π.
        let first = events[0].0;
        let last = events[events.len() - 1].0;
        let theta0 = if first + two_pi - last > ANGLE_TOL {
            wrap(0.5 * (last + first + two_pi), two_pi)
        } else {
            // All events coincide; cannot happen since enter and exit differ by π.
            continue;
        };
        let (c0, s0) = (theta0.cos(), theta0.sin());
        let (mut sw, mut sc, mut sn) = (0.0, 0.0, 0usize);
        for e in events.iter().filter(|e| e.1) {
            let i = e.2;
            let pos = c0 * (pts[i].0 - px) + s0 * (pts[i].1 - py) > 0.0;
            inside[i] = pos;
            if pos {
                sw += obj.w[i];
                sc += obj.dc(i);
                sn += 1;
            }
        }
        let offer_arc = |theta: f64, sw: f64, sc: f64, sn: usize, inc: &mut Incumbent| {
            let rule = |include: bool| move || pivot_rule(pts, p, theta, include);
            inc.offer(sw + gw, sc + gc, sn + gn, rule(true));
            inc.offer(sw, sc, sn, rule(false));
        };
        offer_arc(theta0, sw, sc, sn, inc);
        let m = events.len();
        let mut k = 0;
        while k < m {
            let angle = events[k].0;
            let mut j = k;
            while j < m && events[j].0 - angle <= ANGLE_TOL {
                let (_, enter, i) = events[j];
                // Entering and leaving are applied relative to the tracked
                // state, which keeps grouped simultaneous events consistent.
                if enter && !inside[i] {
                    inside[i] = true;
                    sw += obj.w[i];
                    sc += obj.dc(i);
                    sn += 1;
                } else if !enter && inside[i] {
                    inside[i] = false;
                    sw -= obj.w[i];
                    sc -= obj.dc(i);
                    sn -= 1;
                }
                j += 1;
            }
            if j < m {
                let mid = 0.5 * (angle + events[j].0);
                if events[j].0 - events[j - 1].0 > ANGLE_TOL {
                    offer_arc(mid, sw, sc, sn, inc);
                }
            }
            k = j;
        }
    }
}

fn wrap(a: f64, period: f64) -> f64 {
    let r = a % period;
    if r < 0.0 {
        r + period
    } else {
        r
    }
}

/// LES rule with normal at angle `theta` through pivot `p`, putting the
/// pivot (and its duplicates) inside or outside.
fn pivot_rule(pts: &[(f64, f64)], p: usize, theta: f64, include: bool) -> Rule {
    let (c, s) = (theta.cos(), theta.sin());
    let (px, py) = pts[p];
    let mut gap = f64::INFINITY;
    for &(x, y) in pts {
        let t = c * (x - px) + s * (y - py);
        if include && t < 0.0 {
            gap = gap.min(-t);
        } else if !include && t > 0.0 {
            gap = gap.min(t);
        }
    }
    let delta = if gap.is_finite() { 0.5 * gap } else { 1.0 };
    let offset = -(c * px + s * py);
    let lambda0 = if include { offset + delta } else { offset - delta };
    les_rule(alloc::vec![lambda0, c, s])
}

/// `d_v = 3`: planes through every affinely independent triple, each
/// perturbed so the triple takes every in/out pattern.
fn triples(obj: &Objective<'_>, inc: &mut Incumbent) {
    let n = obj.n();
    let pts: Vec<[f64; 3]> = obj.v.rows().map(|r| [r[0], r[1], r[2]]).collect();
    let mut labels = alloc::vec![false; n];
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let (a, b, c) = (pts[i], pts[j], pts[k]);
                let u = sub(b, a);
                let w = sub(c, a);
                let nrm = cross(u, w);
                let len = dot(nrm, nrm).sqrt();
                let scale = dot(u, u).sqrt() * dot(w, w).sqrt();
                if !(len > 1e-12 * scale) {
                    continue;
                }
                let base = [-dot(nrm, a), nrm[0], nrm[1], nrm[2]];
                // Affine functions taking values ±1 on the triple.
                let m = DMatrix::from_row_slice(
                    3,
                    4,
                    &[1.0, a[0], a[1], a[2], 1.0, b[0], b[1], b[2], 1.0, c[0], c[1], c[2]],
                );
                let mut far = f64::INFINITY;
                for q in &pts {
                    let s = les_score(&base, q).abs();
                    if s > 1e-12 * len * (1.0 + dot(*q, *q).sqrt()) {
                        far = far.min(s);
                    }
                }
                for pattern in 0..8u8 {
                    let target = DVector::from_iterator(
                        3,
                        (0..3).map(|t| if pattern >> t & 1 == 1 { 1.0 } else { -1.0 }),
                    );
                    let f = pinv_solve(&m, &target);
                    let fmax = pts.iter().map(|q| les_score(f.as_slice(), q).abs()).fold(0.0, f64::max);
                    let eps = if far.is_finite() { 0.5 * far / fmax.max(1e-300) } else { 1.0 };
                    for sign in [1.0, -1.0] {
                        let coef: Vec<f64> = (0..4).map(|t| sign * base[t] + eps * f[t]).collect();
                        let (mut sw, mut sc, mut sn) = (0.0, 0.0, 0);
                        for q in 0..n {
                            labels[q] = les_score(&coef, &pts[q]) >= 0.0;
                            if labels[q] {
                                sw += obj.w[q];
                                sc += obj.dc(q);
                                sn += 1;
                            }
                        }
                        inc.offer(sw, sc, sn, || les_rule(coef.clone()));
                    }
                }
            }
        }
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}
