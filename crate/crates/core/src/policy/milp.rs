//! Mixed-integer formulation of LES welfare maximization, solved by a
//! dense two-phase simplex inside depth-first branch and bound.
//!
//! Variables are the score coefficients `λ ∈ [−1, 1]^{d_v+1}` and binary
//! labels `π_i`. Big-M rows with `M_i = 1 + ‖(1, v_i)‖₁` tie the labels to
//! the score sign: `π_i = 1 ⇒ λ'ṽ_i ≥ 0` and `π_i = 0 ⇒ λ'ṽ_i ≤ −δ`.

use alloc::vec::Vec;

use super::search::{Incumbent, Objective};
use super::{les_score, normalize, Rule};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct MilpOptions {
    /// Margin `δ` separating excluded rows from the boundary.
    pub margin: f64,
    pub node_limit: usize,
}

impl Default for MilpOptions {
    fn default() -> Self {
        MilpOptions { margin: 1e-6, node_limit: 200_000 }
    }
}

const EPS: f64 = 1e-9;

enum LpResult {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
}

/// Maximizes `c'x` subject to `Ax ≤ b`, `x ≥ 0` (Bland's rule, two phases).
fn lp_max(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> LpResult {
    let m = a.len();
    let n = c.len();
    let neg: Vec<usize> = (0..m).filter(|&i| b[i] < 0.0).collect();
    let n_art = neg.len();
    // Columns: x (n), slacks (m), artificials (n_art), rhs.
    let width = n + m + n_art + 1;
    let rhs = width - 1;
    let mut t: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut basis = alloc::vec![0usize; m];
    let mut art = 0;
    for i in 0..m {
        let mut row = alloc::vec![0.0; width];
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            row[j] = sign * a[i][j];
        }
        row[n + i] = sign;
        row[rhs] = sign * b[i];
        if b[i] < 0.0 {
            row[n + m + art] = 1.0;
            basis[i] = n + m + art;
            art += 1;
        } else {
            basis[i] = n + i;
        }
        t.push(row);
    }
    // Phase 1: maximize −Σ artificials.
    if n_art > 0 {
        let mut obj = alloc::vec![0.0; width];
        for &i in &neg {
            for j in 0..width {
                obj[j] += t[i][j];
            }
        }
        for j in n + m..n + m + n_art {
            obj[j] = 0.0;
        }
        // Reduced costs stored as −(objective row) for maximization.
        let z: Vec<f64> = obj.iter().map(|v| -v).collect();
        t.push(z);
        if !pivot_loop(&mut t, &mut basis, n + m + n_art) {
            return LpResult::Infeasible;
        }
        let phase1 = t[m][rhs];
        if phase1.abs() > 1e-7 * (1.0 + b.iter().map(|v| v.abs()).sum::<f64>()) {
            return LpResult::Infeasible;
        }
        // Drive remaining artificial basics out.
        for i in 0..m {
            if basis[i] >= n + m {
                if let Some(j) = (0..n + m).find(|&j| t[i][j].abs() > EPS) {
                    pivot(&mut t, &mut basis, i, j);
                }
            }
        }
        t.pop();
        for row in t.iter_mut() {
            for j in n + m..n + m + n_art {
                row[j] = 0.0;
            }
        }
    }
    // Phase 2 objective row: z_j = −c_j + c_B' column.
    let mut z = alloc::vec![0.0; width];
    for j in 0..n {
        z[j] = -c[j];
    }
    for i in 0..m {
        let cb = if basis[i] < n { c[basis[i]] } else { 0.0 };
        if cb != 0.0 {
            for j in 0..width {
                z[j] += cb * t[i][j];
            }
        }
    }
    t.push(z);
    if !pivot_loop(&mut t, &mut basis, n + m) {
        // Unbounded cannot happen with the box rows the caller adds.
        return LpResult::Infeasible;
    }
    let mut x = alloc::vec![0.0; n];
    for i in 0..m {
        if basis[i] < n {
            x[basis[i]] = t[i][rhs];
        }
    }
    LpResult::Optimal { value: t[m][rhs], x }
}

/// Runs simplex pivots on the last row as objective; false when unbounded.
fn pivot_loop(t: &mut [Vec<f64>], basis: &mut [usize], ncols: usize) -> bool {
    let m = t.len() - 1;
    let rhs = t[0].len() - 1;
    for _ in 0..50_000 {
        let Some(col) = (0..ncols).find(|&j| t[m][j] < -EPS) else {
            return true;
        };
        let mut best: Option<(usize, f64)> = None;
        for i in 0..m {
            if t[i][col] > EPS {
                let r = t[i][rhs] / t[i][col];
                match best {
                    None => best = Some((i, r)),
                    Some((bi, br)) => {
                        if r < br - EPS || (r <= br + EPS && basis[i] < basis[bi]) {
                            best = Some((i, r));
                        }
                    }
                }
            }
        }
        let Some((row, _)) = best else {
            return false;
        };
        pivot(t, basis, row, col);
    }
    true
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], row: usize, col: usize) {
    let p = t[row][col];
    for v in t[row].iter_mut() {
        *v /= p;
    }
    let pr = t[row].clone();
    for (i, r) in t.iter_mut().enumerate() {
        if i == row {
            continue;
        }
        let f = r[col];
        if f != 0.0 {
            for (v, q) in r.iter_mut().zip(&pr) {
                *v -= f * q;
            }
        }
    }
    basis[row] = col;
}

pub(crate) fn solve_les(obj: &Objective<'_>, opts: &MilpOptions) -> Result<Rule> {
    let n = obj.n();
    let dv = obj.dv();
    let k = dv + 1;
    let rows: Vec<Vec<f64>> = obj
        .v
        .rows()
        .map(|r| {
            let mut t = alloc::vec![1.0];
            t.extend_from_slice(r);
            t
        })
        .collect();
    let big_m: Vec<f64> = rows.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).collect();
    let delta = opts.margin;
    let slack = obj.budget_slack();

    let mut inc = Incumbent::new(obj);
    let wsum: f64 = obj.w.iter().sum();
    let csum: f64 = (0..n).map(|i| obj.dc(i)).sum();
    inc.offer(0.0, 0.0, 0, || Rule::constant(false, dv));
    inc.offer(wsum, csum, n, || Rule::constant(true, dv));

    let consider = |coef: &[f64], inc: &mut Incumbent| {
        let (mut sw, mut sc, mut sn) = (0.0, 0.0, 0);
        for i in 0..n {
            if les_score(coef, &rows[i][1..]) >= 0.0 {
                sw += obj.w[i];
                sc += obj.dc(i);
                sn += 1;
            }
        }
        let mut c = coef.to_vec();
        normalize(&mut c);
        inc.offer(sw, sc, sn, || Rule::Les { coef: c });
    };

    let mut stack: Vec<Vec<Option<bool>>> = alloc::vec![alloc::vec![None; n]];
    let mut nodes = 0usize;
    while let Some(fix) = stack.pop() {
        nodes += 1;
        if nodes > opts.node_limit {
            return Err(Error::SolverLimit(alloc::format!("branch and bound exceeded {} nodes", opts.node_limit)));
        }
        // Variables: x_j = λ_j + 1 ∈ [0, 2] for j < k, then π_i.
        let nv = k + n;
        let mut a: Vec<Vec<f64>> = Vec::new();
        let mut b: Vec<f64> = Vec::new();
        for j in 0..k {
            let mut r = alloc::vec![0.0; nv];
            r[j] = 1.0;
            a.push(r);
            b.push(2.0);
        }
        for i in 0..n {
            let shift: f64 = rows[i].iter().sum();
            let mi = big_m[i];
            // −λ'ṽ_i + M_i π_i ≤ M_i
            let mut r = alloc::vec![0.0; nv];
            for j in 0..k {
                r[j] = -rows[i][j];
            }
            r[k + i] = mi;
            a.push(r);
            b.push(mi - shift);
            // λ'ṽ_i − (M_i + δ) π_i ≤ −δ
            let mut r = alloc::vec![0.0; nv];
            for j in 0..k {
                r[j] = rows[i][j];
            }
            r[k + i] = -(mi + delta);
            a.push(r);
            b.push(-delta + shift);
            let mut r = alloc::vec![0.0; nv];
            r[k + i] = 1.0;
            a.push(r);
            b.push(if fix[i] == Some(false) { 0.0 } else { 1.0 });
            if fix[i] == Some(true) {
                let mut r = alloc::vec![0.0; nv];
                r[k + i] = -1.0;
                a.push(r);
                b.push(-1.0);
            }
        }
        if obj.budget.is_some() {
            let mut r = alloc::vec![0.0; nv];
            for i in 0..n {
                r[k + i] = obj.dc(i);
            }
            a.push(r);
            b.push(slack);
        }
        let mut c = alloc::vec![0.0; nv];
        c[k..].copy_from_slice(obj.w);
        let LpResult::Optimal { x, value } = lp_max(&c, &a, &b) else {
            continue;
        };
        if value <= inc.wsum + 1e-9 {
            continue;
        }
        // Centre the boundary inside the margin so rows held at score 0 stay
        // included despite rounding.
        let mut lambda: Vec<f64> = x[..k].iter().map(|v| v - 1.0).collect();
        lambda[0] += 0.5 * delta;
        consider(&lambda, &mut inc);
        let frac = (0..n)
            .filter(|&i| fix[i].is_none())
            .map(|i| (i, x[k + i]))
            .filter(|(_, v)| *v > 1e-7 && *v < 1.0 - 1e-7)
            .min_by(|a, b| (a.1 - 0.5).abs().total_cmp(&(b.1 - 0.5).abs()).then(a.0.cmp(&b.0)));
        // Near-integral labels can disagree with the sign of the score when
        // the relaxation shrinks λ towards the margin; branch on those too.
        let frac = frac.or_else(|| {
            (0..n)
                .filter(|&i| fix[i].is_none())
                .find(|&i| (les_score(&lambda, &rows[i][1..]) >= 0.0) != (x[k + i] >= 0.5))
                .map(|i| (i, x[k + i]))
        });
        let Some((i, v)) = frac else {
            continue;
        };
        let up_first = v >= 0.5;
        for branch in [!up_first, up_first] {
            let mut f = fix.clone();
            f[i] = Some(branch);
            stack.push(f);
        }
    }
    Ok(inc.into_rule())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_lp() {
        // max 3x + 2y, x + y ≤ 4, x + 3y ≤ 6, x ≤ 3.
        let a = alloc::vec![alloc::vec![1.0, 1.0], alloc::vec![1.0, 3.0], alloc::vec![1.0, 0.0]];
        let LpResult::Optimal { x, value } = lp_max(&[3.0, 2.0], &a, &[4.0, 6.0, 3.0]) else { panic!() };
        assert!((value - 11.0).abs() < 1e-9);
        assert!((x[0] - 3.0).abs() < 1e-9 && (x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn lp_with_lower_bound_rows() {
        // max −x − y, x + y ≥ 2 (as −x − y ≤ −2), x ≤ 5.
        let a = alloc::vec![alloc::vec![-1.0, -1.0], alloc::vec![1.0, 0.0]];
        let LpResult::Optimal { value, .. } = lp_max(&[-1.0, -1.0], &a, &[-2.0, 5.0]) else { panic!() };
        assert!((value + 2.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_lp() {
        let a = alloc::vec![alloc::vec![1.0], alloc::vec![-1.0]];
        assert!(matches!(lp_max(&[1.0], &a, &[1.0, -2.0]), LpResult::Infeasible));
    }
}

