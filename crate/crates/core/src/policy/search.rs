use alloc::vec::Vec;

use crate::error::{config, Error, Result};
use crate::linalg::RowMatrix;

/// Per-row objective weights, features and an optional budget row.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    pub w: &'a [f64],
    pub v: &'a RowMatrix,
    /// `(c0, c1, κ)`.
    pub budget: Option<(&'a [f64], &'a [f64], f64)>,
}

impl<'a> Objective<'a> {
    pub fn new(w: &'a [f64], v: &'a RowMatrix) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::Sample("cannot learn a policy from an empty sample".into()));
        }
        if v.nrows() != w.len() {
            return Err(config("policy features and gains differ in length"));
        }
        Ok(Objective { w, v, budget: None })
    }

    pub fn with_budget(mut self, c0: &'a [f64], c1: &'a [f64], kappa: f64) -> Result<Self> {
        if c0.len() != self.w.len() || c1.len() != self.w.len() {
            return Err(config("cost vectors and gains differ in length"));
        }
        if !(kappa >= 0.0) {
            return Err(config("budget cap must be non-negative"));
        }
        self.budget = Some((c0, c1, kappa));
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.w.len()
    }

    pub fn dv(&self) -> usize {
        self.v.ncols()
    }

    pub fn welfare(&self, labels: &[bool]) -> f64 {
        self.w.iter().zip(labels).filter(|(_, &l)| l).map(|(w, _)| w).sum::<f64>() / self.n() as f64
    }

    /// Budget increment of treating row `i`.
    pub(crate) fn dc(&self, i: usize) -> f64 {
        self.budget.map_or(0.0, |(c0, c1, _)| c1[i] - c0[i])
    }

    /// Largest admissible `Σ_{π_i = 1} (c1_i − c0_i)`.
    pub(crate) fn budget_slack(&self) -> f64 {
        match self.budget {
            Some((c0, _, kappa)) => kappa * self.n() as f64 - c0.iter().sum::<f64>(),
            None => f64::INFINITY,
        }
    }
}

/// Running argmax with the documented tie-break: larger welfare, then
/// smaller share eligible, then lexicographically smaller normalized
/// coefficients (LES) or earlier discovery (TA).
pub(crate) struct Incumbent {
    tol: f64,
    slack: f64,
    pub wsum: f64,
    pub count: usize,
    pub rule: Option<crate::policy::Rule>,
}

impl Incumbent {
    pub fn new(obj: &Objective<'_>) -> Self {
        let scale: f64 = obj.w.iter().map(|w| w.abs()).sum::<f64>();
        let cscale: f64 = (0..obj.n()).map(|i| obj.dc(i).abs()).sum::<f64>();
        Incumbent {
            tol: 1e-10 * scale.max(1e-300),
            slack: obj.budget_slack() + 1e-10 * cscale,
            wsum: f64::NEG_INFINITY,
            count: usize::MAX,
            rule: None,
        }
    }

    pub fn feasible(&self, csum: f64) -> bool {
        csum <= self.slack
    }

    /// Offers a labeling summarized by its sums; `rule` is only built when
    /// the candidate could win.
    pub fn offer<F: FnOnce() -> crate::policy::Rule>(&mut self, wsum: f64, csum: f64, count: usize, rule: F) {
        if !self.feasible(csum) {
            return;
        }
        if wsum > self.wsum + self.tol {
            self.replace(wsum, count, rule());
        } else if wsum >= self.wsum - self.tol {
            if count < self.count {
                self.replace(wsum, count, rule());
            } else if count == self.count {
                let r = rule();
                if lex_less(&r, self.rule.as_ref()) {
                    self.replace(wsum, count, r);
                }
            }
        }
    }

    fn replace(&mut self, wsum: f64, count: usize, rule: crate::policy::Rule) {
        self.wsum = wsum;
        self.count = count;
        self.rule = Some(rule);
    }

    pub fn into_rule(self) -> crate::policy::Rule {
        self.rule.unwrap_or(crate::policy::Rule::Empty)
    }
}

fn lex_less(a: &crate::policy::Rule, b: Option<&crate::policy::Rule>) -> bool {
    use crate::policy::Rule;
    match (a, b) {
        (_, None) => true,
        (Rule::Les { coef: ca }, Some(Rule::Les { coef: cb })) => {
            for (x, y) in ca.iter().zip(cb) {
                if x < y {
                    return true;
                }
                if x > y {
                    return false;
                }
            }
            false
        }
        _ => false,
    }
}

/// Indices sorted by key, ties by index.
pub(crate) fn argsort(keys: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(a.cmp(&b)));
    idx
}
