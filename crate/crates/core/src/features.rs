//! Feature maps over `(x, z)` records.
//!
//! A [`Term`] is a product of observed variables (the empty product is the
//! intercept) and a [`FeatureSpec`] is an ordered list of terms. The same
//! machinery describes the logit index, the selection index of a simulated
//! model and the features a policy class is allowed to use.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{config, Error, Result};

/// One observed variable, zero-based: `X(0)` is the column named `x1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "String", into = "String"))]
pub enum Var {
    X(usize),
    Z(usize),
}

impl Var {
    pub fn value(&self, x: &[f64], z: &[f64]) -> f64 {
        match *self {
            Var::X(j) => x[j],
            Var::Z(k) => z[k],
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X(j) => write!(f, "x{}", j + 1),
            Var::Z(k) => write!(f, "z{}", k + 1),
        }
    }
}

impl FromStr for Var {
    type Err = Error;

    fn from_str(s: &str) -> Result<Var> {
        let s = s.trim();
        let (head, idx) = s.split_at(s.len().min(1));
        let j: usize = idx
            .parse()
            .map_err(|_| config(alloc::format!("bad variable name {s:?}")))?;
        if j == 0 {
            return Err(config(alloc::format!("variable indices start at 1: {s:?}")));
        }
        match head {
            "x" | "X" => Ok(Var::X(j - 1)),
            "z" | "Z" => Ok(Var::Z(j - 1)),
            _ => Err(config(alloc::format!("bad variable name {s:?}"))),
        }
    }
}

impl TryFrom<String> for Var {
    type Error = Error;

    fn try_from(s: String) -> Result<Var> {
        s.parse()
    }
}

impl From<Var> for String {
    fn from(v: Var) -> String {
        v.to_string()
    }
}

/// Product of variables; the empty product is the constant 1.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "String", into = "String"))]
pub struct Term(pub Vec<Var>);

impl Term {
    pub fn intercept() -> Term {
        Term(Vec::new())
    }

    pub fn var(v: Var) -> Term {
        Term(alloc::vec![v])
    }

    pub fn is_intercept(&self) -> bool {
        self.0.is_empty()
    }

    pub fn value(&self, x: &[f64], z: &[f64]) -> f64 {
        self.0.iter().map(|v| v.value(x, z)).product()
    }

    /// Whether the term reads the instrument column `k`.
    pub fn uses_z(&self, k: usize) -> bool {
        self.0.contains(&Var::Z(k))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("*")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl FromStr for Term {
    type Err = Error;

    fn from_str(s: &str) -> Result<Term> {
        let s = s.trim();
        if s == "1" {
            return Ok(Term::intercept());
        }
        s.split('*').map(Var::from_str).collect::<Result<Vec<_>>>().map(Term)
    }
}

impl TryFrom<String> for Term {
    type Error = Error;

    fn try_from(s: String) -> Result<Term> {
        s.parse()
    }
}

impl From<Term> for String {
    fn from(t: Term) -> String {
        t.to_string()
    }
}

/// Ordered list of terms.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct FeatureSpec {
    pub terms: Vec<Term>,
}

impl FeatureSpec {
    pub fn new(terms: Vec<Term>) -> Self {
        FeatureSpec { terms }
    }

    /// Parses names such as `["1", "x2", "z1", "z1*z2"]`.
    pub fn parse<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        names.iter().map(|s| s.as_ref().parse()).collect::<Result<Vec<_>>>().map(FeatureSpec::new)
    }

    /// The listed variables, without an intercept.
    pub fn vars(vars: &[Var]) -> Self {
        FeatureSpec::new(vars.iter().map(|&v| Term::var(v)).collect())
    }

    /// Intercept followed by every listed variable.
    pub fn linear(vars: &[Var]) -> Self {
        let mut terms = alloc::vec![Term::intercept()];
        terms.extend(vars.iter().map(|&v| Term::var(v)));
        FeatureSpec::new(terms)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.terms.iter().map(ToString::to_string).collect()
    }

    pub fn eval_into(&self, x: &[f64], z: &[f64], out: &mut [f64]) {
        for (o, t) in out.iter_mut().zip(&self.terms) {
            *o = t.value(x, z);
        }
    }

    pub fn eval(&self, x: &[f64], z: &[f64]) -> Vec<f64> {
        self.terms.iter().map(|t| t.value(x, z)).collect()
    }

    /// Checks that every referenced column exists.
    pub fn check_dims(&self, dx: usize, dz: usize) -> Result<()> {
        for t in &self.terms {
            for v in &t.0 {
                let ok = match *v {
                    Var::X(j) => j < dx,
                    Var::Z(k) => k < dz,
                };
                if !ok {
                    return Err(config(alloc::format!(
                        "feature {t} refers to {v}, but data has {dx} x and {dz} z columns"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn has_intercept(&self) -> bool {
        self.terms.iter().any(Term::is_intercept)
    }
}
