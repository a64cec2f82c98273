//! Manipulations of the first instrument component.

use crate::error::{Error, Result};
use crate::model::Law;

/// A pure function of `z1`; the other instrument components are left alone.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Manipulation {
    Identity,
    /// Subsidy of up to `a`: `z1 ↦ (z1 − a)·1{z1 ≥ a}`.
    CapSubsidy { a: f64 },
    Shift { c: f64 },
    SetTo { v: f64 },
}

impl Manipulation {
    pub fn apply(&self, z1: f64) -> f64 {
        match *self {
            Manipulation::Identity => z1,
            Manipulation::CapSubsidy { a } => {
                if z1 >= a {
                    z1 - a
                } else {
                    0.0
                }
            }
            Manipulation::Shift { c } => z1 + c,
            Manipulation::SetTo { v } => v,
        }
    }

    /// Copies `z` into `out` with the first component manipulated.
    pub fn apply_into(&self, z: &[f64], out: &mut [f64]) {
        out.copy_from_slice(z);
        if let Some(first) = out.first_mut() {
            *first = self.apply(z[0]);
        }
    }

    /// Density (or mass) of `α(Z1)` at `t` when `Z1` follows `law`.
    ///
    /// Continuous laws only admit manipulations that keep a density
    /// (identity and shifts); the others put an atom on the real line and
    /// the ratio against the status-quo density is undefined.
    pub fn pushforward_density(&self, law: &Law, t: f64) -> Result<f64> {
        if let Some(atoms) = law.atoms() {
            let mass = atoms
                .iter()
                .filter(|(v, _)| {
                    let a = self.apply(*v);
                    (a - t).abs() <= 1e-12 * a.abs().max(1.0)
                })
                .map(|(_, p)| p)
                .sum();
            return Ok(mass);
        }
        match *self {
            Manipulation::Identity => Ok(law.density(t)),
            Manipulation::Shift { c } => Ok(law.density(t - c)),
            _ => Err(Error::Domain(alloc::format!(
                "{self:?} maps a continuous instrument onto an atom; density ratio undefined"
            ))),
        }
    }
}

/// Status-quo-or-default manipulation `α0` and the encouragement `α1`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ManipulationPair {
    pub alpha0: Manipulation,
    pub alpha1: Manipulation,
}

impl ManipulationPair {
    pub fn new(alpha0: Manipulation, alpha1: Manipulation) -> Self {
        ManipulationPair { alpha0, alpha1 }
    }

    /// `α0 = identity`, `α1 = alpha1`.
    pub fn from_status_quo(alpha1: Manipulation) -> Self {
        ManipulationPair { alpha0: Manipulation::Identity, alpha1 }
    }

    pub fn arm(&self, treated: bool) -> &Manipulation {
        if treated {
            &self.alpha1
        } else {
            &self.alpha0
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.alpha0 == self.alpha1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cap_subsidy() {
        let m = Manipulation::CapSubsidy { a: 2.5 };
        assert_eq!(m.apply(1.0), 0.0);
        assert_eq!(m.apply(2.5), 0.0);
        assert_eq!(m.apply(4.0), 1.5);
    }

    #[test]
    fn only_first_component_moves() {
        let mut out = [0.0; 3];
        Manipulation::Shift { c: -1.0 }.apply_into(&[3.0, 7.0, 9.0], &mut out);
        assert_eq!(out, [2.0, 7.0, 9.0]);
    }

    #[test]
    fn pushforward_of_discrete_law() {
        let law = Law::Discrete { values: alloc::vec![0.0, 1.0, 2.0], probs: alloc::vec![0.2, 0.3, 0.5] };
        let m = Manipulation::CapSubsidy { a: 1.0 };
        assert!((m.pushforward_density(&law, 0.0).unwrap() - 0.5).abs() < 1e-12);
        assert!((m.pushforward_density(&law, 1.0).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn continuous_atoms_rejected() {
        let law = Law::Uniform { lo: 0.0, hi: 4.0 };
        assert!(Manipulation::CapSubsidy { a: 1.0 }.pushforward_density(&law, 0.5).is_err());
        let s = Manipulation::Shift { c: 1.0 }.pushforward_density(&law, 4.5).unwrap();
        assert!((s - 0.25).abs() < 1e-12);
    }
}
