//! Learning welfare-maximizing encouragement rules under endogenous
//! treatment selection.
//!
//! An encouragement rule manipulates an instrument (a tuition fee, a
//! subsidy, a distance) rather than mandating treatment. Welfare of such a
//! rule is expressed through the marginal treatment effect (MTE) curve and
//! the propensity score, which makes it estimable from observational data
//! with an instrument. This crate holds the pure algorithmic core:
//!
//! * [`model`]: generalized Roy data-generating processes with exact oracle
//!   quantities (propensity, MTE, welfare, budget, density ratios).
//! * [`propensity`]: logit, local polynomial and series propensity fits.
//! * [`mte`]: polynomial, partially linear and local-IV MTE estimators.
//! * [`welfare`]: per-row welfare gains, PRTE reports, doubly robust scores,
//!   binary-instrument and rationed welfare.
//! * [`policy`]: exact empirical welfare maximization over linear
//!   eligibility scores and threshold allocations, with and without budget
//!   constraints.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! the parallel Monte Carlo harness live in the `encourage` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

mod error;
mod math;

pub mod features;
pub mod linalg;
pub mod model;
pub mod mte;
pub mod policy;
pub mod propensity;
pub mod rng;
pub mod smooth;
pub mod stats;
pub mod welfare;

#[cfg(feature = "serde")]
mod serde_util;

pub use error::{Error, Result};
pub use features::{FeatureSpec, Term, Var};
pub use model::{
    Law, Manipulation, ManipulationPair, OutcomeEquation, Sample, SelectionIndex,
    StructuralDgp,
};
pub use mte::{MarginalEffect, MteModel};
pub use policy::{PolicySpec, Rule};
pub use propensity::{Propensity, PropensityModel};
pub use stats::Estimate;
pub use welfare::{CostSpec, GainVector, WelfareReport};
