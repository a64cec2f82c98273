//! Generalized Roy data-generating processes and their oracle quantities.

mod dgp;
mod law;
mod manipulation;
pub mod oracle;
pub mod presets;
mod sample;

pub use dgp::{OutcomeEquation, SelectionIndex, StructuralDgp, Wave, TRAPEZOID_NODES};
pub use law::{gauss_legendre, Law};
pub use manipulation::{Manipulation, ManipulationPair};
pub use oracle::{oracle_budget, oracle_contrast, oracle_mte, oracle_welfare, WelfareMethod};
pub use sample::Sample;
