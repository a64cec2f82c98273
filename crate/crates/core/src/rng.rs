//! Counter-based random streams.
//!
//! Every replication, fold shuffle and Monte Carlo draw set gets its own
//! ChaCha20 stream derived from `(seed, index)`, so results do not depend on
//! how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub use rand_chacha::ChaCha20Rng as Rng;

/// Independent stream `index` of the generator keyed by `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Stream indices reserved for the different consumers of one seed.
pub mod purpose {
    pub const SAMPLE: u64 = 0;
    pub const WELFARE_FORMULA: u64 = 1;
    pub const WELFARE_SIMULATION: u64 = 2;
    pub const BUDGET: u64 = 3;
    pub const FOLDS: u64 = 4;
    pub const EVALUATION: u64 = 5;
    /// Replication `r` uses stream `REPLICATION_BASE + r`.
    pub const REPLICATION_BASE: u64 = 1 << 32;
}
