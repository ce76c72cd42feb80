//! Deterministic random streams derived from one master seed.
//!
//! Every purpose (and every Fourier slice within a purpose) gets its own ChaCha
//! stream, so changing how many draws one consumer makes never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Purpose {
    /// Problem data (A, X★, images).
    Problem,
    /// Construction of finite sketch families.
    SketchSet,
    /// Fresh sketches drawn inside the iteration.
    FreshSketch,
    /// Index sampling.
    Index,
}

impl Purpose {
    fn base(self) -> u64 {
        match self {
            Purpose::Problem => 1 << 40,
            Purpose::SketchSet => 2 << 40,
            Purpose::FreshSketch => 3 << 40,
            Purpose::Index => 4 << 40,
        }
    }
}

/// Stream `sub` (usually a Fourier slice index) of the given purpose.
pub fn stream(seed: u64, purpose: Purpose, sub: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose.base() + sub);
    rng
}
