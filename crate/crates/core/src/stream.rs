//! Reproducible random streams.
//!
//! All Monte Carlo work in this crate draws from ChaCha8 streams derived
//! from a master seed by a counter-based split: substream `i` reuses the
//! master key with `i` as the stream nonce. Substreams are therefore
//! statistically independent, cheap to construct, and independent of how
//! work is batched across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Master stream for a seed.
pub fn master(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The `index`-th substream of a master seed.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
