//! Seed derivation.
//!
//! Every random draw comes from ChaCha8 seeded with a user-visible `u64`.
//! Independent consumers of the same seed (splitting, weight init, data
//! generation, bootstrap) read separate ChaCha streams, so reusing one seed
//! for a split and an initialization does not correlate them. ChaCha output
//! is platform-independent, which keeps splits reproducible across machines.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Which consumer a generator is for. The discriminant is the ChaCha stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Split = 1,
    Init = 2,
    Synth = 3,
    Bootstrap = 4,
    GradCheck = 5,
}

pub fn rng_for(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
