//! Named, independent random streams derived from one master seed.
//!
//! Each stream is a ChaCha8 generator keyed by the master seed and separated
//! by its stream id, so consuming draws from one stream never shifts another.
//! The legitimate link and the eavesdropper draw from disjoint streams, which
//! keeps the legitimate training trajectory independent of eavesdropper work.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use rand_chacha::ChaCha8Rng as StreamRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    /// Synthetic data rendering and subset selection.
    Data = 1,
    Init = 2,
    /// Batch order.
    Shuffle = 3,
    /// Per-batch training SNR draws.
    Snr = 4,
    Fading = 5,
    Noise = 6,
    Dropout = 7,
    EveInit = 8,
    EveShuffle = 9,
    EveSnr = 10,
    EveFading = 11,
    EveNoise = 12,
    EveDropout = 13,
    /// Channel draws used by evaluation sweeps.
    EvalFading = 14,
    EvalNoise = 15,
    /// Channel draws used while crafting jammer perturbations.
    Perturbation = 16,
}

/// Master-seeded family of streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomStreams {
    seed: u64,
}

impl RandomStreams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// A fresh generator positioned at the start of `stream`.
    pub fn stream(&self, stream: Stream) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream as u64);
        rng
    }

    /// An independent family for a sub-task (a sweep point, an epoch, ...).
    pub fn derive(&self, salt: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(u64::MAX - salt);
        Self { seed: rand::RngCore::next_u64(&mut rng) }
    }
}

pub fn seed_all(seed: u64) -> RandomStreams {
    RandomStreams::new(seed)
}
