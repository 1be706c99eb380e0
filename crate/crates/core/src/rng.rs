//! Seeded random-number streams.
//!
//! Every source of randomness in a run is one of four named streams. Each
//! stream is a ChaCha8 generator (`rand_chacha::ChaCha8Rng`) keyed by
//! `seed_from_u64` and separated by the ChaCha stream counter, so streams
//! stay independent even when two of them share the same seed value. ChaCha8
//! produces identical output on every platform, which is what makes traces
//! and CSV output reproducible bit for bit.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identity of one named randomness stream within a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamId {
    /// One-time model setup draws (per-user popularity skews).
    ModelSetup,
    /// Per-slot demand sampling.
    SlotDemand,
    /// Pre-run historical observation sampling.
    History,
    /// Policy-internal draws (exploration, mixture sampling).
    Policy,
}

impl StreamId {
    fn counter(self) -> u64 {
        match self {
            StreamId::ModelSetup => 0,
            StreamId::SlotDemand => 1,
            StreamId::History => 2,
            StreamId::Policy => 3,
        }
    }
}

/// Builds the generator for one named stream.
pub fn stream(seed: u64, id: StreamId) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id.counter());
    rng
}
