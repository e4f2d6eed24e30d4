//! Reproducible random streams.
//!
//! Every Monte Carlo replicate owns a ChaCha8 stream keyed by
//! `(base_seed, grid_index, replicate_index)`; the key selects the seed and the
//! 64-bit stream id, so substreams never overlap and results do not depend on
//! scheduling.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream for replicate `replicate` of grid point `grid` under `base_seed`.
pub fn substream(base_seed: u64, grid: u32, replicate: u32) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream((u64::from(grid) << 32) | u64::from(replicate));
    rng
}

/// Independent child streams for the separate random roles of one run.
///
/// Drawing each role from its own stream keeps, for example, the Brownian
/// path a prefix-stable function of the seed when the horizon changes.
#[derive(Debug, Clone)]
pub struct RoleStreams {
    pub feedback: StreamRng,
    pub dither: StreamRng,
    pub noise: StreamRng,
    pub posterior: StreamRng,
}

impl RoleStreams {
    pub fn split<R: RngCore>(parent: &mut R) -> Self {
        let mut child = || ChaCha8Rng::seed_from_u64(parent.next_u64());
        RoleStreams {
            feedback: child(),
            dither: child(),
            noise: child(),
            posterior: child(),
        }
    }
}
