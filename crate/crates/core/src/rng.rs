//! Counter-based random streams.
//!
//! Every Monte Carlo unit of work (a path, a chunk of samples) draws from its
//! own `RngStream`, identified by the global seed and a 64-bit stream index.
//! ChaCha is a counter-mode generator, so distinct stream indices give
//! independent sequences and results never depend on which thread ran which
//! unit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub index: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, index: u64) -> Self {
        Self { seed, index }
    }

    /// Root stream of a seed.
    pub fn root(seed: u64) -> Self {
        Self::new(seed, 0)
    }

    /// Derived stream for the `k`-th unit of work below this one.
    pub fn substream(&self, k: u64) -> Self {
        let index = splitmix64(self.index ^ splitmix64(k.wrapping_add(0x5bd1_e995)));
        Self::new(self.seed, index)
    }

    /// Named sub-purpose (sampling vs bootstrap vs reference draws).
    pub fn purpose(&self, tag: &str) -> Self {
        let h = tag
            .bytes()
            .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
        self.substream(h)
    }

    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.index);
        rng
    }
}

/// Default number of samples per parallel chunk.
pub const CHUNK: usize = 4096;

/// Split `total` draws into fixed-size chunks, run `f(count, rng)` on each chunk
/// with its own substream and return the per-chunk results in chunk order.
///
/// Chunk boundaries depend only on `total` and `chunk`, never on the thread
/// pool, so any ordered reduction of the output is reproducible.
pub fn par_chunks<T, F>(stream: RngStream, total: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut StreamRng) -> T + Sync,
{
    let chunk = chunk.max(1);
    let n_chunks = total.div_ceil(chunk);
    (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let count = chunk.min(total - c * chunk);
            let mut rng = stream.substream(c as u64).rng();
            f(count, &mut rng)
        })
        .collect()
}
