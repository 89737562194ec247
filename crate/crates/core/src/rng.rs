//! Named random substreams derived from one root seed.
//!
//! Customer arrivals, online orders and the picker's exploration draw from
//! separate ChaCha streams, so two policies run on the same episode seed see
//! the same customers and the same orders.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Customers = 1,
    Orders = 2,
    Exploration = 3,
    TableInit = 4,
    Layout = 5,
}

pub fn substream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Seed of episode `index` under `root` (splitmix64 finalizer).
pub fn episode_seed(root: u64, index: u64) -> u64 {
    let mut z = root ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
