//! Counter-based expansion of one master seed into independent random streams.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Pipeline stage that consumes randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Split = 0,
    Init = 1,
    Shuffle = 2,
    Subsample = 3,
}

/// Returns the generator for `stream` under `master`. Each stage draws from its
/// own ChaCha stream, so changing how much one stage consumes never shifts another.
pub fn stream_rng(master: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream as u64);
    rng
}
