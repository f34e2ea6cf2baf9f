//! Per-trajectory random streams.
//!
//! Trajectory `i` of a run with master seed `s` draws from a ChaCha8
//! generator keyed with `SHA-256("lorentz-lab/stream/v1" ‖ s_le ‖ i_le)`.
//! The mix is one-way, so streams for different `(s, i)` share no structure
//! beyond what the hash leaks, and a trajectory's stream does not depend on
//! which worker runs it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

const DOMAIN: &[u8] = b"lorentz-lab/stream/v1";

/// The 32-byte key for stream `index` under `master_seed`.
pub fn stream_key(master_seed: u64, index: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(DOMAIN);
    h.update(master_seed.to_le_bytes());
    h.update(index.to_le_bytes());
    h.finalize().into()
}

pub fn stream(master_seed: u64, index: u64) -> StreamRng {
    ChaCha8Rng::from_seed(stream_key(master_seed, index))
}
