//! Named random substreams derived from one top-level seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

/// Generator for the substream `name` under `seed`.
///
/// Substreams are keyed by hashing, so adding a new stream never shifts
/// the draws of an existing one.
pub fn substream(seed: u64, name: &str) -> StreamRng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(name.as_bytes());
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// Per-item stream, e.g. one per utterance id, independent of visiting order.
pub fn item_stream(seed: u64, name: &str, item: &str) -> StreamRng {
    substream(seed, &format!("{name}/{item}"))
}
