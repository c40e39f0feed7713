//! Keyed random streams.
//!
//! Every stream is a ChaCha8 keystream keyed by `(seed, purpose, index)`.
//! Workers that need randomness derive their own stream from the task index,
//! so the numbers a task sees never depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// FNV-1a, used only to fold a purpose tag into the stream key.
fn tag_hash(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

pub fn stream(seed: u64, purpose: &str, index: u64) -> Stream {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&tag_hash(purpose).to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    key[24..].copy_from_slice(b"nsclab\0\0");
    ChaCha8Rng::from_seed(key)
}

/// Child seed for a sub-task, e.g. trial `index` of a suite seeded with `seed`.
pub fn derive_seed(seed: u64, purpose: &str, index: u64) -> u64 {
    use rand::RngCore;
    stream(seed, purpose, index).next_u64()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn streams_are_keyed() {
        let a = stream(7, "matrix", 0).next_u64();
        assert_eq!(a, stream(7, "matrix", 0).next_u64());
        assert_ne!(a, stream(7, "matrix", 1).next_u64());
        assert_ne!(a, stream(7, "vector", 0).next_u64());
        assert_ne!(a, stream(8, "matrix", 0).next_u64());
    }
}
