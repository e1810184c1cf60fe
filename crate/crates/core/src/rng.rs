//! Hierarchical deterministic RNG streams.
//!
//! Every random decision in the pipeline draws from a stream derived from a
//! root seed and a path of labels/indices (for example
//! `root → "augment" → row → aug index → "elastic"`). Identical paths yield
//! identical sequences on every platform and under any thread schedule, so
//! parallel fan-out cannot change what any single image looks like.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

const DOMAIN: &[u8] = b"barview.rng.v1";

/// A derivation point in the seed tree.
///
/// `RngStream` is cheap to clone and copy around; call [`RngStream::rng`] to
/// materialize a generator at the current point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    key: [u8; 32],
}

impl RngStream {
    /// Root stream for a run.
    pub fn from_root(seed: u64) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(DOMAIN);
        hasher.update(seed.to_le_bytes());
        RngStream {
            key: hasher.finalize().into(),
        }
    }

    /// Derive a child stream by label (stage tag).
    pub fn child(&self, label: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(self.key);
        hasher.update([0u8]);
        hasher.update(label.as_bytes());
        RngStream {
            key: hasher.finalize().into(),
        }
    }

    /// Derive a child stream by index (sample id, aug index, ...).
    pub fn child_index(&self, index: u64) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(self.key);
        hasher.update([1u8]);
        hasher.update(index.to_le_bytes());
        RngStream {
            key: hasher.finalize().into(),
        }
    }

    /// Generator seeded at this point of the tree.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.key)
    }

    /// Collapse the stream to a plain 64-bit seed (for recording in manifests).
    pub fn seed64(&self) -> u64 {
        u64::from_le_bytes(self.key[..8].try_into().unwrap())
    }
}
