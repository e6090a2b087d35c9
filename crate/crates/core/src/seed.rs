//! Seed derivation. Every stage draws from its own stream derived from the
//! top-level seed and the stage name, so adding a stage never shifts the
//! random numbers another stage sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StageRng = ChaCha8Rng;

/// First eight bytes (little endian) of `SHA-256(seed_le || stage)`.
pub fn derive_seed(seed: u64, stage: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(stage.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn rng_from_seed(seed: u64) -> StageRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stage_rng(seed: u64, stage: &str) -> StageRng {
    rng_from_seed(derive_seed(seed, stage))
}
