//! Labelled seed derivation. All randomness in the crate flows from a root
//! seed through [`derive`], so no component shares generator state with
//! another and item-level results do not depend on processing order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

pub fn derive(seed: u64, purpose: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(purpose.as_bytes());
    let out = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&out[..8]);
    u64::from_le_bytes(bytes)
}

pub fn derive_item(seed: u64, purpose: &str, item: &str) -> u64 {
    derive(derive(seed, purpose), item)
}

pub fn rng(seed: u64, purpose: &str) -> Rng {
    Rng::seed_from_u64(derive(seed, purpose))
}

pub fn rng_from(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
