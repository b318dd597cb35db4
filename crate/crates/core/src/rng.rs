//! Seed derivation for reproducible, order-independent random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 stream keyed
//! by `(seed, trial)` and selected by a per-item stream id, so the value of
//! row `i` never depends on how many other rows were generated first or on
//! which worker generated them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream for item `item` of trial `trial` under master seed `seed`.
pub fn stream(seed: u64, trial: u64, item: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&trial.to_le_bytes());
    key[16..24].copy_from_slice(&0x6f72_6c69_637a_6c61u64.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(item);
    rng
}

/// Derive a child seed from a parent seed and a label (splitmix64 finalizer).
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    let mut z = seed ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
