//! Seed derivation for reproducible parallel runs.
//!
//! Every replicate owns a ChaCha stream selected by its index, under a key
//! derived from the master seed and an experiment label. Results never depend
//! on which worker runs which replicate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator for a plain seed, as used by single-shot commands.
pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for `replicate` of the experiment labelled `label`.
pub fn replicate_rng(master_seed: u64, label: &str, replicate: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(master_seed, label));
    rng.set_stream(replicate);
    rng
}

/// A plain seed derived from `(master_seed, label, index)`, used to record
/// per-experiment designs in re-runnable form.
pub fn derive_seed(master_seed: u64, label: &str, index: u64) -> u64 {
    use rand::RngCore;
    replicate_rng(master_seed, label, index).next_u64()
}

fn mix(seed: u64, label: &str) -> u64 {
    // FNV-1a over the label, folded into the seed with a splitmix64 finalizer
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = seed ^ h.rotate_left(17);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
