//! Deterministic named RNG substreams.
//!
//! Every random choice in the pipeline draws from a stream derived from one
//! root seed plus a label ("demos/rollout/3", "suite/random/17", ...), so a
//! single `--seed` reproduces byte-identical runs regardless of evaluation
//! order, and adding a consumer never perturbs existing streams.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Stream for `label` under `root`. Same inputs, same stream, forever.
pub fn substream(root: u64, label: &str) -> ChaCha12Rng {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in label.as_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    let mut x = root ^ h;
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        x = splitmix64(x);
        chunk.copy_from_slice(&x.to_le_bytes());
    }
    ChaCha12Rng::from_seed(seed)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
