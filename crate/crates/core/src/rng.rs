//! Seeded random generation. Each sample index gets its own stream, so
//! sample loops give the same values in any evaluation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SampleRng = ChaCha8Rng;

/// Generator for sample `index` under `seed`.
pub fn stream(seed: u64, index: u64) -> SampleRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(index);
    r
}

/// Seed derived from a master seed and a name (FNV-1a over the name).
pub fn derive(seed: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h ^ seed.rotate_left(17)
}

pub fn uniform_vec(r: &mut SampleRng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * (2.0 * r.gen::<f64>() - 1.0)).collect()
}
