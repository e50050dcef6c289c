//! Seeded random streams. Every randomized unit of work owns a stream derived
//! from a master seed and its indices, so results do not depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type AuctionRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> AuctionRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a path of indices into a child seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p.wrapping_add(0xA076_1D64_78BD_642F))))
}

pub fn derived_rng(master: u64, path: &[u64]) -> AuctionRng {
    rng_from_seed(derive_seed(master, path))
}

/// Draws an index with probability proportional to `weights` (which need not be
/// normalized). Consumes exactly one uniform draw. Returns `None` when every
/// weight is zero.
pub fn sample_weighted<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    let u: f64 = rng.random::<f64>() * total;
    if !(total > 0.0) {
        return None;
    }
    let mut acc = 0.0;
    let mut last_positive = None;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = Some(i);
            if u < acc {
                return Some(i);
            }
        }
    }
    last_positive
}
