//! Seeded randomness. Every stochastic operation in the crate draws from a
//! ChaCha20 generator constructed from an explicit seed, so runs are
//! reproducible from the seeds recorded in manifests.

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

/// The project-wide RNG.
pub type SeededRng = ChaCha20Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Derives an independent stream seed from a master seed plus a purpose tag
/// and an index. A fixed odd multiplier mix keeps streams decorrelated
/// without any shared state between them.
pub fn derive_seed(master: u64, tag: &str, index: u64) -> u64 {
    let mut h: u64 = 0x9e37_79b9_7f4a_7c15 ^ master;
    for b in tag.as_bytes() {
        h = (h ^ u64::from(*b)).wrapping_mul(0x100_0000_01b3);
    }
    h = (h ^ index).wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h = h.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    h ^ (h >> 33)
}

pub fn standard_normal_2d(rng: &mut impl Rng, h: usize, w: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((h, w), || StandardNormal.sample(rng))
}

pub fn standard_normal_3d(rng: &mut impl Rng, c: usize, h: usize, w: usize) -> Array3<f64> {
    Array3::from_shape_simple_fn((c, h, w), || StandardNormal.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_seed_is_deterministic_and_stream_sensitive() {
        assert_eq!(derive_seed(7, "train", 0), derive_seed(7, "train", 0));
        assert_ne!(derive_seed(7, "train", 0), derive_seed(7, "train", 1));
        assert_ne!(derive_seed(7, "train", 0), derive_seed(7, "eval", 0));
        assert_ne!(derive_seed(7, "train", 0), derive_seed(8, "train", 0));
    }

    #[test]
    fn same_seed_same_noise() {
        let a = standard_normal_3d(&mut rng_from_seed(3), 2, 4, 4);
        let b = standard_normal_3d(&mut rng_from_seed(3), 2, 4, 4);
        assert_eq!(a, b);
    }
}
