//! Perceptual distance: per-layer comparison of unit-normalized extractor
//! activations, summed over layers with unit weights.

use ndarray::{Array2, Array3};

use super::features::FeatureExtractor;
use crate::error::{Error, Result};

const NORM_EPS: f64 = 1e-10;

/// For every extractor layer: channel-unit-normalize the activation vector
/// at each spatial location, take the squared difference norm, average over
/// locations; the distance is the sum over layers.
pub fn perceptual_distance(
    pred: &Array2<f64>,
    truth: &Array2<f64>,
    extractor: &dyn FeatureExtractor,
) -> Result<f64> {
    if pred.dim() != truth.dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", truth.dim()),
            got: format!("{:?}", pred.dim()),
        });
    }
    let layers_p = extractor.layer_activations(pred);
    let layers_t = extractor.layer_activations(truth);
    let mut total = 0.0;
    for (lp, lt) in layers_p.iter().zip(&layers_t) {
        total += layer_distance(lp, lt);
    }
    Ok(total)
}

fn layer_distance(a: &Array3<f64>, b: &Array3<f64>) -> f64 {
    let (c, h, w) = a.dim();
    let mut acc = 0.0;
    for i in 0..h {
        for j in 0..w {
            let mut na = 0.0;
            let mut nb = 0.0;
            for ch in 0..c {
                na += a[[ch, i, j]] * a[[ch, i, j]];
                nb += b[[ch, i, j]] * b[[ch, i, j]];
            }
            let na = na.sqrt() + NORM_EPS;
            let nb = nb.sqrt() + NORM_EPS;
            let mut d = 0.0;
            for ch in 0..c {
                let diff = a[[ch, i, j]] / na - b[[ch, i, j]] / nb;
                d += diff * diff;
            }
            acc += d;
        }
    }
    acc / (h * w) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::features::RandomConvFeatures;
    use crate::rng::{rng_from_seed, standard_normal_2d};

    #[test]
    fn identical_inputs_are_zero() {
        let fx = RandomConvFeatures::default();
        let g = standard_normal_2d(&mut rng_from_seed(1), 8, 8).mapv(|v| v * 0.2 + 0.5);
        assert_eq!(perceptual_distance(&g, &g, &fx).unwrap(), 0.0);
    }

    #[test]
    fn non_negative_everywhere() {
        let fx = RandomConvFeatures::default();
        let mut rng = rng_from_seed(2);
        for _ in 0..20 {
            let a = standard_normal_2d(&mut rng, 8, 8);
            let b = standard_normal_2d(&mut rng, 8, 8);
            assert!(perceptual_distance(&a, &b, &fx).unwrap() >= 0.0);
        }
    }

    #[test]
    fn monotone_under_increasing_noise_on_average() {
        let fx = RandomConvFeatures::default();
        let base = standard_normal_2d(&mut rng_from_seed(3), 16, 16).mapv(|v| v * 0.2 + 0.5);
        let sigmas = [0.05, 0.2, 0.8];
        let mut means = Vec::new();
        for &sigma in &sigmas {
            let mut acc = 0.0;
            for seed in 0..100 {
                let noise = standard_normal_2d(&mut rng_from_seed(1000 + seed), 16, 16);
                let noisy = &base + &(noise * sigma);
                acc += perceptual_distance(&noisy, &base, &fx).unwrap();
            }
            means.push(acc / 100.0);
        }
        assert!(
            means[0] < means[1] && means[1] < means[2],
            "distances not increasing with noise: {means:?}"
        );
    }
}
