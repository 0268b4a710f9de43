//! Photometric training-split augmentation: random noise addition, Gaussian
//! smoothing, and contrast adjustment. The transforms perturb the satellite
//! condition only, so target fields are never corrupted; geometry is left
//! untouched (no flips or rotations).

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::SamplePair;
use crate::rng::rng_from_seed;

#[derive(Debug, Clone)]
pub struct AugmentConfig {
    /// Standard deviation of additive Gaussian noise, in normalized units.
    pub noise_std: f64,
    /// Gaussian smoothing sigma in pixels.
    pub gaussian_sigma: f64,
    /// Contrast factor range (lo <= 1 <= hi), applied about mid-gray 0.5.
    pub contrast_range: (f64, f64),
    /// Independent application probability per transform.
    pub noise_probability: f64,
    pub smoothing_probability: f64,
    pub contrast_probability: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            noise_std: 0.02,
            gaussian_sigma: 1.0,
            contrast_range: (0.9, 1.1),
            noise_probability: 0.5,
            smoothing_probability: 0.25,
            contrast_probability: 0.25,
        }
    }
}

impl AugmentConfig {
    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.contrast_range;
        if self.noise_std < 0.0 || self.gaussian_sigma < 0.0 {
            return Err(Error::Domain("augment noise_std and gaussian_sigma must be >= 0".into()));
        }
        if !(lo > 0.0 && lo <= 1.0 && hi >= 1.0) {
            return Err(Error::Domain(format!(
                "contrast_range must satisfy 0 < lo <= 1 <= hi, got ({lo}, {hi})"
            )));
        }
        for p in [self.noise_probability, self.smoothing_probability, self.contrast_probability] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Domain(format!("apply probability {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Applies each enabled transform with its probability, deterministically in
/// `rng_seed`, and re-clips the result to [0, 1]. Requires a normalized
/// pair.
pub fn augment(pair: &SamplePair, config: &AugmentConfig, rng_seed: u64) -> Result<SamplePair> {
    config.validate()?;
    if !pair.condition.normalized {
        return Err(Error::Domain("augment expects a normalized pair".into()));
    }
    let mut rng = rng_from_seed(rng_seed);
    let mut out = pair.clone();
    let values = &mut out.condition.values;

    if rng.random::<f64>() < config.noise_probability && config.noise_std > 0.0 {
        values.mapv_inplace(|v| {
            let z: f64 = StandardNormal.sample(&mut rng);
            v + config.noise_std * z
        });
    }
    if rng.random::<f64>() < config.smoothing_probability && config.gaussian_sigma > 0.0 {
        *values = gaussian_blur(values, config.gaussian_sigma);
    }
    if rng.random::<f64>() < config.contrast_probability {
        let c = rng.random_range(config.contrast_range.0..=config.contrast_range.1);
        values.mapv_inplace(|v| 0.5 + c * (v - 0.5));
    }
    values.mapv_inplace(|v| v.clamp(0.0, 1.0));
    Ok(out)
}

/// Separable Gaussian blur with reflect padding; kernel radius 3 sigma.
pub(crate) fn gaussian_blur(src: &Array2<f64>, sigma: f64) -> Array2<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    for k in -radius..=radius {
        kernel.push((-0.5 * (k as f64 / sigma).powi(2)).exp());
    }
    let total: f64 = kernel.iter().sum();
    for w in &mut kernel {
        *w /= total;
    }

    let (h, w) = src.dim();
    let reflect = |i: isize, n: usize| -> usize {
        let n = n as isize;
        let mut i = i;
        if i < 0 {
            i = -i;
        }
        if i >= n {
            i = 2 * n - 2 - i;
        }
        i.clamp(0, n - 1) as usize
    };

    let mut rows = Array2::zeros((h, w));
    for i in 0..h {
        for j in 0..w {
            let mut acc = 0.0;
            for (ki, kw) in kernel.iter().enumerate() {
                let jj = reflect(j as isize + ki as isize - radius, w);
                acc += kw * src[[i, jj]];
            }
            rows[[i, j]] = acc;
        }
    }
    let mut out = Array2::zeros((h, w));
    for i in 0..h {
        for j in 0..w {
            let mut acc = 0.0;
            for (ki, kw) in kernel.iter().enumerate() {
                let ii = reflect(i as isize + ki as isize - radius, h);
                acc += kw * rows[[ii, j]];
            }
            out[[i, j]] = acc;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{fit_norm, normalize_pair};
    use crate::pipeline::align::{align, AlignConfig};
    use crate::grid::Channel;
    use crate::ingestion::synth_dataset;

    fn normalized_pair(size: usize) -> SamplePair {
        let (sat, era): (Vec<_>, Vec<_>) = synth_dataset(3, size, 21)
            .unwrap()
            .into_iter()
            .partition(|r| r.variable == Channel::Satellite);
        let pairs = align(&sat, &era, &AlignConfig::default()).unwrap().0;
        let stats = fit_norm(&pairs).unwrap();
        normalize_pair(&pairs[0], &stats).unwrap()
    }

    fn all_off() -> AugmentConfig {
        AugmentConfig {
            noise_probability: 0.0,
            smoothing_probability: 0.0,
            contrast_probability: 0.0,
            ..AugmentConfig::default()
        }
    }

    #[test]
    fn identity_config_returns_input() {
        let pair = normalized_pair(16);
        let out = augment(&pair, &all_off(), 3).unwrap();
        assert_eq!(out.condition.values, pair.condition.values);
        for (a, b) in out.targets.iter().zip(&pair.targets) {
            assert_eq!(a.values, b.values);
        }
    }

    #[test]
    fn same_seed_is_deterministic() {
        let pair = normalized_pair(16);
        let config = AugmentConfig::default();
        let a = augment(&pair, &config, 42).unwrap();
        let b = augment(&pair, &config, 42).unwrap();
        assert_eq!(a.condition.values, b.condition.values);
        let c = augment(&pair, &config, 43).unwrap();
        assert!(a.condition.values != c.condition.values || a.condition.values == pair.condition.values);
    }

    #[test]
    fn targets_are_never_touched() {
        let pair = normalized_pair(16);
        let config = AugmentConfig {
            noise_probability: 1.0,
            smoothing_probability: 1.0,
            contrast_probability: 1.0,
            ..AugmentConfig::default()
        };
        let out = augment(&pair, &config, 5).unwrap();
        assert!(out.condition.values != pair.condition.values);
        for (a, b) in out.targets.iter().zip(&pair.targets) {
            assert_eq!(a.values, b.values);
        }
    }

    #[test]
    fn noise_std_matches_request_monte_carlo() {
        // mid-gray field keeps clipping negligible; 100 seeds x 64x64 pixels
        let mut pair = normalized_pair(64);
        pair.condition.values.fill(0.5);
        let config = AugmentConfig {
            noise_std: 0.1,
            noise_probability: 1.0,
            smoothing_probability: 0.0,
            contrast_probability: 0.0,
            ..AugmentConfig::default()
        };
        let mut sum_sq = 0.0;
        let mut count = 0usize;
        for seed in 0..100 {
            let out = augment(&pair, &config, seed).unwrap();
            for (&a, &b) in out.condition.values.iter().zip(pair.condition.values.iter()) {
                sum_sq += (a - b) * (a - b);
                count += 1;
            }
        }
        let std = (sum_sq / count as f64).sqrt();
        assert!((std - 0.1).abs() / 0.1 < 0.2, "sample std {std} not within 20% of 0.1");
    }

    #[test]
    fn outputs_stay_in_unit_range() {
        let pair = normalized_pair(16);
        let config = AugmentConfig {
            noise_std: 0.5,
            noise_probability: 1.0,
            smoothing_probability: 1.0,
            contrast_probability: 1.0,
            contrast_range: (0.5, 2.0),
            ..AugmentConfig::default()
        };
        let out = augment(&pair, &config, 11).unwrap();
        assert!(out.condition.validate().is_ok());
    }

    #[test]
    fn requires_normalized_pair() {
        let (sat, era): (Vec<_>, Vec<_>) = synth_dataset(3, 16, 21)
            .unwrap()
            .into_iter()
            .partition(|r| r.variable == Channel::Satellite);
        let pairs = align(&sat, &era, &AlignConfig::default()).unwrap().0;
        assert!(augment(&pairs[0], &AugmentConfig::default(), 1).is_err());
    }
}
