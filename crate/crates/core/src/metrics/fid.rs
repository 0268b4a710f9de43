//! Frechet distance between the feature statistics of two grid sets:
//! ||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^{1/2}).

use ndarray::{Array1, Array2};

use super::features::FeatureExtractor;
use crate::error::{Error, Result};

/// Eigenvalues below this are clamped before square roots, which keeps
/// singular covariances (small sets, correlated features) well-defined.
pub const FID_EIGENVALUE_CLAMP: f64 = 1e-10;

/// Frechet distance over extractor features. Needs at least two samples
/// per set (sample covariance).
pub fn fid(
    pred_set: &[Array2<f64>],
    true_set: &[Array2<f64>],
    extractor: &dyn FeatureExtractor,
) -> Result<f64> {
    if pred_set.len() < 2 || true_set.len() < 2 {
        return Err(Error::Domain(format!(
            "fid needs >= 2 samples per set, got {} and {}",
            pred_set.len(),
            true_set.len()
        )));
    }
    let fp: Vec<Array1<f64>> = pred_set.iter().map(|g| extractor.features(g)).collect();
    let ft: Vec<Array1<f64>> = true_set.iter().map(|g| extractor.features(g)).collect();
    let (mu_p, cov_p) = feature_stats(&fp);
    let (mu_t, cov_t) = feature_stats(&ft);
    Ok(frechet_distance(&mu_p, &cov_p, &mu_t, &cov_t))
}

/// Mean vector and (n-1)-normalized sample covariance of feature rows.
pub fn feature_stats(features: &[Array1<f64>]) -> (Array1<f64>, Array2<f64>) {
    let n = features.len();
    let d = features[0].len();
    let mut mu = Array1::<f64>::zeros(d);
    for f in features {
        mu += f;
    }
    mu /= n as f64;
    let mut cov = Array2::<f64>::zeros((d, d));
    for f in features {
        let c = f - &mu;
        for i in 0..d {
            for j in 0..d {
                cov[[i, j]] += c[i] * c[j];
            }
        }
    }
    cov /= (n - 1) as f64;
    (mu, cov)
}

/// The closed-form Gaussian Frechet distance. Tr((S1 S2)^{1/2}) is
/// computed as Tr((S2^{1/2} S1 S2^{1/2})^{1/2}), keeping every
/// eigendecomposition symmetric; tiny negative distances from rounding are
/// clamped to zero.
pub fn frechet_distance(
    mu1: &Array1<f64>,
    cov1: &Array2<f64>,
    mu2: &Array1<f64>,
    cov2: &Array2<f64>,
) -> f64 {
    let dmu = mu1 - mu2;
    let mean_term: f64 = dmu.iter().map(|v| v * v).sum();

    let s2_half = sqrtm_psd(cov2);
    let inner = s2_half.dot(cov1).dot(&s2_half);
    let tr_sqrt: f64 = symmetric_eigenvalues(&inner)
        .into_iter()
        .map(|l| l.max(FID_EIGENVALUE_CLAMP).sqrt())
        .sum();

    let trace1: f64 = (0..cov1.dim().0).map(|i| cov1[[i, i]]).sum();
    let trace2: f64 = (0..cov2.dim().0).map(|i| cov2[[i, i]]).sum();
    (mean_term + trace1 + trace2 - 2.0 * tr_sqrt).max(0.0)
}

/// Symmetric PSD square root via eigendecomposition with clamping.
fn sqrtm_psd(a: &Array2<f64>) -> Array2<f64> {
    let (evals, evecs) = jacobi_eigen(a);
    let d = a.dim().0;
    let mut out = Array2::zeros((d, d));
    for k in 0..d {
        let l = evals[k].max(FID_EIGENVALUE_CLAMP).sqrt();
        for i in 0..d {
            for j in 0..d {
                out[[i, j]] += l * evecs[[i, k]] * evecs[[j, k]];
            }
        }
    }
    out
}

fn symmetric_eigenvalues(a: &Array2<f64>) -> Vec<f64> {
    jacobi_eigen(a).0
}

/// Cyclic Jacobi eigendecomposition for symmetric matrices. Returns
/// (eigenvalues, column eigenvectors). Dimensions here are small (feature
/// widths), so the O(d^3) sweeps are cheap.
fn jacobi_eigen(m: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let d = m.dim().0;
    let mut a = m.clone();
    // enforce exact symmetry against accumulated asymmetric rounding
    for i in 0..d {
        for j in 0..i {
            let avg = 0.5 * (a[[i, j]] + a[[j, i]]);
            a[[i, j]] = avg;
            a[[j, i]] = avg;
        }
    }
    let mut v = Array2::<f64>::eye(d);
    let frob: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);

    for _sweep in 0..100 {
        let off: f64 = (0..d)
            .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[[i, j]] * a[[i, j]])
            .sum::<f64>()
            .sqrt();
        if off < 1e-14 * frob {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[[p, q]];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = 0.5 * (a[[q, q]] - a[[p, p]]) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..d).map(|i| a[[i, i]]).collect(), v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::features::RandomConvFeatures;
    use crate::rng::{rng_from_seed, standard_normal_2d};
    use ndarray::{array, Array3};
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn jacobi_recovers_known_spectrum() {
        let m = array![[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 5.0]];
        let (mut evals, _) = jacobi_eigen(&m);
        evals.sort_by(f64::total_cmp);
        let expected = [1.0, 3.0, 5.0];
        for (got, want) in evals.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn sqrtm_squares_back() {
        let m = array![[4.0, 1.0], [1.0, 3.0]];
        let r = sqrtm_psd(&m);
        let sq = r.dot(&r);
        for (a, b) in sq.iter().zip(m.iter()) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn identical_sets_score_zero() {
        let fx = RandomConvFeatures::default();
        let mut rng = rng_from_seed(1);
        let set: Vec<_> = (0..8)
            .map(|_| standard_normal_2d(&mut rng, 8, 8).mapv(|v| v * 0.2 + 0.5))
            .collect();
        let d = fid(&set, &set, &fx).unwrap();
        assert!(d.abs() < 1e-6, "fid(x, x) = {d}");
    }

    #[test]
    fn permutation_invariant() {
        let fx = RandomConvFeatures::default();
        let mut rng = rng_from_seed(2);
        let a: Vec<_> = (0..6)
            .map(|_| standard_normal_2d(&mut rng, 8, 8).mapv(|v| v * 0.2 + 0.5))
            .collect();
        let b: Vec<_> = (0..6)
            .map(|_| standard_normal_2d(&mut rng, 8, 8).mapv(|v| v * 0.3 + 0.4))
            .collect();
        let d1 = fid(&a, &b, &fx).unwrap();
        let mut a_rev = a.clone();
        a_rev.reverse();
        let d2 = fid(&a_rev, &b, &fx).unwrap();
        assert!((d1 - d2).abs() < 1e-9);
        assert!(d1 >= 0.0);
    }

    /// Extractor whose feature is the grid mean: lets the Gaussian closed
    /// form be checked directly.
    struct MeanFeature;
    impl FeatureExtractor for MeanFeature {
        fn layer_activations(&self, _grid: &Array2<f64>) -> Vec<Array3<f64>> {
            Vec::new()
        }
        fn features(&self, grid: &Array2<f64>) -> ndarray::Array1<f64> {
            array![grid.mean().unwrap_or(0.0)]
        }
    }

    #[test]
    fn one_dimensional_clouds_approach_closed_form() {
        // unit-variance 1-D feature clouds with means 0 and 3:
        // FID -> (3)^2 + (1 + 1 - 2) = 9
        let mut rng = rng_from_seed(3);
        let n = 10_000;
        let make_set = |rng: &mut crate::rng::SeededRng, mean: f64| -> Vec<Array2<f64>> {
            (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    Array2::from_elem((2, 2), mean + z)
                })
                .collect()
        };
        let a = make_set(&mut rng, 0.0);
        let b = make_set(&mut rng, 3.0);
        let d = fid(&a, &b, &MeanFeature).unwrap();
        assert!((d - 9.0).abs() / 9.0 < 0.1, "fid {d} not within 10% of 9");
    }

    #[test]
    fn too_few_samples_is_an_error() {
        let fx = RandomConvFeatures::default();
        let one = vec![Array2::zeros((8, 8))];
        let two = vec![Array2::zeros((8, 8)), Array2::ones((8, 8))];
        assert!(fid(&one, &two, &fx).is_err());
    }
}
