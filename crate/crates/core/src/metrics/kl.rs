//! Kullback-Leibler divergence between per-image value histograms.

use ndarray::Array2;

use crate::error::{Error, Result};

pub const KL_DEFAULT_BINS: usize = 64;
pub const KL_SMOOTHING: f64 = 1e-10;

/// KL(p || q) = sum p ln(p/q) with p the true-image histogram and q the
/// predicted-image histogram, both over [0, 1] with `n_bins` bins and
/// additive smoothing. Values outside [0, 1] land in the edge bins.
pub fn kl_div(pred: &Array2<f64>, truth: &Array2<f64>, n_bins: usize) -> Result<f64> {
    if pred.dim() != truth.dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", truth.dim()),
            got: format!("{:?}", pred.dim()),
        });
    }
    if n_bins < 2 {
        return Err(Error::Domain("kl_div needs at least 2 bins".into()));
    }
    let p = histogram(truth, n_bins);
    let q = histogram(pred, n_bins);
    Ok(kl_from_histograms(&p, &q, KL_SMOOTHING))
}

pub fn kl_div_default(pred: &Array2<f64>, truth: &Array2<f64>) -> Result<f64> {
    kl_div(pred, truth, KL_DEFAULT_BINS)
}

/// Bin counts over [0, 1].
pub(crate) fn histogram(values: &Array2<f64>, n_bins: usize) -> Vec<f64> {
    let mut counts = vec![0.0; n_bins];
    for &v in values.iter() {
        let idx = ((v * n_bins as f64) as isize).clamp(0, n_bins as isize - 1) as usize;
        counts[idx] += 1.0;
    }
    counts
}

/// Discrete KL with additive smoothing on both distributions.
pub fn kl_from_histograms(p_counts: &[f64], q_counts: &[f64], eps: f64) -> f64 {
    let pn: f64 = p_counts.iter().sum::<f64>() + eps * p_counts.len() as f64;
    let qn: f64 = q_counts.iter().sum::<f64>() + eps * q_counts.len() as f64;
    p_counts
        .iter()
        .zip(q_counts)
        .map(|(&pc, &qc)| {
            let p = (pc + eps) / pn;
            let q = (qc + eps) / qn;
            p * (p / q).ln()
        })
        .sum()
}
