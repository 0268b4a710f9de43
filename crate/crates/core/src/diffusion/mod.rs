//! The conditional denoising diffusion process: forward noising of the
//! target fields, the noise-prediction training objective, and the
//! iterative conditional reverse sampler.
//!
//! Everything here is plain array math over (4, H, W) target stacks; the
//! network behind [`NoisePredictor`] is swappable, which keeps the process
//! algebra testable against closed-form oracles.

mod schedule;

pub use schedule::{build_schedule, NoiseSchedule, ScheduleConfig, ScheduleKind};

use ndarray::{Array2, Array3};
use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::clip_in_place;
use crate::rng::standard_normal_3d;

/// A conditional noise predictor: given the satellite condition x, the noisy
/// target stack y_t and the cumulative noise level gamma_bar_t, predict the
/// noise component that produced y_t.
pub trait NoisePredictor {
    fn predict_noise(
        &self,
        condition: &Array2<f64>,
        noisy: &Array3<f64>,
        gamma_bar: f64,
    ) -> Result<Array3<f64>>;
}

impl<F> NoisePredictor for F
where
    F: Fn(&Array2<f64>, &Array3<f64>, f64) -> Result<Array3<f64>>,
{
    fn predict_noise(
        &self,
        condition: &Array2<f64>,
        noisy: &Array3<f64>,
        gamma_bar: f64,
    ) -> Result<Array3<f64>> {
        self(condition, noisy, gamma_bar)
    }
}

/// State of the reverse process at step t: the current noisy stack and its
/// condition.
#[derive(Debug, Clone)]
pub struct DiffusionState {
    pub y: Array3<f64>,
    pub t: usize,
    pub condition: Array2<f64>,
}

impl DiffusionState {
    pub fn new(y: Array3<f64>, t: usize, condition: Array2<f64>) -> Result<Self> {
        let (_, h, w) = y.dim();
        if (h, w) != condition.dim() {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", condition.dim()),
                got: format!("({h}, {w})"),
            });
        }
        Ok(DiffusionState { y, t, condition })
    }
}

/// Closed-form forward noising: y_t = sqrt(gamma_bar) * y0 +
/// sqrt(1 - gamma_bar) * eps.
pub fn forward_diffuse(
    y0: &Array3<f64>,
    eps: &Array3<f64>,
    gamma_bar: f64,
) -> Result<Array3<f64>> {
    if y0.dim() != eps.dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", y0.dim()),
            got: format!("{:?}", eps.dim()),
        });
    }
    if !(0.0 < gamma_bar && gamma_bar <= 1.0) {
        return Err(Error::Domain(format!("gamma_bar {gamma_bar} outside (0, 1]")));
    }
    let signal = gamma_bar.sqrt();
    let noise = (1.0 - gamma_bar).sqrt();
    Ok(y0 * signal + eps * noise)
}

/// One drawn training example for the noise-prediction objective.
#[derive(Debug, Clone)]
pub struct TrainingTarget {
    pub t: usize,
    pub gamma_bar: f64,
    pub y_t: Array3<f64>,
    pub eps: Array3<f64>,
}

/// Draws t uniform in 1..=T and eps ~ N(0, I), and noises the clean stack.
/// Both the trait-object training step and the batched network trainer
/// build their examples here, so the objective has a single definition.
pub fn training_target(
    y0: &Array3<f64>,
    schedule: &NoiseSchedule,
    rng: &mut impl Rng,
) -> Result<TrainingTarget> {
    let (c, h, w) = y0.dim();
    let t = rng.random_range(1..=schedule.steps());
    let gamma_bar = schedule.gamma_bar(t);
    let eps = standard_normal_3d(rng, c, h, w);
    let y_t = forward_diffuse(y0, &eps, gamma_bar)?;
    Ok(TrainingTarget { t, gamma_bar, y_t, eps })
}

/// Single-example objective: mean squared error between the model's
/// predicted noise and the true noise drawn by [`training_target`].
pub fn training_step(
    model: &dyn NoisePredictor,
    condition: &Array2<f64>,
    y0: &Array3<f64>,
    schedule: &NoiseSchedule,
    rng: &mut impl Rng,
) -> Result<f64> {
    let target = training_target(y0, schedule, rng)?;
    let eps_hat = model.predict_noise(condition, &target.y_t, target.gamma_bar)?;
    let loss = mse(&eps_hat, &target.eps)?;
    if !loss.is_finite() {
        return Err(Error::NumericalFailure {
            step: Some(target.t),
            context: "non-finite training loss".into(),
        });
    }
    Ok(loss)
}

pub fn mse(a: &Array3<f64>, b: &Array3<f64>) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", a.dim()),
            got: format!("{:?}", b.dim()),
        });
    }
    Ok((a - b).mapv(|d| d * d).mean().unwrap_or(0.0))
}

/// One reverse-process update:
///
/// y_{t-1} = (y_t - beta_t / sqrt(1 - gamma_bar_t) * eps_hat) / sqrt(alpha_t)
///           + sigma_t * z,   sigma_t = sqrt(beta_t)
///
/// with fixed variance. At t = 1 the noise term is forced to zero, making
/// the final step deterministic.
pub fn reverse_step(
    model: &dyn NoisePredictor,
    condition: &Array2<f64>,
    y_t: &Array3<f64>,
    t: usize,
    z: &Array3<f64>,
    schedule: &NoiseSchedule,
) -> Result<Array3<f64>> {
    if !(1..=schedule.steps()).contains(&t) {
        return Err(Error::Domain(format!(
            "reverse step index {t} outside 1..={}",
            schedule.steps()
        )));
    }
    if z.dim() != y_t.dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", y_t.dim()),
            got: format!("{:?}", z.dim()),
        });
    }
    let gamma_bar = schedule.gamma_bar(t);
    let eps_hat = model.predict_noise(condition, y_t, gamma_bar)?;
    let mean_scale = 1.0 / schedule.alpha(t).sqrt();
    let eps_coef = schedule.beta(t) / (1.0 - gamma_bar).sqrt();
    let sigma = if t > 1 { schedule.beta(t).sqrt() } else { 0.0 };

    let mut out = (y_t - &(eps_hat * eps_coef)) * mean_scale;
    if sigma > 0.0 {
        out = out + z * sigma;
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure {
            step: Some(t),
            context: "non-finite reverse-step output".into(),
        });
    }
    Ok(out)
}

/// Full conditional sampler: start from pure Gaussian noise y_T, iterate
/// [`reverse_step`] for t = T..1 (drawing z ~ N(0, I) while t > 1), and
/// clip the final reconstruction to [0, 1].
pub fn sample(
    model: &dyn NoisePredictor,
    condition: &Array2<f64>,
    schedule: &NoiseSchedule,
    rng: &mut impl Rng,
) -> Result<Array3<f64>> {
    let (h, w) = condition.dim();
    let mut state = DiffusionState::new(
        standard_normal_3d(rng, 4, h, w),
        schedule.steps(),
        condition.clone(),
    )?;
    let zeros = Array3::zeros((4, h, w));
    for t in (1..=schedule.steps()).rev() {
        let z = if t > 1 { standard_normal_3d(rng, 4, h, w) } else { zeros.clone() };
        state.y = reverse_step(model, &state.condition, &state.y, t, &z, schedule)?;
        state.t = t - 1;
    }
    clip_in_place(&mut state.y, 0.0, 1.0);
    Ok(state.y)
}
