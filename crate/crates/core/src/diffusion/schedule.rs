//! Per-step noise coefficients for the forward and reverse processes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of the beta sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Linear,
    Cosine,
}

/// Serializable schedule parameters, as stored in configs and checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub steps: usize,
    pub kind: ScheduleKind,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig { steps: 1000, kind: ScheduleKind::Linear, beta_start: 1e-4, beta_end: 0.02 }
    }
}

/// Noise schedule over T steps: per-step variances beta_t, retention
/// factors alpha_t = 1 - beta_t, and the cumulative noise level
/// gamma_bar_t = prod_{s<=t} alpha_s fed to the network. Indexing is
/// 1-based (t in 1..=T) to match the process algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    config: ScheduleConfig,
    beta: Vec<f64>,
    alpha: Vec<f64>,
    gamma_bar: Vec<f64>,
}

/// Builds a schedule of the requested kind and validates the invariants:
/// beta in (0, 1) non-decreasing, gamma_bar strictly decreasing.
pub fn build_schedule(
    steps: usize,
    kind: ScheduleKind,
    beta_start: f64,
    beta_end: f64,
) -> Result<NoiseSchedule> {
    if steps < 1 {
        return Err(Error::ScheduleConstruction("steps must be >= 1".into()));
    }
    if !(0.0 < beta_start && beta_start <= beta_end && beta_end < 1.0) {
        return Err(Error::ScheduleConstruction(format!(
            "need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})"
        )));
    }
    let beta = match kind {
        ScheduleKind::Linear => linear_betas(steps, beta_start, beta_end),
        ScheduleKind::Cosine => cosine_betas(steps),
    };
    NoiseSchedule::from_betas(ScheduleConfig { steps, kind, beta_start, beta_end }, beta)
}

impl NoiseSchedule {
    pub fn from_config(config: &ScheduleConfig) -> Result<NoiseSchedule> {
        build_schedule(config.steps, config.kind, config.beta_start, config.beta_end)
    }

    fn from_betas(config: ScheduleConfig, beta: Vec<f64>) -> Result<NoiseSchedule> {
        let alpha: Vec<f64> = beta.iter().map(|b| 1.0 - b).collect();
        let mut gamma_bar = Vec::with_capacity(beta.len());
        let mut acc = 1.0;
        for a in &alpha {
            acc *= a;
            gamma_bar.push(acc);
        }
        let schedule = NoiseSchedule { config, beta, alpha, gamma_bar };
        schedule.check_invariants()?;
        Ok(schedule)
    }

    fn check_invariants(&self) -> Result<()> {
        for &b in &self.beta {
            if !(0.0 < b && b < 1.0) {
                return Err(Error::ScheduleConstruction(format!("beta {b} outside (0, 1)")));
            }
        }
        if self.beta.windows(2).any(|p| p[0] > p[1]) {
            return Err(Error::ScheduleConstruction("beta sequence decreases".into()));
        }
        if self.gamma_bar.windows(2).any(|p| p[0] <= p[1]) {
            return Err(Error::ScheduleConstruction(
                "gamma_bar is not strictly decreasing".into(),
            ));
        }
        if self.gamma_bar.iter().any(|&g| !(0.0 < g && g <= 1.0)) {
            return Err(Error::ScheduleConstruction("gamma_bar left (0, 1]".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        self.config.steps
    }

    pub fn config(&self) -> &ScheduleConfig {
        &self.config
    }

    /// Per-step variance beta_t, t in 1..=T.
    pub fn beta(&self, t: usize) -> f64 {
        self.check_t(t);
        self.beta[t - 1]
    }

    /// Retention factor alpha_t = 1 - beta_t.
    pub fn alpha(&self, t: usize) -> f64 {
        self.check_t(t);
        self.alpha[t - 1]
    }

    /// Cumulative noise level gamma_bar_t = prod_{s<=t} alpha_s.
    pub fn gamma_bar(&self, t: usize) -> f64 {
        self.check_t(t);
        self.gamma_bar[t - 1]
    }

    pub fn betas(&self) -> &[f64] {
        &self.beta
    }

    pub fn gamma_bars(&self) -> &[f64] {
        &self.gamma_bar
    }

    fn check_t(&self, t: usize) {
        assert!(
            (1..=self.config.steps).contains(&t),
            "step index {t} outside 1..={}",
            self.config.steps
        );
    }
}

fn linear_betas(steps: usize, beta_start: f64, beta_end: f64) -> Vec<f64> {
    if steps == 1 {
        return vec![beta_start];
    }
    let step = (beta_end - beta_start) / (steps - 1) as f64;
    (0..steps).map(|i| beta_start + step * i as f64).collect()
}

/// Squared-cosine cumulative schedule with the conventional 0.008 offset;
/// betas derived from successive gamma_bar ratios and capped at 0.999.
fn cosine_betas(steps: usize) -> Vec<f64> {
    const S: f64 = 0.008;
    let f = |t: f64| {
        let x = (t / steps as f64 + S) / (1.0 + S) * std::f64::consts::FRAC_PI_2;
        x.cos().powi(2)
    };
    let f0 = f(0.0);
    let mut betas = Vec::with_capacity(steps);
    let mut prev = 1.0;
    for t in 1..=steps {
        let g = f(t as f64) / f0;
        let beta = (1.0 - g / prev).clamp(1e-8, 0.999);
        betas.push(beta);
        prev *= 1.0 - beta;
    }
    betas
}
