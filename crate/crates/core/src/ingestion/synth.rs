//! Synthetic typhoon-like samples: a rotating-vortex satellite channel plus
//! four analytically consistent target fields, used as a desk-scale
//! substitute for the real archives.

use chrono::{DateTime, TimeZone, Utc};
use ndarray::Array2;
use rand::Rng;

use super::{DataSource, RawRecord};
use crate::error::{Error, Result};
use crate::geo::GeoWindow;
use crate::grid::Channel;
use crate::rng::{derive_seed, rng_from_seed};

/// Parameters of one synthetic frame's vortex, in window-degree coordinates.
#[derive(Debug, Clone)]
pub(crate) struct VortexParams {
    /// Vortex center (lat, lon).
    pub center: (f64, f64),
    /// Rankine core radius in degrees.
    pub radius: f64,
    /// Peak tangential wind speed, m/s.
    pub v_max: f64,
    /// Central pressure deficit, Pa.
    pub delta_p: f64,
    /// Environmental surface pressure, Pa.
    pub p_env: f64,
    /// Spiral rotation phase, radians.
    pub phase: f64,
    /// Azimuthal wind asymmetry direction, radians.
    pub asym_dir: f64,
}

/// Rankine tangential wind speed at radius r: rigid rotation inside the
/// core (zero at the axis), 1/r decay outside.
pub(crate) fn tangential_speed(p: &VortexParams, r: f64) -> f64 {
    if r <= p.radius {
        p.v_max * r / p.radius
    } else {
        p.v_max * p.radius / r
    }
}

/// Surface pressure at radius r: a smooth low centered on the vortex.
pub(crate) fn pressure_at(p: &VortexParams, r: f64) -> f64 {
    let s = r / (0.9 * p.radius);
    p.p_env - p.delta_p * (-s * s).exp()
}

fn temperature_at(p: &VortexParams, lat: f64, lon: f64, r: f64, window: &GeoWindow) -> f64 {
    let s = r / (0.8 * p.radius);
    302.0 - 0.45 * (lat - window.lat_min) - 0.08 * (lon - window.lon_min)
        + 1.5 * (-s * s).exp()
        + 0.3 * ((lat * 1.7).sin() * (lon * 1.3).cos())
}

fn brightness_at(p: &VortexParams, r: f64, theta: f64) -> f64 {
    let rn = r / (1.6 * p.radius);
    let arms = 0.55 + 0.45 * (2.0 * theta - 3.0 * r / p.radius - p.phase).cos();
    let core = (-((r / (0.25 * p.radius)).powi(2))).exp();
    (100.0 * (0.75 * (-rn * rn).exp() * arms + 0.25 * core)).max(0.0)
}

/// Per-frame vortex parameters, deterministic in (seed, sample index).
/// Frames are grouped into synthetic typhoons following a slow drift track.
pub(crate) fn frame_params(seed: u64, index: usize, n_samples: usize) -> (VortexParams, String) {
    let window = GeoWindow::default();
    let frames_per = (n_samples / 5).clamp(2, 48);
    let typhoon = index / frames_per;
    let k = (index % frames_per) as f64;
    let mut rng = rng_from_seed(derive_seed(seed, "synth-typhoon", typhoon as u64));

    let lat_span = window.lat_max - window.lat_min;
    let lon_span = window.lon_max - window.lon_min;
    let lat0 = window.lat_min + lat_span * rng.random_range(0.3..0.7);
    let lon0 = window.lon_min + lon_span * rng.random_range(0.3..0.7);
    let drift_lat: f64 = rng.random_range(-0.05..0.05);
    let drift_lon: f64 = rng.random_range(-0.05..0.05);
    let params = VortexParams {
        center: (
            (lat0 + k * drift_lat).clamp(window.lat_min + 1.0, window.lat_max - 1.0),
            (lon0 + k * drift_lon).clamp(window.lon_min + 1.0, window.lon_max - 1.0),
        ),
        radius: rng.random_range(1.4..2.6),
        v_max: rng.random_range(15.0..30.0),
        delta_p: rng.random_range(2000.0..6000.0),
        p_env: 101_300.0 - rng.random_range(0.0..500.0),
        phase: rng.random_range(0.0..std::f64::consts::TAU) + 0.35 * k,
        asym_dir: rng.random_range(0.0..std::f64::consts::TAU),
    };
    (params, format!("ty{typhoon:04}"))
}

/// Generates `n_samples` hourly samples on a `grid_size` x `grid_size` grid
/// over the default window. Output is deterministic in the seed and passes
/// the same schema validation as ingested data: five records per timestamp
/// (satellite condition plus u10, v10, sp, t2m targets).
pub fn synth_dataset(n_samples: usize, grid_size: usize, seed: u64) -> Result<Vec<RawRecord>> {
    if n_samples < 1 {
        return Err(Error::Domain("synth_dataset requires n_samples >= 1".into()));
    }
    if grid_size < 8 {
        return Err(Error::Domain("synth_dataset requires grid_size >= 8".into()));
    }
    let window = GeoWindow::default();
    let lat: Vec<f64> = linspace(window.lat_min, window.lat_max, grid_size);
    let lon: Vec<f64> = linspace(window.lon_min, window.lon_max, grid_size);
    let base: DateTime<Utc> = Utc.with_ymd_and_hms(2022, 9, 1, 0, 0, 0).unwrap();

    let mut records = Vec::with_capacity(n_samples * 5);
    for i in 0..n_samples {
        let (params, typhoon_id) = frame_params(seed, i, n_samples);
        let ts = base + chrono::Duration::hours(i as i64);

        let mut sat = Array2::zeros((grid_size, grid_size));
        let mut u10 = Array2::zeros((grid_size, grid_size));
        let mut v10 = Array2::zeros((grid_size, grid_size));
        let mut sp = Array2::zeros((grid_size, grid_size));
        let mut t2m = Array2::zeros((grid_size, grid_size));
        for (ii, &la) in lat.iter().enumerate() {
            for (jj, &lo) in lon.iter().enumerate() {
                let dy = la - params.center.0;
                let dx = lo - params.center.1;
                let r = (dx * dx + dy * dy).sqrt();
                let theta = dy.atan2(dx);
                let s = tangential_speed(&params, r)
                    * (1.0 + 0.15 * (theta - params.asym_dir).cos());
                u10[[ii, jj]] = -s * theta.sin();
                v10[[ii, jj]] = s * theta.cos();
                sp[[ii, jj]] = pressure_at(&params, r);
                t2m[[ii, jj]] = temperature_at(&params, la, lo, r, &window);
                sat[[ii, jj]] = brightness_at(&params, r, theta);
            }
        }

        for (variable, grid, source) in [
            (Channel::U10, u10, DataSource::Era5),
            (Channel::V10, v10, DataSource::Era5),
            (Channel::Sp, sp, DataSource::Era5),
            (Channel::T2m, t2m, DataSource::Era5),
            (Channel::Satellite, sat, DataSource::DigitalTyphoon),
        ] {
            let rec = RawRecord {
                timestamp: ts,
                source,
                variable,
                grid,
                lat: lat.clone(),
                lon: lon.clone(),
                units: variable.units().to_string(),
                typhoon_id: (variable == Channel::Satellite).then(|| typhoon_id.clone()),
            };
            rec.validate()?;
            records.push(rec);
        }
    }
    Ok(records)
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + step * i as f64).collect()
}
