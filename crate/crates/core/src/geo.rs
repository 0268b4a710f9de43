//! Geographic region of interest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Latitude/longitude bounding box. Longitudes are stored in the 0..360
/// convention; the constructor accepts -180..180 input and converts at the
/// boundary. Windows that would cross the 0 degree seam after conversion are
/// rejected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoWindow {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl GeoWindow {
    pub fn new(lat_min: f64, lat_max: f64, lon_min: f64, lon_max: f64) -> Result<Self> {
        if !(lat_min < lat_max) {
            return Err(Error::Domain(format!(
                "lat_min ({lat_min}) must be < lat_max ({lat_max})"
            )));
        }
        if lat_min < -90.0 || lat_max > 90.0 {
            return Err(Error::Domain(format!(
                "latitudes must lie in [-90, 90], got [{lat_min}, {lat_max}]"
            )));
        }
        let lon_min = normalize_lon(lon_min)?;
        let lon_max = normalize_lon(lon_max)?;
        if !(lon_min < lon_max) {
            return Err(Error::Domain(format!(
                "window crosses the 0 degree longitude seam after normalization \
                 ({lon_min} .. {lon_max}); this is unsupported"
            )));
        }
        Ok(GeoWindow { lat_min, lat_max, lon_min, lon_max })
    }

    /// True if the point lies inside the window (bounds inclusive).
    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        let lon = lon.rem_euclid(360.0);
        lat >= self.lat_min && lat <= self.lat_max && lon >= self.lon_min && lon <= self.lon_max
    }

    /// True if an axis-aligned extent overlaps this window.
    pub fn intersects(&self, lat_lo: f64, lat_hi: f64, lon_lo: f64, lon_hi: f64) -> bool {
        let lon_lo = lon_lo.rem_euclid(360.0);
        let lon_hi = lon_hi.rem_euclid(360.0);
        lat_lo <= self.lat_max
            && lat_hi >= self.lat_min
            && lon_lo <= self.lon_max
            && lon_hi >= self.lon_min
    }

    /// Parse "lat0,lat1,lon0,lon1".
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<_> = s.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(Error::Domain(format!(
                "expected window as lat0,lat1,lon0,lon1 -- got {s:?}"
            )));
        }
        let mut v = [0.0f64; 4];
        for (slot, part) in v.iter_mut().zip(&parts) {
            *slot = part
                .parse()
                .map_err(|e| Error::Domain(format!("bad window component {part:?}: {e}")))?;
        }
        GeoWindow::new(v[0], v[1], v[2], v[3])
    }
}

/// The default region of interest: a 10 degree box around Taiwan.
impl Default for GeoWindow {
    fn default() -> Self {
        GeoWindow {
            lat_min: 18.9037,
            lat_max: 28.9037,
            lon_min: 116.0794,
            lon_max: 126.0794,
        }
    }
}

impl std::fmt::Display for GeoWindow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{:.4}, {:.4}]N x [{:.4}, {:.4}]E",
            self.lat_min, self.lat_max, self.lon_min, self.lon_max
        )
    }
}

fn normalize_lon(lon: f64) -> Result<f64> {
    if !lon.is_finite() {
        return Err(Error::Domain(format!("non-finite longitude {lon}")));
    }
    Ok(lon.rem_euclid(360.0))
}
