//! Reading external dataset containers (gridded reanalysis files and
//! per-typhoon satellite frame directories) plus a synthetic stand-in
//! generator, so every downstream stage is testable offline.

mod dataset_dir;
mod digital_typhoon;
mod era5;
mod synth;

pub use dataset_dir::{read_dataset_dir, write_dataset_dir, DatasetManifest};
pub use digital_typhoon::{read_digital_typhoon, FrameFilter};
pub use era5::read_era5;
pub use synth::synth_dataset;

use std::path::Path;

use chrono::{DateTime, Utc};
use ndarray::{Array2, s};

use crate::error::{Error, Result};
use crate::geo::GeoWindow;
use crate::grid::Channel;

/// Where a record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataSource {
    Era5,
    DigitalTyphoon,
}

/// One ingested (timestamp, variable) grid with its coordinate axes, still in
/// physical units. Pre-cleaning records may contain non-finite pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub timestamp: DateTime<Utc>,
    pub source: DataSource,
    pub variable: Channel,
    pub grid: Array2<f64>,
    pub lat: Vec<f64>,
    pub lon: Vec<f64>,
    pub units: String,
    /// Identifier of the originating typhoon, for satellite frames.
    pub typhoon_id: Option<String>,
}

impl RawRecord {
    /// Schema validation shared by real and synthetic data: grid dimensions
    /// match the coordinate vectors and both axes are strictly ascending.
    pub fn validate(&self) -> Result<()> {
        let (h, w) = self.grid.dim();
        if h != self.lat.len() || w != self.lon.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("({}, {})", self.lat.len(), self.lon.len()),
                got: format!("({h}, {w})"),
            });
        }
        for axis in [&self.lat, &self.lon] {
            if axis.len() < 2 || !axis.windows(2).all(|p| p[0] < p[1]) {
                return Err(Error::Domain(format!(
                    "{} coordinate axis is not strictly ascending",
                    self.variable
                )));
            }
        }
        Ok(())
    }

    /// True if the grid contains non-finite pixels and needs the cleaning
    /// stage.
    pub fn is_dirty(&self) -> bool {
        self.grid.iter().any(|v| !v.is_finite())
    }

    /// Extent of the coordinate axes as (lat_lo, lat_hi, lon_lo, lon_hi).
    pub fn extent(&self) -> (f64, f64, f64, f64) {
        (
            *self.lat.first().unwrap_or(&f64::NAN),
            *self.lat.last().unwrap_or(&f64::NAN),
            *self.lon.first().unwrap_or(&f64::NAN),
            *self.lon.last().unwrap_or(&f64::NAN),
        )
    }

    /// Restricts the record to the window (bounds inclusive). Errors if no
    /// grid point falls inside.
    pub fn crop(&self, window: &GeoWindow) -> Result<RawRecord> {
        let (i0, i1) = index_range(&self.lat, window.lat_min, window.lat_max)
            .ok_or_else(|| outside_err(self, window))?;
        let (j0, j1) = index_range(&self.lon, window.lon_min, window.lon_max)
            .ok_or_else(|| outside_err(self, window))?;
        Ok(RawRecord {
            grid: self.grid.slice(s![i0..i1, j0..j1]).to_owned(),
            lat: self.lat[i0..i1].to_vec(),
            lon: self.lon[j0..j1].to_vec(),
            ..self.clone()
        })
    }
}

fn outside_err(rec: &RawRecord, window: &GeoWindow) -> Error {
    let (a, b, c, d) = rec.extent();
    Error::WindowOutsideExtent {
        requested: window.to_string(),
        available: format!("[{a:.4}, {b:.4}]N x [{c:.4}, {d:.4}]E"),
    }
}

/// Half-open index range of the ascending axis values lying in [lo, hi].
/// Returns None when the selection is empty.
pub(crate) fn index_range(axis: &[f64], lo: f64, hi: f64) -> Option<(usize, usize)> {
    let start = axis.partition_point(|&v| v < lo);
    let end = axis.partition_point(|&v| v <= hi);
    (start < end).then_some((start, end))
}

/// Per-read bookkeeping for tolerant ingestion: how many frames were read,
/// skipped as unreadable, or flagged dirty for the cleaning stage.
#[derive(Debug, Clone, Default)]
pub struct IngestDiagnostics {
    pub read: usize,
    pub skipped: usize,
    pub dirty: usize,
    pub notes: Vec<String>,
}

/// Compact UTC timestamp used in file names.
pub(crate) fn compact_ts(ts: &DateTime<Utc>) -> String {
    ts.format("%Y%m%dT%H%M%SZ").to_string()
}

/// Stops libhdf5 from printing its own error stack to stderr; errors are
/// surfaced through [`Error::Container`] instead.
pub(crate) fn quiet_hdf5() {
    static ONCE: std::sync::Once = std::sync::Once::new();
    ONCE.call_once(|| hdf5::silence_errors(true));
}

/// Persists records as containers readable by [`read_era5`] and
/// [`read_digital_typhoon`]: reanalysis variables go to `<dir>/era5.h5`,
/// satellite frames to `<dir>/dt/<typhoon_id>/<timestamp>.h5`. The round
/// trip is lossless.
pub fn write_fixture(records: &[RawRecord], dir: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::EmptyDataset("write_fixture requires records".into()));
    }
    for rec in records {
        rec.validate()?;
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (sat, era): (Vec<_>, Vec<_>) =
        records.iter().partition(|r| r.variable == Channel::Satellite);
    if !era.is_empty() {
        era5::write_era5_container(&dir.join("era5.h5"), &era)?;
    }
    if !sat.is_empty() {
        digital_typhoon::write_dt_container(&dir.join("dt"), &sat)?;
    }
    Ok(())
}

/// Smallest window covering every record in the slice. Convenient for
/// reading a fixture back in full.
pub fn extent_window(records: &[RawRecord]) -> Result<GeoWindow> {
    let mut lat = (f64::INFINITY, f64::NEG_INFINITY);
    let mut lon = (f64::INFINITY, f64::NEG_INFINITY);
    for r in records {
        let (a, b, c, d) = r.extent();
        lat = (lat.0.min(a), lat.1.max(b));
        lon = (lon.0.min(c), lon.1.max(d));
    }
    GeoWindow::new(lat.0, lat.1, lon.0, lon.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_range_inclusive_bounds() {
        let axis = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(index_range(&axis, 2.0, 4.0), Some((1, 4)));
        assert_eq!(index_range(&axis, 1.5, 1.9), None);
        assert_eq!(index_range(&axis, 0.0, 10.0), Some((0, 5)));
        assert_eq!(index_range(&axis, 5.0, 9.0), Some((4, 5)));
    }
}
