//! Reader and fixture writer for per-typhoon satellite frame directories.
//!
//! Layout:
//!
//! ```text
//! <dir>/<typhoon_id>/<timestamp>.h5
//!   /satellite  f64 [nlat, nlon]   attrs: units, time (epoch seconds)
//!   /latitude   f64 [nlat]
//!   /longitude  f64 [nlon]
//! ```

use std::path::Path;

use hdf5::types::VarLenUnicode;
use ndarray::Array2;

use super::era5::{epoch_seconds_to_utc, read_units_attr, write_f64_1d, write_units_attr};
use super::{DataSource, IngestDiagnostics, RawRecord};
use crate::error::{Error, Result};
use crate::geo::GeoWindow;
use crate::grid::Channel;

/// Predicate deciding which frames belong to the region of interest. The
/// upstream collection does not document its own filter, so it is exposed as
/// configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrameFilter {
    /// Keep frames whose extent overlaps the window.
    #[default]
    Intersects,
    /// Keep frames whose grid center falls inside the window.
    CenterInWindow,
}

/// Walks `<dir>/<typhoon_id>/*.h5` in sorted order and returns one satellite
/// record per frame that matches the filter, cropped to the window. Frames
/// entirely outside the window are dropped; unreadable frames are skipped
/// with a note in the diagnostics. Zero usable frames is an error.
pub fn read_digital_typhoon(
    dir: &Path,
    window: &GeoWindow,
    filter: FrameFilter,
) -> Result<(Vec<RawRecord>, IngestDiagnostics)> {
    super::quiet_hdf5();
    let mut diags = IngestDiagnostics::default();
    let mut records = Vec::new();

    let mut typhoon_dirs: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    typhoon_dirs.sort();

    for ty_dir in &typhoon_dirs {
        let typhoon_id = ty_dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "unknown".into());
        let mut frames: Vec<_> = std::fs::read_dir(ty_dir)
            .map_err(|e| Error::io(ty_dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "h5"))
            .collect();
        frames.sort();
        for frame in &frames {
            match read_frame(frame, &typhoon_id) {
                Ok(rec) => {
                    if !frame_matches(&rec, window, filter) {
                        continue;
                    }
                    match rec.crop(window) {
                        Ok(cropped) => {
                            if cropped.is_dirty() {
                                diags.dirty += 1;
                            }
                            diags.read += 1;
                            records.push(cropped);
                        }
                        Err(_) => {
                            // extent overlapped but no grid point fell inside
                            continue;
                        }
                    }
                }
                Err(e) => {
                    diags.skipped += 1;
                    diags.notes.push(format!("{}: {e}", frame.display()));
                }
            }
        }
    }

    if records.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no usable satellite frames under {} for window {window}",
            dir.display()
        )));
    }
    records.sort_by_key(|r| (r.timestamp, r.typhoon_id.clone()));
    Ok((records, diags))
}

fn frame_matches(rec: &RawRecord, window: &GeoWindow, filter: FrameFilter) -> bool {
    let (lat_lo, lat_hi, lon_lo, lon_hi) = rec.extent();
    match filter {
        FrameFilter::Intersects => window.intersects(lat_lo, lat_hi, lon_lo, lon_hi),
        FrameFilter::CenterInWindow => {
            window.contains(0.5 * (lat_lo + lat_hi), 0.5 * (lon_lo + lon_hi))
        }
    }
}

fn read_frame(path: &Path, typhoon_id: &str) -> Result<RawRecord> {
    let file = hdf5::File::open(path)?;
    let ds = file.dataset("satellite")?;
    let grid: Array2<f64> = ds.read_2d()?;
    let lat: Vec<f64> = file.dataset("latitude")?.read_1d()?.to_vec();
    let lon: Vec<f64> = file.dataset("longitude")?.read_1d()?.to_vec();
    let secs: i64 = ds.attr("time")?.read_scalar()?;
    let units = read_units_attr(&ds).unwrap_or_else(|| Channel::Satellite.units().to_string());
    let rec = RawRecord {
        timestamp: epoch_seconds_to_utc(secs)?,
        source: DataSource::DigitalTyphoon,
        variable: Channel::Satellite,
        grid,
        lat,
        lon,
        units,
        typhoon_id: Some(typhoon_id.to_string()),
    };
    rec.validate()?;
    Ok(rec)
}

pub(crate) fn write_dt_container(dir: &Path, records: &[&RawRecord]) -> Result<()> {
    super::quiet_hdf5();
    for rec in records {
        let ty = rec.typhoon_id.clone().unwrap_or_else(|| "unknown".into());
        let ty_dir = dir.join(&ty);
        std::fs::create_dir_all(&ty_dir).map_err(|e| Error::io(&ty_dir, e))?;
        let path = ty_dir.join(format!("{}.h5", super::compact_ts(&rec.timestamp)));
        let file = hdf5::File::create(&path)?;
        let ds = file.new_dataset_builder().with_data(&rec.grid).create("satellite")?;
        write_units_attr(&ds, &rec.units)?;
        ds.new_attr::<i64>().create("time")?.write_scalar(&rec.timestamp.timestamp())?;
        let ty_attr: VarLenUnicode = ty
            .parse()
            .map_err(|_| Error::Domain(format!("typhoon id {ty:?} is not valid unicode")))?;
        ds.new_attr::<VarLenUnicode>().create("typhoon_id")?.write_scalar(&ty_attr)?;
        write_f64_1d(&file, "latitude", &rec.lat)?;
        write_f64_1d(&file, "longitude", &rec.lon)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};
    use ndarray::Array2;

    fn frame(lat0: f64, lon0: f64, hour: u32, id: &str) -> RawRecord {
        let n = 8;
        let lat: Vec<f64> = (0..n).map(|i| lat0 + i as f64 * 0.5).collect();
        let lon: Vec<f64> = (0..n).map(|i| lon0 + i as f64 * 0.5).collect();
        RawRecord {
            timestamp: Utc.with_ymd_and_hms(2022, 9, 9, hour, 0, 0).unwrap(),
            source: DataSource::DigitalTyphoon,
            variable: Channel::Satellite,
            grid: Array2::from_shape_fn((n, n), |(i, j)| (i + j) as f64),
            lat,
            lon,
            units: "brightness".into(),
            typhoon_id: Some(id.into()),
        }
    }

    #[test]
    fn frames_outside_window_are_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let recs = vec![
            frame(20.0, 118.0, 0, "ty0001"),
            frame(21.0, 119.0, 1, "ty0001"),
            frame(60.0, 10.0, 2, "ty0002"), // far away
        ];
        let refs: Vec<&RawRecord> = recs.iter().collect();
        write_dt_container(dir.path(), &refs).unwrap();

        let window = GeoWindow::new(19.0, 26.0, 117.0, 124.0).unwrap();
        let (read, diags) =
            read_digital_typhoon(dir.path(), &window, FrameFilter::Intersects).unwrap();
        assert_eq!(read.len(), 2);
        assert_eq!(diags.read, 2);
        assert_eq!(diags.skipped, 0);
        assert!(read.iter().all(|r| r.typhoon_id.as_deref() == Some("ty0001")));
    }

    #[test]
    fn empty_directory_is_empty_dataset_error() {
        let dir = tempfile::tempdir().unwrap();
        let res = read_digital_typhoon(dir.path(), &GeoWindow::default(), FrameFilter::Intersects);
        assert!(matches!(res, Err(Error::EmptyDataset(_))));
    }

    #[test]
    fn unreadable_frame_is_skipped_with_note() {
        let dir = tempfile::tempdir().unwrap();
        let recs = vec![frame(20.0, 118.0, 0, "ty0001")];
        let refs: Vec<&RawRecord> = recs.iter().collect();
        write_dt_container(dir.path(), &refs).unwrap();
        std::fs::write(dir.path().join("ty0001/garbage.h5"), b"not hdf5").unwrap();

        let window = GeoWindow::new(19.0, 26.0, 117.0, 124.0).unwrap();
        let (read, diags) =
            read_digital_typhoon(dir.path(), &window, FrameFilter::Intersects).unwrap();
        assert_eq!(read.len(), 1);
        assert_eq!(diags.skipped, 1);
        assert_eq!(diags.notes.len(), 1);
    }

    #[test]
    fn nan_frame_is_flagged_dirty() {
        let dir = tempfile::tempdir().unwrap();
        let mut bad = frame(20.0, 118.0, 0, "ty0001");
        bad.grid[[3, 3]] = f64::NAN;
        let recs = vec![bad];
        let refs: Vec<&RawRecord> = recs.iter().collect();
        write_dt_container(dir.path(), &refs).unwrap();

        let window = GeoWindow::new(19.0, 26.0, 117.0, 124.0).unwrap();
        let (read, diags) =
            read_digital_typhoon(dir.path(), &window, FrameFilter::Intersects).unwrap();
        assert!(read[0].is_dirty());
        assert_eq!(diags.dirty, 1);
    }

    #[test]
    fn center_filter_drops_edge_overlaps() {
        let dir = tempfile::tempdir().unwrap();
        // extent 20..23.5 lat; center at 21.75
        let recs = vec![frame(20.0, 118.0, 0, "ty0001")];
        let refs: Vec<&RawRecord> = recs.iter().collect();
        write_dt_container(dir.path(), &refs).unwrap();

        // window overlapping only the frame's northern edge: intersects but
        // center is outside
        let window = GeoWindow::new(23.0, 30.0, 117.0, 124.0).unwrap();
        assert!(read_digital_typhoon(dir.path(), &window, FrameFilter::Intersects).is_ok());
        let res = read_digital_typhoon(dir.path(), &window, FrameFilter::CenterInWindow);
        assert!(matches!(res, Err(Error::EmptyDataset(_))));
    }
}
