//! Reader and fixture writer for gridded reanalysis containers.
//!
//! Layout of a container file:
//!
//! ```text
//! /latitude   f64 [nlat]            ascending degrees north
//! /longitude  f64 [nlon]            ascending degrees east, 0..360
//! /time       i64 [nt]              seconds since the Unix epoch, ascending
//! /<variable> f64 [nt, nlat, nlon]  one dataset per variable, attr "units"
//! ```
//!
//! This is the NetCDF-4 container family (NetCDF-4 files are HDF5 files with
//! this dataset shape), so fixtures and real exports share one reader path.

use std::path::Path;

use chrono::{DateTime, TimeZone, Utc};
use hdf5::types::VarLenUnicode;
use ndarray::{s, Array1, Array2, Array3};

use super::{index_range, DataSource, RawRecord};
use crate::error::{Error, Result};
use crate::geo::GeoWindow;
use crate::grid::Channel;

/// Reads the requested variables restricted to the window, one record per
/// (timestamp, variable), sorted by timestamp. The file axes may be stored
/// ascending or descending; records are always returned with ascending axes.
pub fn read_era5(
    path: &Path,
    window: &GeoWindow,
    variables: &[Channel],
) -> Result<Vec<RawRecord>> {
    super::quiet_hdf5();
    let file = hdf5::File::open(path)?;
    let lat_axis = AxisView::read(&file, "latitude")?;
    let lon_axis = AxisView::read(&file, "longitude")?;
    check_extent(window, &lat_axis, &lon_axis)?;

    let (lat_sel, lat_vals) = lat_axis
        .window_selection(window.lat_min, window.lat_max)
        .ok_or_else(|| no_points_err(window))?;
    let (lon_sel, lon_vals) = lon_axis
        .window_selection(window.lon_min, window.lon_max)
        .ok_or_else(|| no_points_err(window))?;

    let time: Array1<i64> = file.dataset("time")?.read_1d()?;
    let mut records = Vec::new();
    for t_idx in 0..time.len() {
        let ts = epoch_seconds_to_utc(time[t_idx])?;
        for &var in variables {
            let ds = file
                .dataset(var.name())
                .map_err(|_| Error::MissingVariable(var.name().into()))?;
            let units = read_units_attr(&ds).unwrap_or_else(|| var.units().to_string());
            let raw: Array2<f64> =
                ds.read_slice_2d(s![t_idx, lat_sel.0..lat_sel.1, lon_sel.0..lon_sel.1])?;
            let grid = orient_grid(raw, lat_axis.descending, lon_axis.descending);
            let rec = RawRecord {
                timestamp: ts,
                source: DataSource::Era5,
                variable: var,
                grid,
                lat: lat_vals.clone(),
                lon: lon_vals.clone(),
                units,
                typhoon_id: None,
            };
            rec.validate()?;
            records.push(rec);
        }
    }
    records.sort_by_key(|r| (r.timestamp, r.variable.index()));
    Ok(records)
}

/// Writes records (all with variable != satellite) as one container file.
/// Requires consistent axes across records and a complete
/// timestamp x variable matrix.
pub(crate) fn write_era5_container(path: &Path, records: &[&RawRecord]) -> Result<()> {
    super::quiet_hdf5();
    let first = records[0];
    let mut timestamps: Vec<DateTime<Utc>> = records.iter().map(|r| r.timestamp).collect();
    timestamps.sort();
    timestamps.dedup();
    let mut variables: Vec<Channel> = records.iter().map(|r| r.variable).collect();
    variables.sort_by_key(|v| v.index());
    variables.dedup();

    let (nlat, nlon) = (first.lat.len(), first.lon.len());
    for rec in records {
        if rec.lat != first.lat || rec.lon != first.lon {
            return Err(Error::Domain(
                "fixture records must share coordinate axes".into(),
            ));
        }
    }

    let file = hdf5::File::create(path)?;
    write_f64_1d(&file, "latitude", &first.lat)?;
    write_f64_1d(&file, "longitude", &first.lon)?;
    let secs: Vec<i64> = timestamps.iter().map(|t| t.timestamp()).collect();
    file.new_dataset_builder()
        .with_data(&Array1::from_vec(secs))
        .create("time")?;

    for var in variables {
        let mut cube = Array3::<f64>::from_elem((timestamps.len(), nlat, nlon), f64::NAN);
        let mut filled = 0usize;
        let mut units = var.units().to_string();
        for rec in records.iter().filter(|r| r.variable == var) {
            let t_idx = timestamps.binary_search(&rec.timestamp).expect("ts present");
            cube.index_axis_mut(ndarray::Axis(0), t_idx).assign(&rec.grid);
            units = rec.units.clone();
            filled += 1;
        }
        if filled != timestamps.len() {
            return Err(Error::Domain(format!(
                "fixture requires every timestamp for variable {var}: have {filled} of {}",
                timestamps.len()
            )));
        }
        let ds = file.new_dataset_builder().with_data(&cube).create(var.name())?;
        write_units_attr(&ds, &units)?;
    }
    Ok(())
}

/// Coordinate axis together with its stored orientation.
struct AxisView {
    /// Values in ascending order.
    ascending: Vec<f64>,
    /// Whether the file stores the axis descending.
    descending: bool,
    raw_len: usize,
}

impl AxisView {
    fn read(file: &hdf5::File, name: &str) -> Result<AxisView> {
        let raw: Vec<f64> = file.dataset(name)?.read_1d()?.to_vec();
        if raw.len() < 2 {
            return Err(Error::Domain(format!("axis {name} has fewer than 2 points")));
        }
        let descending = raw.windows(2).all(|p| p[0] > p[1]);
        let ascending_ok = raw.windows(2).all(|p| p[0] < p[1]);
        if !descending && !ascending_ok {
            return Err(Error::Domain(format!("axis {name} is not strictly monotonic")));
        }
        let mut ascending = raw.clone();
        if descending {
            ascending.reverse();
        }
        Ok(AxisView { raw_len: raw.len(), ascending, descending })
    }

    fn extent(&self) -> (f64, f64) {
        (self.ascending[0], *self.ascending.last().unwrap())
    }

    /// Raw-index half-open range selecting values in [lo, hi], plus the
    /// selected values in ascending order.
    fn window_selection(&self, lo: f64, hi: f64) -> Option<((usize, usize), Vec<f64>)> {
        let (a0, a1) = index_range(&self.ascending, lo, hi)?;
        let vals = self.ascending[a0..a1].to_vec();
        let range = if self.descending {
            (self.raw_len - a1, self.raw_len - a0)
        } else {
            (a0, a1)
        };
        Some((range, vals))
    }
}

fn orient_grid(raw: Array2<f64>, lat_desc: bool, lon_desc: bool) -> Array2<f64> {
    let mut g = raw;
    if lat_desc {
        g.invert_axis(ndarray::Axis(0));
    }
    if lon_desc {
        g.invert_axis(ndarray::Axis(1));
    }
    g
}

fn check_extent(window: &GeoWindow, lat: &AxisView, lon: &AxisView) -> Result<()> {
    let (lat_lo, lat_hi) = lat.extent();
    let (lon_lo, lon_hi) = lon.extent();
    let covered = lat_lo <= window.lat_min
        && lat_hi >= window.lat_max
        && lon_lo <= window.lon_min
        && lon_hi >= window.lon_max;
    if covered {
        Ok(())
    } else {
        Err(Error::WindowOutsideExtent {
            requested: window.to_string(),
            available: format!("[{lat_lo:.4}, {lat_hi:.4}]N x [{lon_lo:.4}, {lon_hi:.4}]E"),
        })
    }
}

fn no_points_err(window: &GeoWindow) -> Error {
    Error::Domain(format!("window {window} contains no grid points"))
}

pub(crate) fn epoch_seconds_to_utc(secs: i64) -> Result<DateTime<Utc>> {
    Utc.timestamp_opt(secs, 0)
        .single()
        .ok_or_else(|| Error::Domain(format!("bad epoch timestamp {secs}")))
}

pub(crate) fn write_f64_1d(parent: &hdf5::Group, name: &str, vals: &[f64]) -> Result<()> {
    parent
        .new_dataset_builder()
        .with_data(&Array1::from_vec(vals.to_vec()))
        .create(name)?;
    Ok(())
}

pub(crate) fn write_units_attr(ds: &hdf5::Dataset, units: &str) -> Result<()> {
    let v: VarLenUnicode = units
        .parse()
        .map_err(|_| Error::Domain(format!("units string {units:?} is not valid unicode")))?;
    ds.new_attr::<VarLenUnicode>().create("units")?.write_scalar(&v)?;
    Ok(())
}

pub(crate) fn read_units_attr(ds: &hdf5::Dataset) -> Option<String> {
    ds.attr("units").ok()?.read_scalar::<VarLenUnicode>().ok().map(|v| v.to_string())
}
