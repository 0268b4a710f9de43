//! On-disk layout for an ingested dataset: `samples/<timestamp>.h5` record
//! bundles plus a `manifest.json` describing timestamps, variables, grid
//! shapes and units.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Utc};
use hdf5::types::VarLenUnicode;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::era5::{epoch_seconds_to_utc, read_units_attr, write_f64_1d, write_units_attr};
use super::{compact_ts, DataSource, RawRecord};
use crate::error::{Error, Result};
use crate::geo::GeoWindow;
use crate::grid::Channel;

pub const DATASET_MANIFEST_VERSION: u32 = 1;

/// Index of a dataset directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub window: GeoWindow,
    pub timestamps: Vec<DateTime<Utc>>,
    pub variables: Vec<String>,
    /// Grid shape per variable as [rows, cols].
    pub grid_shapes: BTreeMap<String, [usize; 2]>,
    pub units: BTreeMap<String, String>,
    pub record_count: usize,
}

/// Writes records grouped by timestamp under `dir`, plus the manifest.
pub fn write_dataset_dir(dir: &Path, records: &[RawRecord], window: &GeoWindow) -> Result<()> {
    super::quiet_hdf5();
    if records.is_empty() {
        return Err(Error::EmptyDataset("no records to write".into()));
    }
    let samples = dir.join("samples");
    std::fs::create_dir_all(&samples).map_err(|e| Error::io(&samples, e))?;

    let mut by_ts: BTreeMap<DateTime<Utc>, Vec<&RawRecord>> = BTreeMap::new();
    for rec in records {
        rec.validate()?;
        by_ts.entry(rec.timestamp).or_default().push(rec);
    }

    let mut grid_shapes = BTreeMap::new();
    let mut units = BTreeMap::new();
    let mut variables: Vec<String> = Vec::new();
    for (ts, recs) in &by_ts {
        let path = samples.join(format!("{}.h5", compact_ts(ts)));
        let file = hdf5::File::create(&path)?;
        file.new_attr::<i64>().create("time")?.write_scalar(&ts.timestamp())?;
        for rec in recs {
            let name = rec.variable.name();
            let group = file.create_group(name)?;
            let ds = group.new_dataset_builder().with_data(&rec.grid).create("values")?;
            write_units_attr(&ds, &rec.units)?;
            if let Some(ty) = &rec.typhoon_id {
                let v: VarLenUnicode = ty.parse().map_err(|_| {
                    Error::Domain(format!("typhoon id {ty:?} is not valid unicode"))
                })?;
                ds.new_attr::<VarLenUnicode>().create("typhoon_id")?.write_scalar(&v)?;
            }
            write_f64_1d(&group, "latitude", &rec.lat)?;
            write_f64_1d(&group, "longitude", &rec.lon)?;
            let (h, w) = rec.grid.dim();
            grid_shapes.insert(name.to_string(), [h, w]);
            units.insert(name.to_string(), rec.units.clone());
            if !variables.contains(&name.to_string()) {
                variables.push(name.to_string());
            }
        }
    }

    let manifest = DatasetManifest {
        schema_version: DATASET_MANIFEST_VERSION,
        window: *window,
        timestamps: by_ts.keys().copied().collect(),
        variables,
        grid_shapes,
        units,
        record_count: records.len(),
    };
    let text = serde_json::to_string_pretty(&manifest)?;
    let path = dir.join("manifest.json");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(())
}

/// Reads every record bundle listed by the manifest, sorted by timestamp and
/// channel order.
pub fn read_dataset_dir(dir: &Path) -> Result<(Vec<RawRecord>, DatasetManifest)> {
    super::quiet_hdf5();
    let manifest_path = dir.join("manifest.json");
    if !manifest_path.exists() {
        return Err(Error::MissingArtifact(manifest_path));
    }
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: DatasetManifest = serde_json::from_str(&text)?;
    if manifest.schema_version != DATASET_MANIFEST_VERSION {
        return Err(Error::Config(format!(
            "dataset manifest schema_version {} unsupported (expected {DATASET_MANIFEST_VERSION})",
            manifest.schema_version
        )));
    }

    let mut records = Vec::new();
    for ts in &manifest.timestamps {
        let path = dir.join("samples").join(format!("{}.h5", compact_ts(ts)));
        let file = hdf5::File::open(&path)?;
        let secs: i64 = file.attr("time")?.read_scalar()?;
        let ts = epoch_seconds_to_utc(secs)?;
        for name in &manifest.variables {
            let Ok(group) = file.group(name) else { continue };
            let variable = Channel::parse(name)?;
            let ds = group.dataset("values")?;
            let grid: Array2<f64> = ds.read_2d()?;
            let lat: Vec<f64> = group.dataset("latitude")?.read_1d()?.to_vec();
            let lon: Vec<f64> = group.dataset("longitude")?.read_1d()?.to_vec();
            let typhoon_id = ds
                .attr("typhoon_id")
                .ok()
                .and_then(|a| a.read_scalar::<VarLenUnicode>().ok())
                .map(|v| v.to_string());
            records.push(RawRecord {
                timestamp: ts,
                source: if variable == Channel::Satellite {
                    DataSource::DigitalTyphoon
                } else {
                    DataSource::Era5
                },
                variable,
                grid,
                lat,
                lon,
                units: read_units_attr(&ds).unwrap_or_else(|| variable.units().to_string()),
                typhoon_id,
            });
        }
    }
    records.sort_by_key(|r| (r.timestamp, r.variable.index()));
    Ok((records, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingestion::synth_dataset;

    #[test]
    fn dataset_dir_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let records = synth_dataset(4, 16, 3).unwrap();
        write_dataset_dir(dir.path(), &records, &GeoWindow::default()).unwrap();

        let (back, manifest) = read_dataset_dir(dir.path()).unwrap();
        assert_eq!(manifest.schema_version, DATASET_MANIFEST_VERSION);
        assert_eq!(manifest.timestamps.len(), 4);
        assert_eq!(manifest.variables.len(), 5);
        assert_eq!(manifest.units["sp"], "Pa");
        assert_eq!(manifest.grid_shapes["satellite"], [16, 16]);
        assert_eq!(back.len(), records.len());

        let mut sorted = records.clone();
        sorted.sort_by_key(|r| (r.timestamp, r.variable.index()));
        for (a, b) in back.iter().zip(&sorted) {
            assert_eq!(a.grid, b.grid);
            assert_eq!(a.typhoon_id, b.typhoon_id);
            assert_eq!(a.variable, b.variable);
        }
    }

    #[test]
    fn missing_manifest_is_named_error() {
        let dir = tempfile::tempdir().unwrap();
        let res = read_dataset_dir(dir.path());
        assert!(matches!(res, Err(Error::MissingArtifact(_))));
    }
}
