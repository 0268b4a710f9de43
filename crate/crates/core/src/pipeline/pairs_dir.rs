//! Processed-dataset directory: `pairs/<typhoon_id>/<timestamp>.h5` holding
//! the five aligned grids of each sample, alongside the `norm_stats` and
//! `split.<seed>` files written by the experiment runner.

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grid::{Channel, FieldGrid, SamplePair, TARGET_CHANNELS};
use crate::ingestion::quiet_hdf5;

/// Writes one file per pair under `dir/pairs/<typhoon_id>/`.
pub fn write_pairs_dir(dir: &Path, pairs: &[SamplePair]) -> Result<()> {
    quiet_hdf5();
    if pairs.is_empty() {
        return Err(Error::EmptyDataset("no pairs to write".into()));
    }
    for pair in pairs {
        let ty_dir = dir.join("pairs").join(&pair.typhoon_id);
        std::fs::create_dir_all(&ty_dir).map_err(|e| Error::io(&ty_dir, e))?;
        let path = ty_dir.join(format!(
            "{}.h5",
            pair.timestamp.format("%Y%m%dT%H%M%SZ")
        ));
        let file = hdf5::File::create(&path)?;
        file.new_attr::<i64>()
            .create("time")?
            .write_scalar(&pair.timestamp.timestamp())?;
        file.new_attr::<u8>()
            .create("normalized")?
            .write_scalar(&u8::from(pair.condition.normalized))?;
        for grid in pair.targets.iter().chain([&pair.condition]) {
            file.new_dataset_builder()
                .with_data(&grid.values)
                .create(grid.channel.name())?;
        }
    }
    Ok(())
}

/// Reads every pair back, sorted by (timestamp, typhoon id).
pub fn read_pairs_dir(dir: &Path) -> Result<Vec<SamplePair>> {
    quiet_hdf5();
    let pairs_root = dir.join("pairs");
    if !pairs_root.exists() {
        return Err(Error::MissingArtifact(pairs_root));
    }
    let mut out = Vec::new();
    let mut ty_dirs: Vec<_> = std::fs::read_dir(&pairs_root)
        .map_err(|e| Error::io(&pairs_root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    ty_dirs.sort();
    for ty_dir in ty_dirs {
        let typhoon_id = ty_dir.file_name().unwrap().to_string_lossy().into_owned();
        let mut files: Vec<_> = std::fs::read_dir(&ty_dir)
            .map_err(|e| Error::io(&ty_dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "h5"))
            .collect();
        files.sort();
        for path in files {
            let file = hdf5::File::open(&path)?;
            let secs: i64 = file.attr("time")?.read_scalar()?;
            let normalized: u8 = file.attr("normalized")?.read_scalar()?;
            let normalized = normalized != 0;
            let read_grid = |ch: Channel| -> Result<FieldGrid> {
                let values: Array2<f64> = file.dataset(ch.name())?.read_2d()?;
                Ok(FieldGrid::new(values, ch, normalized))
            };
            let targets = [
                read_grid(TARGET_CHANNELS[0])?,
                read_grid(TARGET_CHANNELS[1])?,
                read_grid(TARGET_CHANNELS[2])?,
                read_grid(TARGET_CHANNELS[3])?,
            ];
            let condition = read_grid(Channel::Satellite)?;
            out.push(SamplePair::new(
                condition,
                targets,
                chrono::DateTime::from_timestamp(secs, 0)
                    .ok_or_else(|| Error::Domain(format!("bad epoch timestamp {secs}")))?,
                typhoon_id.clone(),
            )?);
        }
    }
    out.sort_by_key(|p| (p.timestamp, p.typhoon_id.clone()));
    if out.is_empty() {
        return Err(Error::EmptyDataset(format!("no pairs under {}", dir.display())));
    }
    Ok(out)
}
