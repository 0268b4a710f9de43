//! Removal of errors and inconsistencies from raw records: non-finite pixel
//! repair, frame dropping, and timestamp deduplication.

use std::collections::VecDeque;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::ingestion::RawRecord;

#[derive(Debug, Clone)]
pub struct CleanConfig {
    /// Records with more than this fraction of non-finite pixels are
    /// dropped; below it, bad pixels are filled from their nearest finite
    /// neighbor.
    pub max_bad_fraction: f64,
}

impl Default for CleanConfig {
    fn default() -> Self {
        CleanConfig { max_bad_fraction: 0.05 }
    }
}

/// Cleans the records: fills or drops non-finite pixels and deduplicates
/// (source, variable, timestamp) keeping the first occurrence. Errors if
/// nothing survives.
pub fn clean(records: Vec<RawRecord>, config: &CleanConfig) -> Result<Vec<RawRecord>> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(records.len());
    for mut rec in records {
        let key = (rec.source as u8, rec.variable.index(), rec.timestamp);
        if !seen.insert(key) {
            continue;
        }
        let bad = rec.grid.iter().filter(|v| !v.is_finite()).count();
        if bad > 0 {
            let frac = bad as f64 / rec.grid.len() as f64;
            if frac > config.max_bad_fraction {
                continue;
            }
            fill_nearest(&mut rec.grid);
        }
        out.push(rec);
    }
    if out.is_empty() {
        return Err(Error::EmptyDataset("cleaning dropped every record".into()));
    }
    Ok(out)
}

/// Fills non-finite pixels with the value of the nearest finite pixel,
/// where "nearest" is 4-connected breadth-first distance (first reached
/// wins; the multi-source BFS makes the result deterministic).
fn fill_nearest(grid: &mut Array2<f64>) {
    let (h, w) = grid.dim();
    let mut queue: VecDeque<(usize, usize)> = VecDeque::new();
    let mut filled = Array2::<bool>::from_elem((h, w), false);
    for i in 0..h {
        for j in 0..w {
            if grid[[i, j]].is_finite() {
                filled[[i, j]] = true;
                queue.push_back((i, j));
            }
        }
    }
    while let Some((i, j)) = queue.pop_front() {
        let v = grid[[i, j]];
        let mut visit = |ni: usize, nj: usize, grid: &mut Array2<f64>| {
            if !filled[[ni, nj]] {
                filled[[ni, nj]] = true;
                grid[[ni, nj]] = v;
                queue.push_back((ni, nj));
            }
        };
        if i > 0 {
            visit(i - 1, j, grid);
        }
        if i + 1 < h {
            visit(i + 1, j, grid);
        }
        if j > 0 {
            visit(i, j - 1, grid);
        }
        if j + 1 < w {
            visit(i, j + 1, grid);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingestion::synth_dataset;

    fn records() -> Vec<RawRecord> {
        synth_dataset(2, 64, 5).unwrap()
    }

    #[test]
    fn single_nan_pixel_is_filled_record_kept() {
        let mut recs = records();
        recs[0].grid[[10, 10]] = f64::NAN;
        let n = recs.len();
        let cleaned = clean(recs, &CleanConfig::default()).unwrap();
        assert_eq!(cleaned.len(), n);
        assert!(cleaned[0].grid.iter().all(|v| v.is_finite()));
        // the fill came from a 4-neighbor
        let got = cleaned[0].grid[[10, 10]];
        let neighbors = [
            cleaned[0].grid[[9, 10]],
            cleaned[0].grid[[11, 10]],
            cleaned[0].grid[[10, 9]],
            cleaned[0].grid[[10, 11]],
        ];
        assert!(neighbors.contains(&got));
    }

    #[test]
    fn mostly_nan_record_is_dropped() {
        let mut recs = records();
        let n = recs.len();
        recs[0].grid.iter_mut().take(64 * 64 * 9 / 10).for_each(|v| *v = f64::NAN);
        let cleaned = clean(recs, &CleanConfig::default()).unwrap();
        assert_eq!(cleaned.len(), n - 1);
    }

    #[test]
    fn duplicate_timestamps_are_deduplicated_keeping_first() {
        let recs = records();
        let mut dup = recs.clone();
        dup[0].grid.fill(-1000.0);
        let mut all = recs.clone();
        all.extend(dup);
        let cleaned = clean(all, &CleanConfig::default()).unwrap();
        assert_eq!(cleaned.len(), recs.len());
        assert_ne!(cleaned[0].grid[[0, 0]], -1000.0);
    }

    #[test]
    fn dropping_everything_is_an_error() {
        let mut recs = records();
        for r in &mut recs {
            r.grid.fill(f64::NAN);
        }
        assert!(matches!(
            clean(recs, &CleanConfig::default()),
            Err(Error::EmptyDataset(_))
        ));
    }
}
