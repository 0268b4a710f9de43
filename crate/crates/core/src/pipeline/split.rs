//! Train/test split grouped by typhoon, so no typhoon's frames leak across
//! the boundary.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::grid::SamplePair;
use crate::rng::rng_from_seed;

pub const SPLIT_FILE_VERSION: u32 = 1;

/// A disjoint, exhaustive partition of pairs by typhoon.
#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub train: Vec<SamplePair>,
    pub test: Vec<SamplePair>,
    pub train_typhoons: Vec<String>,
    pub test_typhoons: Vec<String>,
    pub seed: u64,
}

impl SplitOutcome {
    /// Leakage audit: no typhoon id may appear on both sides.
    pub fn audit(&self) -> Result<()> {
        for id in &self.train_typhoons {
            if self.test_typhoons.contains(id) {
                return Err(Error::CannotSplit(format!("typhoon {id} appears in both splits")));
            }
        }
        if self.train.is_empty() || self.test.is_empty() {
            return Err(Error::CannotSplit("a split side is empty".into()));
        }
        Ok(())
    }
}

/// Partitions pairs into train/test with |train| as close to
/// round(train_fraction * n) as whole typhoons allow. Typhoon order is
/// shuffled deterministically in the seed; both sides are guaranteed
/// non-empty. Requires at least 5 pairs and at least 2 typhoons.
pub fn split(pairs: &[SamplePair], train_fraction: f64, seed: u64) -> Result<SplitOutcome> {
    if pairs.len() < 5 {
        return Err(Error::CannotSplit(format!(
            "need at least 5 pairs to split, got {}",
            pairs.len()
        )));
    }
    if !(0.0 < train_fraction && train_fraction < 1.0) {
        return Err(Error::CannotSplit(format!(
            "train_fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let mut groups: BTreeMap<&str, Vec<&SamplePair>> = BTreeMap::new();
    for p in pairs {
        groups.entry(p.typhoon_id.as_str()).or_default().push(p);
    }
    if groups.len() < 2 {
        return Err(Error::CannotSplit(format!(
            "need at least 2 typhoons for a grouped split, got {}",
            groups.len()
        )));
    }

    let target = (train_fraction * pairs.len() as f64).round() as usize;
    let mut ids: Vec<&str> = groups.keys().copied().collect();
    ids.shuffle(&mut rng_from_seed(seed));

    // Greedy walk over the shuffled typhoons: take a group into train while
    // that moves the count toward the target, keeping at least one group on
    // each side.
    let mut train_ids: Vec<&str> = Vec::new();
    let mut test_ids: Vec<&str> = Vec::new();
    let mut train_count = 0usize;
    for (k, id) in ids.iter().enumerate() {
        let size = groups[id].len();
        let remaining = ids.len() - k - 1;
        let must_take = train_ids.is_empty() && remaining == 0;
        let must_leave = test_ids.is_empty() && remaining == 0 && !train_ids.is_empty();
        let closer = (train_count + size).abs_diff(target) <= train_count.abs_diff(target);
        if must_take || (!must_leave && closer) {
            train_ids.push(id);
            train_count += size;
        } else {
            test_ids.push(id);
        }
    }

    let collect = |ids: &[&str]| -> Vec<SamplePair> {
        let mut v: Vec<SamplePair> =
            ids.iter().flat_map(|id| groups[id].iter().map(|p| (*p).clone())).collect();
        v.sort_by_key(|p| (p.timestamp, p.typhoon_id.clone()));
        v
    };
    let outcome = SplitOutcome {
        train: collect(&train_ids),
        test: collect(&test_ids),
        train_typhoons: train_ids.iter().map(|s| s.to_string()).collect(),
        test_typhoons: test_ids.iter().map(|s| s.to_string()).collect(),
        seed,
    };
    outcome.audit()?;
    Ok(outcome)
}

/// Writes `split.<seed>`, the list of typhoon ids on each side.
pub fn write_split_file(dir: &Path, outcome: &SplitOutcome) -> Result<std::path::PathBuf> {
    let path = dir.join(format!("split.{}", outcome.seed));
    let mut text = format!(
        "schema_version = {SPLIT_FILE_VERSION}\nseed = {}\n",
        outcome.seed
    );
    text.push_str(&format!("train = {:?}\n", outcome.train_typhoons));
    text.push_str(&format!("test = {:?}\n", outcome.test_typhoons));
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Reads back the typhoon id lists of a `split.<seed>` file.
pub fn read_split_file(path: &Path) -> Result<(Vec<String>, Vec<String>, u64)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut seed = 0u64;
    for line in text.lines() {
        let Some((key, value)) = line.split_once('=') else { continue };
        let (key, value) = (key.trim(), value.trim());
        match key {
            "schema_version" => {
                if value.parse::<u32>().ok() != Some(SPLIT_FILE_VERSION) {
                    return Err(Error::Config(format!("unsupported split file version {value}")));
                }
            }
            "seed" => {
                seed = value
                    .parse()
                    .map_err(|_| Error::Config(format!("bad split seed {value:?}")))?
            }
            "train" => train = parse_id_list(value),
            "test" => test = parse_id_list(value),
            _ => {}
        }
    }
    Ok((train, test, seed))
}

fn parse_id_list(value: &str) -> Vec<String> {
    value
        .trim_start_matches('[')
        .trim_end_matches(']')
        .split(',')
        .map(|s| s.trim().trim_matches('"').to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::align::{align, AlignConfig};
    use crate::grid::Channel;
    use crate::ingestion::synth_dataset;

    fn pairs(n: usize) -> Vec<SamplePair> {
        let (sat, era): (Vec<_>, Vec<_>) = synth_dataset(n, 8, 33)
            .unwrap()
            .into_iter()
            .partition(|r| r.variable == Channel::Satellite);
        align(&sat, &era, &AlignConfig::default()).unwrap().0
    }

    #[test]
    fn ten_pairs_five_typhoons_give_eight_two() {
        // the synthetic generator maps 10 samples to 5 typhoons of 2 frames
        let outcome = split(&pairs(10), 0.8, 7).unwrap();
        assert_eq!(outcome.train.len(), 8);
        assert_eq!(outcome.test.len(), 2);
    }

    #[test]
    fn partition_is_disjoint_and_exhaustive() {
        let all = pairs(20);
        let outcome = split(&all, 0.8, 3).unwrap();
        assert_eq!(outcome.train.len() + outcome.test.len(), all.len());
        let train_ts: std::collections::BTreeSet<_> =
            outcome.train.iter().map(|p| p.timestamp).collect();
        assert!(outcome.test.iter().all(|p| !train_ts.contains(&p.timestamp)));
        outcome.audit().unwrap();
    }

    #[test]
    fn deterministic_in_seed() {
        let all = pairs(20);
        let a = split(&all, 0.8, 11).unwrap();
        let b = split(&all, 0.8, 11).unwrap();
        assert_eq!(a.train_typhoons, b.train_typhoons);
        assert_eq!(a.test_typhoons, b.test_typhoons);
    }

    #[test]
    fn no_typhoon_straddles_the_boundary() {
        let outcome = split(&pairs(30), 0.8, 5).unwrap();
        let train_ids: std::collections::BTreeSet<_> =
            outcome.train.iter().map(|p| p.typhoon_id.clone()).collect();
        for p in &outcome.test {
            assert!(!train_ids.contains(&p.typhoon_id));
        }
    }

    #[test]
    fn single_typhoon_cannot_split() {
        let mut all = pairs(10);
        for p in &mut all {
            p.typhoon_id = "only".into();
        }
        assert!(matches!(split(&all, 0.8, 1), Err(Error::CannotSplit(_))));
    }

    #[test]
    fn too_few_pairs_cannot_split() {
        let all = pairs(10);
        assert!(matches!(split(&all[..4], 0.8, 1), Err(Error::CannotSplit(_))));
    }

    #[test]
    fn split_file_round_trip() {
        let outcome = split(&pairs(10), 0.8, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = write_split_file(dir.path(), &outcome).unwrap();
        assert!(path.file_name().unwrap().to_string_lossy() == "split.9");
        let (train, test, seed) = read_split_file(&path).unwrap();
        assert_eq!(train, outcome.train_typhoons);
        assert_eq!(test, outcome.test_typhoons);
        assert_eq!(seed, 9);
    }
}
