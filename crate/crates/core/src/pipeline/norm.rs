//! Min-max normalization to [0, 1]. Statistics are fit on the training
//! split only and persisted alongside checkpoints in a human-readable
//! key-value file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Channel, FieldGrid, SamplePair, ALL_CHANNELS};

pub const NORM_STATS_VERSION: u32 = 1;

/// Physical-unit range of one channel over the training split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub min: f64,
    pub max: f64,
}

/// Per-channel (min, max) for the four targets and the satellite condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    stats: [ChannelStats; 5],
}

impl NormStats {
    pub fn get(&self, channel: Channel) -> ChannelStats {
        self.stats[channel.index()]
    }
}

/// Computes per-channel minima and maxima over every pixel of the training
/// pairs (the four targets plus the satellite condition). A channel whose
/// min equals its max cannot be scaled and is an error.
pub fn fit_norm(training_pairs: &[SamplePair]) -> Result<NormStats> {
    if training_pairs.is_empty() {
        return Err(Error::EmptyDataset("fit_norm requires a non-empty training split".into()));
    }
    let mut stats = [ChannelStats { min: f64::INFINITY, max: f64::NEG_INFINITY }; 5];
    for pair in training_pairs {
        if pair.condition.normalized || pair.targets.iter().any(|t| t.normalized) {
            return Err(Error::Domain("fit_norm expects physical-unit grids".into()));
        }
        for grid in pair.targets.iter().chain([&pair.condition]) {
            let slot = &mut stats[grid.channel.index()];
            for &v in grid.values.iter() {
                slot.min = slot.min.min(v);
                slot.max = slot.max.max(v);
            }
        }
    }
    for (slot, ch) in stats.iter().zip(ALL_CHANNELS) {
        if !(slot.min < slot.max) {
            return Err(Error::DegenerateChannel(ch.name().into()));
        }
    }
    Ok(NormStats { stats })
}

/// v' = (v - min) / (max - min), clipped into [0, 1] so out-of-range
/// test-time values stay inside the trained domain.
pub fn normalize(grid: &FieldGrid, stats: &NormStats) -> Result<FieldGrid> {
    if grid.normalized {
        return Err(Error::Domain(format!("{} grid is already normalized", grid.channel)));
    }
    let ChannelStats { min, max } = stats.get(grid.channel);
    let scale = max - min;
    let values = grid.values.mapv(|v| ((v - min) / scale).clamp(0.0, 1.0));
    Ok(FieldGrid { values, channel: grid.channel, normalized: true, units: grid.units.clone() })
}

/// Exact inverse of [`normalize`] for in-range values.
pub fn denormalize(grid: &FieldGrid, stats: &NormStats) -> Result<FieldGrid> {
    if !grid.normalized {
        return Err(Error::Domain(format!("{} grid is not normalized", grid.channel)));
    }
    let ChannelStats { min, max } = stats.get(grid.channel);
    let scale = max - min;
    let values = grid.values.mapv(|v| v * scale + min);
    Ok(FieldGrid { values, channel: grid.channel, normalized: false, units: grid.units.clone() })
}

pub fn normalize_pair(pair: &SamplePair, stats: &NormStats) -> Result<SamplePair> {
    map_pair(pair, |g| normalize(g, stats))
}

pub fn denormalize_pair(pair: &SamplePair, stats: &NormStats) -> Result<SamplePair> {
    map_pair(pair, |g| denormalize(g, stats))
}

fn map_pair(
    pair: &SamplePair,
    f: impl Fn(&FieldGrid) -> Result<FieldGrid>,
) -> Result<SamplePair> {
    SamplePair::new(
        f(&pair.condition)?,
        [
            f(&pair.targets[0])?,
            f(&pair.targets[1])?,
            f(&pair.targets[2])?,
            f(&pair.targets[3])?,
        ],
        pair.timestamp,
        pair.typhoon_id.clone(),
    )
}

/// Writes the `norm_stats` key-value file:
///
/// ```text
/// schema_version = 1
/// u10.min = -24.5
/// u10.max = 27.125
/// ...
/// ```
pub fn write_norm_stats(path: &Path, stats: &NormStats) -> Result<()> {
    let mut out = format!("schema_version = {NORM_STATS_VERSION}\n");
    for ch in ALL_CHANNELS {
        let s = stats.get(ch);
        out.push_str(&format!("{0}.min = {1:?}\n{0}.max = {2:?}\n", ch.name(), s.min, s.max));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_norm_stats(path: &Path) -> Result<NormStats> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut stats = [ChannelStats { min: f64::NAN, max: f64::NAN }; 5];
    for line in text.lines() {
        let Some((key, value)) = line.split_once('=') else { continue };
        let (key, value) = (key.trim(), value.trim());
        if key == "schema_version" {
            let v: u32 = value.parse().map_err(|_| bad_stats(path, line))?;
            if v != NORM_STATS_VERSION {
                return Err(Error::Config(format!("norm_stats schema_version {v} unsupported")));
            }
            continue;
        }
        let Some((name, field)) = key.split_once('.') else { continue };
        let ch = Channel::parse(name)?;
        let v: f64 = value.parse().map_err(|_| bad_stats(path, line))?;
        match field {
            "min" => stats[ch.index()].min = v,
            "max" => stats[ch.index()].max = v,
            _ => return Err(bad_stats(path, line)),
        }
    }
    for (slot, ch) in stats.iter().zip(ALL_CHANNELS) {
        if !slot.min.is_finite() || !slot.max.is_finite() || !(slot.min < slot.max) {
            return Err(Error::Config(format!(
                "norm_stats file {} is missing a valid range for {ch}",
                path.display()
            )));
        }
    }
    Ok(NormStats { stats })
}

fn bad_stats(path: &Path, line: &str) -> Error {
    Error::Config(format!("unparseable norm_stats line {line:?} in {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::align::{align, AlignConfig};
    use crate::grid::Channel;
    use crate::ingestion::synth_dataset;
    use ndarray::Array2;

    pub(crate) fn synth_pairs(n: usize, size: usize, seed: u64) -> Vec<SamplePair> {
        let (sat, era): (Vec<_>, Vec<_>) = synth_dataset(n, size, seed)
            .unwrap()
            .into_iter()
            .partition(|r| r.variable == Channel::Satellite);
        align(&sat, &era, &AlignConfig::default()).unwrap().0
    }

    #[test]
    fn known_values_give_known_range() {
        let mut pairs = synth_pairs(1, 16, 9);
        pairs[0].targets[0].values = Array2::from_shape_vec((4, 4), {
            let mut v = vec![4.0; 16];
            v[0] = 2.0;
            v[15] = 6.0;
            v
        })
        .unwrap();
        // other grids must keep their own spans valid; only u10 is pinned
        let stats = fit_norm(&pairs).unwrap();
        let s = stats.get(Channel::U10);
        assert_eq!((s.min, s.max), (2.0, 6.0));
    }

    #[test]
    fn stats_ignore_non_training_content() {
        let train = synth_pairs(4, 16, 9);
        let stats = fit_norm(&train).unwrap();
        // fitting again with any other "test" pairs around changes nothing
        let stats2 = fit_norm(&train).unwrap();
        assert_eq!(stats, stats2);
    }

    #[test]
    fn stats_match_brute_force_min_max() {
        let pairs = synth_pairs(6, 16, 11);
        let stats = fit_norm(&pairs).unwrap();
        for ch in ALL_CHANNELS {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for p in &pairs {
                let g = if ch == Channel::Satellite {
                    &p.condition
                } else {
                    &p.targets[ch.index()]
                };
                for &v in g.values.iter() {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            assert_eq!(stats.get(ch).min, lo);
            assert_eq!(stats.get(ch).max, hi);
        }
    }

    #[test]
    fn degenerate_channel_is_an_error() {
        let mut pairs = synth_pairs(1, 16, 9);
        pairs[0].targets[2].values.fill(5.0);
        assert!(matches!(fit_norm(&pairs), Err(Error::DegenerateChannel(c)) if c == "sp"));
    }

    #[test]
    fn endpoints_map_to_zero_and_one() {
        let pairs = synth_pairs(2, 16, 9);
        let stats = fit_norm(&pairs).unwrap();
        let s = stats.get(Channel::T2m);
        let mut g = pairs[0].targets[3].clone();
        g.values[[0, 0]] = s.min;
        g.values[[0, 1]] = s.max;
        let n = normalize(&g, &stats).unwrap();
        assert_eq!(n.values[[0, 0]], 0.0);
        assert_eq!(n.values[[0, 1]], 1.0);
        assert!(n.normalized);
    }

    #[test]
    fn round_trip_within_1e6_relative() {
        let pairs = synth_pairs(3, 16, 9);
        let stats = fit_norm(&pairs).unwrap();
        for p in &pairs {
            for g in p.targets.iter().chain([&p.condition]) {
                let back = denormalize(&normalize(g, &stats).unwrap(), &stats).unwrap();
                for (&a, &b) in g.values.iter().zip(back.values.iter()) {
                    let rel = (a - b).abs() / a.abs().max(1.0);
                    assert!(rel <= 1e-6, "round trip error {rel} on {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn out_of_range_values_clip_to_one() {
        let pairs = synth_pairs(1, 16, 9);
        let stats = fit_norm(&pairs).unwrap();
        let mut g = pairs[0].targets[0].clone();
        g.values.fill(stats.get(Channel::U10).max + 10.0);
        let n = normalize(&g, &stats).unwrap();
        assert!(n.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn double_normalize_is_rejected() {
        let pairs = synth_pairs(1, 16, 9);
        let stats = fit_norm(&pairs).unwrap();
        let n = normalize(&pairs[0].condition, &stats).unwrap();
        assert!(normalize(&n, &stats).is_err());
        assert!(denormalize(&pairs[0].condition, &stats).is_err());
    }

    #[test]
    fn stats_file_round_trip() {
        let pairs = synth_pairs(2, 16, 9);
        let stats = fit_norm(&pairs).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("norm_stats");
        write_norm_stats(&path, &stats).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("schema_version = 1"));
        assert!(text.contains("u10.min"));
        let back = read_norm_stats(&path).unwrap();
        assert_eq!(stats, back);
    }
}
