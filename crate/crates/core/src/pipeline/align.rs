//! Synchronizing satellite frames with reanalysis variables into
//! [`SamplePair`]s.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};

use crate::error::{Error, Result};
use crate::grid::{Channel, FieldGrid, SamplePair, TARGET_CHANNELS};
use crate::ingestion::RawRecord;

#[derive(Debug, Clone, Default)]
pub struct AlignConfig {
    /// Maximum |time difference| for a reanalysis record to match a
    /// satellite frame. Zero means exact hourly match.
    pub tolerance: chrono::Duration,
}

/// Counts of what alignment discarded.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AlignStats {
    pub paired: usize,
    pub satellite_unmatched: usize,
    pub era5_unused: usize,
}

/// Builds one pair per satellite timestamp that has all four target
/// variables within the tolerance. Unmatched records are discarded and
/// counted. Zero matches is an error.
pub fn align(
    satellite: &[RawRecord],
    era5: &[RawRecord],
    config: &AlignConfig,
) -> Result<(Vec<SamplePair>, AlignStats)> {
    let mut by_var: [BTreeMap<DateTime<Utc>, &RawRecord>; 4] = Default::default();
    for rec in era5 {
        if let Some(slot) = TARGET_CHANNELS.iter().position(|c| *c == rec.variable) {
            by_var[slot].insert(rec.timestamp, rec);
        }
    }

    let mut stats = AlignStats::default();
    let mut used = std::collections::HashSet::new();
    let mut pairs = Vec::new();
    for sat in satellite {
        if sat.variable != Channel::Satellite {
            continue;
        }
        let mut targets: Vec<&RawRecord> = Vec::with_capacity(4);
        for slot in &by_var {
            match nearest_within(slot, sat.timestamp, config.tolerance) {
                Some(rec) => targets.push(rec),
                None => break,
            }
        }
        if targets.len() != 4 {
            stats.satellite_unmatched += 1;
            continue;
        }
        for t in &targets {
            used.insert((t.variable.index(), t.timestamp));
        }
        let target_grids: [FieldGrid; 4] = [
            to_grid(targets[0]),
            to_grid(targets[1]),
            to_grid(targets[2]),
            to_grid(targets[3]),
        ];
        let pair = SamplePair::new(
            to_grid(sat),
            target_grids,
            sat.timestamp,
            sat.typhoon_id.clone().unwrap_or_else(|| "unknown".into()),
        )?;
        pairs.push(pair);
        stats.paired += 1;
    }

    stats.era5_unused = era5
        .iter()
        .filter(|r| TARGET_CHANNELS.contains(&r.variable))
        .filter(|r| !used.contains(&(r.variable.index(), r.timestamp)))
        .count();

    if pairs.is_empty() {
        return Err(Error::EmptyDataset(
            "alignment produced zero satellite/reanalysis pairs".into(),
        ));
    }
    Ok((pairs, stats))
}

fn nearest_within<'a>(
    slot: &BTreeMap<DateTime<Utc>, &'a RawRecord>,
    ts: DateTime<Utc>,
    tolerance: chrono::Duration,
) -> Option<&'a RawRecord> {
    let mut best: Option<(&'a RawRecord, chrono::Duration)> = None;
    let before = slot.range(..=ts).next_back();
    let after = slot.range(ts..).next();
    for cand in [before, after].into_iter().flatten() {
        let dist = (*cand.0 - ts).abs();
        if dist <= tolerance {
            // ties keep the earlier record
            let better = match &best {
                None => true,
                Some((_, d)) => dist < *d,
            };
            if better {
                best = Some((cand.1, dist));
            }
        }
    }
    best.map(|(rec, _)| rec)
}

fn to_grid(rec: &RawRecord) -> FieldGrid {
    FieldGrid {
        values: rec.grid.clone(),
        channel: rec.variable,
        normalized: false,
        units: rec.units.clone(),
    }
}
