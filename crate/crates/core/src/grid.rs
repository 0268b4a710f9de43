//! Field grids and sample pairs, the units of data everywhere downstream of
//! ingestion.

use chrono::{DateTime, Utc};
use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical channel of a grid. The target channel order (u10, v10, sp, t2m)
/// is fixed system-wide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    U10,
    V10,
    Sp,
    T2m,
    Satellite,
}

/// The fixed order of the four predicted variables.
pub const TARGET_CHANNELS: [Channel; 4] = [Channel::U10, Channel::V10, Channel::Sp, Channel::T2m];

/// All five channels, targets first, condition last.
pub const ALL_CHANNELS: [Channel; 5] = [
    Channel::U10,
    Channel::V10,
    Channel::Sp,
    Channel::T2m,
    Channel::Satellite,
];

impl Channel {
    pub fn name(&self) -> &'static str {
        match self {
            Channel::U10 => "u10",
            Channel::V10 => "v10",
            Channel::Sp => "sp",
            Channel::T2m => "t2m",
            Channel::Satellite => "satellite",
        }
    }

    pub fn units(&self) -> &'static str {
        match self {
            Channel::U10 | Channel::V10 => "m s-1",
            Channel::Sp => "Pa",
            Channel::T2m => "K",
            Channel::Satellite => "brightness",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "u10" => Ok(Channel::U10),
            "v10" => Ok(Channel::V10),
            "sp" => Ok(Channel::Sp),
            "t2m" => Ok(Channel::T2m),
            "satellite" => Ok(Channel::Satellite),
            other => Err(Error::ChannelMismatch {
                expected: "one of u10|v10|sp|t2m|satellite".into(),
                got: other.into(),
            }),
        }
    }

    /// Stable index into per-channel tables (targets 0..4, satellite 4).
    pub fn index(&self) -> usize {
        match self {
            Channel::U10 => 0,
            Channel::V10 => 1,
            Channel::Sp => 2,
            Channel::T2m => 3,
            Channel::Satellite => 4,
        }
    }
}

impl std::fmt::Display for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A single-channel 2-D grid of values, with bookkeeping for whether it is in
/// physical units or normalized to [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub values: Array2<f64>,
    pub channel: Channel,
    pub normalized: bool,
    pub units: String,
}

impl FieldGrid {
    pub fn new(values: Array2<f64>, channel: Channel, normalized: bool) -> Self {
        FieldGrid {
            values,
            channel,
            normalized,
            units: channel.units().to_string(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }

    /// Checks the type invariants: finite values, and [0, 1] range when the
    /// grid claims to be normalized.
    pub fn validate(&self) -> Result<()> {
        for &v in self.values.iter() {
            if !v.is_finite() {
                return Err(Error::Domain(format!(
                    "non-finite value in {} grid",
                    self.channel
                )));
            }
            if self.normalized && !(0.0..=1.0).contains(&v) {
                return Err(Error::Domain(format!(
                    "normalized {} grid has value {v} outside [0, 1]",
                    self.channel
                )));
            }
        }
        Ok(())
    }
}

/// One training example: a satellite condition image and the four
/// co-registered target fields sharing its timestamp and grid.
#[derive(Debug, Clone)]
pub struct SamplePair {
    pub condition: FieldGrid,
    pub targets: [FieldGrid; 4],
    pub timestamp: DateTime<Utc>,
    pub typhoon_id: String,
}

impl SamplePair {
    pub fn new(
        condition: FieldGrid,
        targets: [FieldGrid; 4],
        timestamp: DateTime<Utc>,
        typhoon_id: String,
    ) -> Result<Self> {
        let pair = SamplePair { condition, targets, timestamp, typhoon_id };
        pair.check_consistent()?;
        Ok(pair)
    }

    fn check_consistent(&self) -> Result<()> {
        if self.condition.channel != Channel::Satellite {
            return Err(Error::ChannelMismatch {
                expected: "satellite".into(),
                got: self.condition.channel.name().into(),
            });
        }
        let dim = self.condition.shape();
        for (grid, want) in self.targets.iter().zip(TARGET_CHANNELS) {
            if grid.channel != want {
                return Err(Error::ChannelMismatch {
                    expected: want.name().into(),
                    got: grid.channel.name().into(),
                });
            }
            if grid.shape() != dim {
                return Err(Error::ShapeMismatch {
                    expected: format!("{dim:?}"),
                    got: format!("{:?}", grid.shape()),
                });
            }
        }
        Ok(())
    }

    pub fn grid_shape(&self) -> (usize, usize) {
        self.condition.shape()
    }

    /// Enforces the model-grid invariant: all five grids square with the
    /// given side length.
    pub fn require_grid_size(&self, size: usize) -> Result<()> {
        let (h, w) = self.grid_shape();
        if h != size || w != size {
            return Err(Error::ShapeMismatch {
                expected: format!("({size}, {size})"),
                got: format!("({h}, {w})"),
            });
        }
        Ok(())
    }

    /// Stacks the four target grids into a (4, H, W) array in the fixed
    /// channel order.
    pub fn target_stack(&self) -> Array3<f64> {
        let (h, w) = self.grid_shape();
        let mut out = Array3::zeros((4, h, w));
        for (c, grid) in self.targets.iter().enumerate() {
            out.index_axis_mut(ndarray::Axis(0), c).assign(&grid.values);
        }
        out
    }

    /// Rebuilds target grids from a (4, H, W) stack, preserving metadata.
    pub fn targets_from_stack(stack: &Array3<f64>, normalized: bool) -> Result<[FieldGrid; 4]> {
        let (c, _, _) = stack.dim();
        if c != 4 {
            return Err(Error::ShapeMismatch { expected: "4 channels".into(), got: format!("{c}") });
        }
        Ok(TARGET_CHANNELS.map(|ch| {
            FieldGrid::new(
                stack.index_axis(ndarray::Axis(0), ch.index()).to_owned(),
                ch,
                normalized,
            )
        }))
    }
}

/// Clips every element into [lo, hi] in place.
pub fn clip_in_place(values: &mut Array3<f64>, lo: f64, hi: f64) {
    values.mapv_inplace(|v| v.clamp(lo, hi));
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn grid(c: Channel) -> FieldGrid {
        FieldGrid::new(Array2::zeros((4, 4)), c, false)
    }

    #[test]
    fn channel_order_is_fixed() {
        let names: Vec<_> = TARGET_CHANNELS.iter().map(|c| c.name()).collect();
        assert_eq!(names, vec!["u10", "v10", "sp", "t2m"]);
    }

    #[test]
    fn pair_rejects_wrong_channel_order() {
        let bad = SamplePair::new(
            grid(Channel::Satellite),
            [grid(Channel::V10), grid(Channel::U10), grid(Channel::Sp), grid(Channel::T2m)],
            Utc::now(),
            "t1".into(),
        );
        assert!(matches!(bad, Err(Error::ChannelMismatch { .. })));
    }

    #[test]
    fn pair_rejects_shape_mismatch() {
        let mut t = [grid(Channel::U10), grid(Channel::V10), grid(Channel::Sp), grid(Channel::T2m)];
        t[2].values = Array2::zeros((3, 4));
        let bad = SamplePair::new(grid(Channel::Satellite), t, Utc::now(), "t1".into());
        assert!(matches!(bad, Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn normalized_grid_validates_range() {
        let g = FieldGrid::new(array![[0.0, 1.5]], Channel::U10, true);
        assert!(g.validate().is_err());
        let g = FieldGrid::new(array![[0.0, 1.0]], Channel::U10, true);
        assert!(g.validate().is_ok());
    }

    #[test]
    fn stack_round_trip() {
        let mut t = [grid(Channel::U10), grid(Channel::V10), grid(Channel::Sp), grid(Channel::T2m)];
        t[1].values.fill(2.5);
        let pair =
            SamplePair::new(grid(Channel::Satellite), t, Utc::now(), "t1".into()).unwrap();
        let stack = pair.target_stack();
        assert_eq!(stack.dim(), (4, 4, 4));
        assert_eq!(stack[[1, 0, 0]], 2.5);
        let back = SamplePair::targets_from_stack(&stack, false).unwrap();
        assert_eq!(back[1].values, pair.targets[1].values);
        assert_eq!(back[3].channel, Channel::T2m);
    }
}
