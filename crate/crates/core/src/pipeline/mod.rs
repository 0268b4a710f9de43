//! The data pipeline: crop, clean, align satellite/reanalysis pairs,
//! normalize to [0, 1], resample to the model grid, augment, and split
//! 80/20 grouped by typhoon. Every stage preserves the fixed
//! (u10, v10, sp, t2m) channel ordering and is a pure function of
//! (input, seed, config).

mod align;
mod augment;
mod clean;
mod norm;
mod pairs_dir;
mod resample;
mod split;

pub use align::{align, AlignConfig, AlignStats};
pub use augment::{augment, AugmentConfig};
pub use clean::{clean, CleanConfig};
pub use norm::{
    denormalize, denormalize_pair, fit_norm, normalize, normalize_pair, read_norm_stats,
    write_norm_stats, ChannelStats, NormStats,
};
pub use pairs_dir::{read_pairs_dir, write_pairs_dir};
pub use resample::{resample, resample_pair};
pub use split::{read_split_file, split, write_split_file, SplitOutcome};
