//! Certified information-theoretic quantities computed from a machine.

pub mod curves;
pub mod explore;
pub mod mixed;
pub mod words;

pub use curves::{
    entropy_gap_curve, entropy_gap_sum, generic_rate_lower_bound, hmu_curve, hmu_curve_with, level_stats,
    level_stats_with,
    sync_curve, sync_probability, unifilar_entropy_rate, CurvePoint, EntropyCurve,
};
pub use explore::{ExploreOptions, LevelStats, WordExplorer, DEFAULT_WORD_CAP};
pub use mixed::{entropy_gap, mixed_state, MixedState};
pub use words::{block_entropy, word_table, WordTable};
