//! Private estimators for second-moment matrices.
//!
//! Three mechanisms with different privacy models and failure behavior:
//!
//! * [`recursive`]: multi-level preconditioning under zCDP. Always returns
//!   an estimate; accuracy degrades gracefully with budget.
//! * [`baseline`]: subsample-and-aggregate under approximate DP. May abort
//!   (an ordinary outcome, not an error) when the group estimates disagree.
//! * [`eigmin`]: stability-histogram release of the minimum eigenvalue. May
//!   decline to release when no bucket is stable.
//!
//! Estimator failure values deliberately carry their privacy cost: deciding
//! to abort consumed budget too.

pub mod baseline;
pub mod eigmin;
pub mod recursive;

pub use baseline::{baseline_estimate, BaselineConfig, BaselineOutcome, GroupStats};
pub use eigmin::{
    dp_min_eigenvalue, stability_histogram, BucketGrid, EigminConfig, EigminOutcome,
    ReleasedBucket,
};
pub use recursive::{
    estimate as recursive_estimate, precondition, shrink_points, threshold_subspace,
    EstimateReport, LevelRecord, RecParams, RecTrace, RecursiveConfig,
};

use crate::noise::RngState;

/// Deterministic Fisher-Yates shuffle of `0..n` driven by the given stream.
/// Group-based estimators use this to assign points to subgroups.
pub(crate) fn shuffled_indices(n: usize, rng: &mut RngState) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        idx.swap(i, j);
    }
    idx
}
