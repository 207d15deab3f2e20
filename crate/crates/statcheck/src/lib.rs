//! Statistical behavioral-equivalence tests between two corpora of runs.
//!
//! Each run contributes one observation per metric: a scalar (average
//! throughput) or a time series (queue occupancy, ECN marks, drops). Runs
//! are compared with the absolute difference or normalized DTW. The
//! exceedance test asks how often cross-corpus distances exceed the
//! larger of the two within-corpus 95th percentiles; a run-level bootstrap
//! puts a percentile confidence interval on that fraction.

pub mod bootstrap;
pub mod distance;
pub mod dtw;
pub mod error;
pub mod exceedance;
pub mod metric;

use dualq_core::metrics::RunRecord;

pub use bootstrap::{
    bootstrap_ci, ci_width_curve, improvement_check, percentile_indices, BootstrapResult, Interval,
    DEFAULT_REPLICATES,
};
pub use distance::{build_distances, quantile, DistanceMatrix, DistanceSets};
pub use dtw::{align, dtw, dtw_norm, dtw_norm_with, Alignment, DtwOptions};
pub use error::{Result, StatError};
pub use exceedance::{exceedance_fraction, exceedance_test, TestResult, ALPHA};
pub use metric::{distance as observation_distance, scalar_distance, Metric, Observation};

/// One metric's observation for every run of a corpus.
pub fn observations(runs: &[RunRecord], metric: Metric) -> Vec<Observation> {
    runs.iter().map(|r| metric.extract(r)).collect()
}

/// Computes the distance matrix for one metric and runs the exceedance test.
pub fn compare(
    runs_m: &[RunRecord],
    runs_k: &[RunRecord],
    metric: Metric,
    opts: DtwOptions,
) -> Result<(DistanceMatrix, TestResult)> {
    let matrix = DistanceMatrix::compute(
        &observations(runs_m, metric),
        &observations(runs_k, metric),
        opts,
    )?;
    let result = exceedance_test(&matrix.sets(), metric.name(), matrix.n_m(), matrix.n_k())?;
    Ok((matrix, result))
}

/// Equal-width histogram of `values` over `[min, max]`, as
/// `(lower edge, upper edge, count)` rows.
pub fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    if values.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo {
        (hi - lo) / bins as f64
    } else {
        1.0
    };
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (lo + i as f64 * width, lo + (i + 1) as f64 * width, c))
        .collect()
}
