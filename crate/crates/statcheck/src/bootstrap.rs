//! Run-level percentile bootstrap for the exceedance fraction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::DistanceMatrix;
use crate::error::{Result, StatError};
use crate::exceedance::{eps_and_p_hat, ALPHA};

pub const DEFAULT_REPLICATES: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub b: usize,
    pub seed: u64,
    /// Replicate values in generation order.
    pub replicates: Vec<f64>,
    /// 0-based order statistics used for the interval.
    pub lo_index: usize,
    pub hi_index: usize,
    pub ci: Interval,
    /// The whole interval lies below the significance level.
    pub significant: bool,
}

/// 0-based order statistics bounding the central 95% of `b` replicates:
/// `floor(0.025 b)` and `floor(0.975 b)`.
pub fn percentile_indices(b: usize) -> (usize, usize) {
    let lo = b * 25 / 1000;
    let hi = (b * 975 / 1000).min(b.saturating_sub(1));
    (lo, hi)
}

/// Deterministic generator for replicate `r`, independent of scheduling.
fn replicate_rng(seed: u64, r: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r as u64);
    rng
}

/// Resamples runs with replacement within each group, `b` times, and
/// recomputes the exceedance fraction on each resample.
pub fn bootstrap_ci(matrix: &DistanceMatrix, b: usize, seed: u64) -> Result<BootstrapResult> {
    if b < 2 {
        return Err(StatError::InvalidArgument(
            "bootstrap needs at least 2 replicates".into(),
        ));
    }
    let (n_m, n_k) = (matrix.n_m(), matrix.n_k());
    if n_m < 2 || n_k < 2 {
        return Err(StatError::Undefined(
            "each group needs at least two runs for within-group distances".into(),
        ));
    }
    let replicates: Vec<f64> = (0..b)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(seed, r);
            let idx_m: Vec<usize> = (0..n_m).map(|_| rng.gen_range(0..n_m)).collect();
            let idx_k: Vec<usize> = (0..n_k).map(|_| n_m + rng.gen_range(0..n_k)).collect();
            let mut sets = matrix.sets_for(&idx_m, &idx_k);
            eps_and_p_hat(&mut sets).map(|(_, _, _, p)| p)
        })
        .collect::<Result<_>>()?;
    let mut sorted = replicates.clone();
    sorted.sort_by(f64::total_cmp);
    let (lo_index, hi_index) = percentile_indices(b);
    let ci = Interval::new(sorted[lo_index], sorted[hi_index]);
    Ok(BootstrapResult {
        b,
        seed,
        replicates,
        lo_index,
        hi_index,
        ci,
        significant: ci.hi < ALPHA,
    })
}

/// The optimized interval lies entirely below the default one.
pub fn improvement_check(default_ci: Interval, optimized_ci: Interval) -> bool {
    optimized_ci.hi < default_ci.lo
}

/// Bootstrap CI width using the first `n` runs of each group, per `n`.
pub fn ci_width_curve(
    matrix: &DistanceMatrix,
    n_grid: &[usize],
    b: usize,
    seed: u64,
) -> Result<Vec<(usize, f64)>> {
    n_grid
        .iter()
        .map(|&n| {
            if n > matrix.n_m() || n > matrix.n_k() {
                return Err(StatError::InvalidArgument(format!(
                    "n = {n} exceeds group sizes {} and {}",
                    matrix.n_m(),
                    matrix.n_k()
                )));
            }
            if n == 0 {
                return Err(StatError::InvalidArgument("n must be >= 1".into()));
            }
            let sub = matrix.prefix(n, n)?;
            Ok((n, bootstrap_ci(&sub, b, seed)?.ci.width()))
        })
        .collect()
}
