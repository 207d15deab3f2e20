use serde::{Deserialize, Serialize};

use crate::distance::{quantile_in_place, DistanceSets};
use crate::error::{Result, StatError};

/// Significance level of the exceedance test.
pub const ALPHA: f64 = 0.05;
/// Quantile of the within-group distances that sets the tolerance.
pub const TOLERANCE_QUANTILE: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub metric: String,
    pub n_m: usize,
    pub n_k: usize,
    pub q95_within_m: f64,
    pub q95_within_k: f64,
    /// Tolerance: the larger of the two within-group 95th percentiles.
    pub eps_max: f64,
    /// Fraction of cross distances strictly above `eps_max`.
    pub p_hat_max: f64,
    /// The groups are practically similar (`p_hat_max < ALPHA`).
    pub reject_h0: bool,
}

/// Threshold and exceedance fraction, reusing the set buffers.
pub(crate) fn eps_and_p_hat(ds: &mut DistanceSets) -> Result<(f64, f64, f64, f64)> {
    if ds.within_m.is_empty() || ds.within_k.is_empty() {
        return Err(StatError::Undefined(
            "each group needs at least two runs for within-group distances".into(),
        ));
    }
    if ds.cross.is_empty() {
        return Err(StatError::Undefined("no cross-group distances".into()));
    }
    let q_m = quantile_in_place(&mut ds.within_m, TOLERANCE_QUANTILE)?;
    let q_k = quantile_in_place(&mut ds.within_k, TOLERANCE_QUANTILE)?;
    let eps = q_m.max(q_k);
    Ok((q_m, q_k, eps, exceedance_fraction(&ds.cross, eps)))
}

/// `(1/|cross|) * #{d in cross : d > eps}`.
pub fn exceedance_fraction(cross: &[f64], eps: f64) -> f64 {
    let over = cross.iter().filter(|&&d| d > eps).count();
    over as f64 / cross.len() as f64
}

/// The distance-based equivalence test: H0 is `p_max >= ALPHA`.
pub fn exceedance_test(
    ds: &DistanceSets,
    metric: &str,
    n_m: usize,
    n_k: usize,
) -> Result<TestResult> {
    let mut work = ds.clone();
    let (q_m, q_k, eps, p_hat) = eps_and_p_hat(&mut work)?;
    Ok(TestResult {
        metric: metric.to_string(),
        n_m,
        n_k,
        q95_within_m: q_m,
        q95_within_k: q_k,
        eps_max: eps,
        p_hat_max: p_hat,
        reject_h0: p_hat < ALPHA,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sets(within_m: &[f64], within_k: &[f64], cross: &[f64]) -> DistanceSets {
        DistanceSets {
            within_m: within_m.to_vec(),
            within_k: within_k.to_vec(),
            cross: cross.to_vec(),
        }
    }

    #[test]
    fn all_cross_below_threshold() {
        let r = exceedance_test(&sets(&[1.0, 2.0], &[0.5], &[0.1, 1.9, 2.0]), "x", 2, 2).unwrap();
        assert!((r.eps_max - 1.95).abs() < 1e-12);
        assert!((r.p_hat_max - 1.0 / 3.0).abs() < 1e-12);
        let r = exceedance_test(&sets(&[1.0], &[3.0], &[0.1, 3.0, 2.0]), "x", 2, 2).unwrap();
        assert_eq!(r.eps_max, 3.0);
        assert_eq!(r.p_hat_max, 0.0);
        assert!(r.reject_h0);
    }

    #[test]
    fn boundary_does_not_reject() {
        let mut cross = vec![0.0; 100];
        for d in cross.iter_mut().take(5) {
            *d = 10.0;
        }
        let r = exceedance_test(&sets(&[1.0], &[1.0], &cross), "x", 2, 2).unwrap();
        assert_eq!(r.p_hat_max, 0.05);
        assert!(!r.reject_h0);
    }

    #[test]
    fn degenerate_groups_are_undefined() {
        let err = exceedance_test(&sets(&[], &[1.0], &[1.0]), "x", 1, 2).unwrap_err();
        assert!(err.is_undefined());
    }

    #[test]
    fn all_zero_distances() {
        let r = exceedance_test(&sets(&[0.0; 3], &[0.0; 3], &[0.0; 9]), "drops", 3, 3).unwrap();
        assert_eq!((r.eps_max, r.p_hat_max, r.reject_h0), (0.0, 0.0, true));
    }
}
