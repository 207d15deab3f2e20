use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Buffer allowance used to size `limit_bytes` from the link rate.
pub const LIMIT_DELAY: Duration = Duration::from_millis(250);

/// DualPI2 parameters.
///
/// `alpha` and `beta` are gains in 1/s applied to delays in seconds; the
/// integral term is additionally scaled by `tupdate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AqmConfig {
    /// PI² delay target for the classic queue.
    #[serde(with = "crate::scenario::duration_str")]
    pub target: Duration,
    /// Sojourn above which L-queue packets are CE-marked.
    #[serde(with = "crate::scenario::duration_str")]
    pub step_thresh: Duration,
    /// Probability update period.
    #[serde(with = "crate::scenario::duration_str")]
    pub tupdate: Duration,
    pub alpha: f64,
    pub beta: f64,
    pub coupling_k: f64,
    /// Shared byte budget of both queues.
    pub limit_bytes: u64,
    /// WRR weight of the classic queue.
    pub classic_protection: f64,
    /// CE-mark ECT(0) classic packets instead of dropping them.
    pub ecn_classic_enabled: bool,
}

impl AqmConfig {
    /// Default parameters with the buffer sized as `rate * 250 ms`.
    pub fn for_link_rate(rate_bps: u64) -> Self {
        AqmConfig {
            target: Duration::from_millis(15),
            step_thresh: Duration::from_millis(1),
            tupdate: Duration::from_millis(16),
            alpha: 0.16,
            beta: 3.20,
            coupling_k: 2.0,
            limit_bytes: limit_for_rate(rate_bps),
            classic_protection: 0.10,
            ecn_classic_enabled: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("target", self.target),
            ("step_thresh", self.step_thresh),
            ("tupdate", self.tupdate),
        ];
        for (name, d) in positive {
            if d.is_zero() {
                return Err(Error::config(format!("aqm.{name} must be > 0")));
            }
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::config("aqm.alpha must be > 0"));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::config("aqm.beta must be > 0"));
        }
        if !(self.coupling_k.is_finite() && self.coupling_k >= 1.0) {
            return Err(Error::config("aqm.coupling_k must be >= 1"));
        }
        if self.limit_bytes == 0 {
            return Err(Error::config("aqm.limit_bytes must be > 0"));
        }
        if !(0.0..1.0).contains(&self.classic_protection) {
            return Err(Error::config("aqm.classic_protection must be in [0, 1)"));
        }
        Ok(())
    }
}

/// `rate * 250 ms` in bytes.
pub fn limit_for_rate(rate_bps: u64) -> u64 {
    let bits = rate_bps as u128 * LIMIT_DELAY.as_millis() / 1000;
    (bits / 8) as u64
}
