//! Simulated time base: integer nanoseconds since run start.

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in simulated time, in nanoseconds since the start of the run.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_nanos(ns: u64) -> Self {
        SimTime(ns)
    }

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us * 1_000)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * 1_000_000_000)
    }

    pub const fn as_nanos(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 * 1e-9
    }

    /// Advances the clock by `delta`. Overflow is reported, never wrapped.
    pub fn advance(self, delta: Duration) -> Result<SimTime> {
        u64::try_from(delta.as_nanos())
            .ok()
            .and_then(|d| self.0.checked_add(d))
            .map(SimTime)
            .ok_or_else(|| Error::TimeOverflow(format!("{self} + {delta:?}")))
    }

    /// Hot-path variant of [`SimTime::advance`] for nanosecond deltas.
    pub fn advance_nanos(self, ns: u64) -> Result<SimTime> {
        self.0
            .checked_add(ns)
            .map(SimTime)
            .ok_or_else(|| Error::TimeOverflow(format!("{self} + {ns}ns")))
    }

    /// Elapsed time since `earlier`, zero if `earlier` is in the future.
    pub fn saturating_since(self, earlier: SimTime) -> Duration {
        Duration::from_nanos(self.0.saturating_sub(earlier.0))
    }

    pub fn nanos_since(self, earlier: SimTime) -> u64 {
        self.0.saturating_sub(earlier.0)
    }
}

/// `advance_time` as a free function.
pub fn advance_time(clock: SimTime, delta: Duration) -> Result<SimTime> {
    clock.advance(delta)
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ns", self.0)
    }
}

/// Duration to whole nanoseconds, saturating at `u64::MAX`.
pub(crate) fn nanos(d: Duration) -> u64 {
    u64::try_from(d.as_nanos()).unwrap_or(u64::MAX)
}
