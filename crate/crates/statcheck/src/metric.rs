use std::fmt;
use std::str::FromStr;

use dualq_core::metrics::RunRecord;
use serde::{Deserialize, Serialize};

use crate::dtw::{check_series, dtw_norm_with, DtwOptions};
use crate::error::{Result, StatError};

/// A per-run quantity compared between corpora.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Average (cumulative) throughput, Mbps.
    Throughput,
    /// Queue occupancy series, packets.
    QueueOccupancy,
    /// Queue occupancy series, bytes.
    QueueBytes,
    /// CE marks per sampling interval.
    EcnMarks,
    /// Drops per sampling interval.
    Drops,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Throughput,
        Metric::QueueOccupancy,
        Metric::QueueBytes,
        Metric::EcnMarks,
        Metric::Drops,
    ];

    /// The four metrics reported by default.
    pub const STANDARD: [Metric; 4] = [
        Metric::Throughput,
        Metric::QueueOccupancy,
        Metric::EcnMarks,
        Metric::Drops,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Throughput => "throughput",
            Metric::QueueOccupancy => "queue_occupancy",
            Metric::QueueBytes => "queue_bytes",
            Metric::EcnMarks => "ecn_marks",
            Metric::Drops => "drops",
        }
    }

    pub fn is_series(self) -> bool {
        self != Metric::Throughput
    }

    pub fn extract(self, run: &RunRecord) -> Observation {
        let series = |f: fn(&dualq_core::metrics::TraceSample) -> u64| {
            Observation::Series(run.series.iter().map(|s| f(s) as f64).collect())
        };
        match self {
            Metric::Throughput => Observation::Scalar(run.avg_throughput_mbps),
            Metric::QueueOccupancy => series(|s| s.qocc_pkts),
            Metric::QueueBytes => series(|s| s.qocc_bytes),
            Metric::EcnMarks => series(|s| s.ecn_marks),
            Metric::Drops => series(|s| s.drops),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = StatError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .or(match s {
                "qocc" | "queue" => Some(Metric::QueueOccupancy),
                "marks" | "ecn" => Some(Metric::EcnMarks),
                "thr" => Some(Metric::Throughput),
                _ => None,
            })
            .ok_or_else(|| StatError::UnknownMetric(s.to_string()))
    }
}

/// One run's value of a metric.
#[derive(Debug, Clone, PartialEq)]
pub enum Observation {
    Scalar(f64),
    Series(Vec<f64>),
}

impl Observation {
    fn kind(&self) -> &'static str {
        match self {
            Observation::Scalar(_) => "scalar",
            Observation::Series(_) => "time series",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Observation::Scalar(v) if v.is_finite() => Ok(()),
            Observation::Scalar(_) => Err(StatError::NonFinite),
            Observation::Series(s) => check_series(s),
        }
    }
}

/// Absolute difference of two scalar measurements.
pub fn scalar_distance(x: f64, y: f64) -> f64 {
    (x - y).abs()
}

/// Normalized DTW for series, absolute difference for scalars.
pub fn distance(a: &Observation, b: &Observation, opts: DtwOptions) -> Result<f64> {
    match (a, b) {
        (Observation::Scalar(x), Observation::Scalar(y)) => Ok(scalar_distance(*x, *y)),
        (Observation::Series(x), Observation::Series(y)) => dtw_norm_with(x, y, opts),
        (a, b) => Err(StatError::MetricKind {
            metric: "observation".into(),
            expected: a.kind(),
            found: b.kind(),
        }),
    }
}
