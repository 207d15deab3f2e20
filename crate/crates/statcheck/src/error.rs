#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatError {
    #[error("series is empty")]
    EmptySeries,

    #[error("series contains a non-finite value")]
    NonFinite,

    #[error("no data")]
    EmptyData,

    #[error("quantile level {0} is outside [0, 1]")]
    BadQuantile(f64),

    #[error("group {0} is empty")]
    EmptyGroup(&'static str),

    /// The test is undefined, e.g. a group of one run has no within-group
    /// distances.
    #[error("test undefined: {0}")]
    Undefined(String),

    #[error("unknown metric {0:?}")]
    UnknownMetric(String),

    #[error("metric {metric} is a {found}, expected a {expected}")]
    MetricKind {
        metric: String,
        expected: &'static str,
        found: &'static str,
    },

    #[error("{0}")]
    InvalidArgument(String),
}

impl StatError {
    /// True when the inputs are valid but too small to define the test.
    pub fn is_undefined(&self) -> bool {
        matches!(self, StatError::Undefined(_))
    }
}

pub type Result<T, E = StatError> = std::result::Result<T, E>;
