use thiserror::Error;

/// A configuration value outside its legal range.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid value {value} for `{name}`: {reason}")]
pub struct ConfigError {
    pub name: &'static str,
    pub value: f64,
    pub reason: &'static str,
}

impl ConfigError {
    pub fn new(name: &'static str, value: f64, reason: &'static str) -> Self {
        ConfigError {
            name,
            value,
            reason,
        }
    }
}

/// Failures of the histogram analysis.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("no post-selected data in the {0} histogram")]
    NoData(&'static str),
}

/// Failures of sweeps and probe optimization.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid sweep specification: {0}")]
    InvalidSpec(String),
    #[error("optimization region is infeasible: {0}")]
    Infeasible(String),
    #[error("sweep point {index} failed: {source}")]
    Point {
        index: usize,
        #[source]
        source: Box<SweepError>,
    },
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}
