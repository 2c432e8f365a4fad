use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty sample set")]
    EmptySamples,

    #[error("interval-probability matrix is singular (det = {0:e}); ligands are indistinguishable")]
    SingularMatrix(f64),

    #[error("concentration estimate saturated: all {0} receptors bound")]
    Saturated(u64),

    #[error("binding counts sum to {got}, expected {expected}")]
    CountMismatch { got: u64, expected: u64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("singular Fisher information: {0}")]
    SingularInformation(String),

    #[error("no-information channel: Fisher information vanishes on the whole domain")]
    NoInformation,

    #[error("symbol means are not strictly increasing")]
    UnorderedMeans,

    #[error("decision thresholds are not strictly increasing: {0:?}")]
    UnorderedThresholds([f64; 3]),

    #[error("non-finite design metric at levels {0:?}")]
    NonFiniteMetric([f64; 4]),

    #[error("invalid sweep: {0}")]
    Sweep(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg()))
    }
}
