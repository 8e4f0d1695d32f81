use thiserror::Error;

use nalgebra::Matrix4;

/// Errors raised by geometry evaluation, integration, sampling and the
/// wavefunction layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point {point:?} is outside the chart domain of {metric}: {reason}")]
    Domain {
        metric: String,
        point: [f64; 4],
        reason: String,
    },

    #[error("singular metric: |det g| = {det:e}")]
    SingularMetric { det: f64 },

    #[error("non-finite result in {0}")]
    NonFiniteResult(&'static str),

    #[error("sample grids differ: {0}")]
    GridMismatch(String),

    /// The fluctuated metric is not invertible. The offending draw is
    /// returned so callers can redraw or abort.
    #[error("fluctuation amplitude made the metric non-invertible (|det| = {det:e})")]
    Amplitude { det: f64, draw: Box<Matrix4<f64>> },

    #[error("|psi| = {value:e} is below the floor {floor:e}")]
    AmplitudeFloor { value: f64, floor: f64 },

    #[error("no {side} neighbour for sample {index}")]
    Boundary { side: &'static str, index: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub fn is_domain(&self) -> bool {
        matches!(self, Error::Domain { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
