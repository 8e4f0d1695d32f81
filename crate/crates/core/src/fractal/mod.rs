//! Zero-mean fluctuations of metric, connection and curvature, stochastic
//! geodesic and deviation paths, and ensemble statistics.
//!
//! Modeling choices: the connection fluctuation `chi` and the curvature
//! fluctuation `Xi` are drawn independently, fresh at every step (white in
//! `s`), with per-component standard deviation `A * sqrt(lambda_c / ds)`.

mod ensemble;
mod sampling;
mod statistics;

pub use ensemble::{
    deviation_ensemble, deviation_ensemble_endpoints, deviation_ensemble_range, geodesic_ensemble,
    geodesic_ensemble_endpoints, geodesic_ensemble_range, stochastic_deviation, stochastic_geodesic,
};
pub use sampling::{
    fluctuating_metric, sample_connection_fluctuation, sample_curvature_fluctuation, sample_fluctuations,
    FluctuationSample,
};
pub use statistics::{
    batch_rms_error, convergence_study, ensemble_statistics, ConvergenceFit, EnsembleResult, StreamingStatistics, Track,
};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseDistribution {
    Gaussian,
    /// Uniform on `[-sqrt(3) sigma, sqrt(3) sigma]`, same variance as the
    /// Gaussian.
    UniformSymmetric,
}

impl NoiseDistribution {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "gaussian" => Ok(NoiseDistribution::Gaussian),
            "uniform" | "uniform-symmetric" => Ok(NoiseDistribution::UniformSymmetric),
            other => Err(Error::InvalidParameter(format!("unknown distribution '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            NoiseDistribution::Gaussian => "gaussian",
            NoiseDistribution::UniformSymmetric => "uniform-symmetric",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FractalParams {
    /// Resolution length `lambda_c`.
    pub lambda_c: f64,
    /// Dimensionless amplitude `A`.
    pub amplitude: f64,
    pub seed: u64,
    pub distribution: NoiseDistribution,
}

impl FractalParams {
    pub fn new(lambda_c: f64, amplitude: f64, seed: u64, distribution: NoiseDistribution) -> Result<Self> {
        let p = FractalParams {
            lambda_c,
            amplitude,
            seed,
            distribution,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_c > 0.0 && self.lambda_c.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda_c must be > 0, got {}", self.lambda_c)));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidParameter(format!("amplitude must be >= 0, got {}", self.amplitude)));
        }
        Ok(())
    }

    /// Standard deviation of each independent `chi` or `Xi` component at
    /// step `ds`.
    pub fn step_sigma(&self, ds: f64) -> f64 {
        self.amplitude * (self.lambda_c / ds).sqrt()
    }
}
