//! Non-differentiable calculus and the quantum-correspondence layer:
//! forward/backward derivatives, complex velocity, Nelson walkers, and
//! residual evaluators for the fractal geodesic, Schrodinger and
//! Klein-Gordon forms.

mod covariant;
mod path;
mod residual;
mod velocity;
mod walkers;
mod wavefunction;

pub use covariant::{
    covariant_scale_derivative, klein_gordon_residual, klein_gordon_residual_at, ChartWave, CovariantScaleTerms,
    PhaseWave,
};
pub use path::SampledPath;
pub use residual::{fractal_geodesic_residual, schrodinger_residual, write_lattice_residual, ResidualRegion};
pub use velocity::{
    combine, complex_velocity, nelson_drift, scale_derivative, velocity_from_wavefunction, ComplexVelocityField, ScaleMode,
    VectorSamples,
};
pub use walkers::{histogram, walker_step, HistogramBin, WalkerEnsemble};
pub use wavefunction::{AnalyticWave, GaussianState, PlaneWave, WaveGrid, WaveJet, Wavefunction};

use crate::error::{Error, Result};

pub use num_complex::Complex64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantumParams {
    /// Diffusion coefficient `D`.
    pub diffusion: f64,
    /// Compton-like length `lambda_c`.
    pub lambda_c: f64,
    /// Coupling length `lambda` of the velocity substitution.
    pub lambda: f64,
    /// Curvature coupling `xi`.
    pub xi: f64,
    /// Scale-derivative coefficient `mu`.
    pub mu: f64,
}

impl QuantumParams {
    pub fn new(diffusion: f64, lambda_c: f64, lambda: f64, xi: f64, mu: f64) -> Result<Self> {
        let p = QuantumParams {
            diffusion,
            lambda_c,
            lambda,
            xi,
            mu,
        };
        p.validate()?;
        Ok(p)
    }

    /// Only `D` set; the lengths default to 1 and the couplings to 0.
    pub fn with_diffusion(diffusion: f64) -> Result<Self> {
        Self::new(diffusion, 1.0, 1.0, 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.diffusion > 0.0 && self.diffusion.is_finite()) {
            return Err(Error::InvalidParameter(format!("D must be > 0, got {}", self.diffusion)));
        }
        if !(self.lambda_c > 0.0 && self.lambda_c.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda_c must be > 0, got {}", self.lambda_c)));
        }
        if !(self.lambda.is_finite() && self.xi.is_finite() && self.mu.is_finite()) {
            return Err(Error::InvalidParameter("lambda, xi and mu must be finite".into()));
        }
        Ok(())
    }
}
