use nalgebra::Matrix4;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{FractalParams, NoiseDistribution};
use crate::error::{Error, Result};
use crate::geometry::{Connection, CurvatureTensor, SINGULAR_DET};

pub(crate) fn draw<R: Rng + ?Sized>(rng: &mut R, dist: NoiseDistribution, sigma: f64) -> f64 {
    match dist {
        NoiseDistribution::Gaussian => {
            let z: f64 = rng.sample(StandardNormal);
            sigma * z
        }
        NoiseDistribution::UniformSymmetric => {
            let u: f64 = rng.random();
            sigma * 3f64.sqrt() * (2.0 * u - 1.0)
        }
    }
}

/// `g~_{mn} = g_{mn} + gamma_{mn} sqrt((lambda_c/dx^m)(lambda_c/dx^n))` with
/// `gamma` symmetric, zero-mean, standard deviation `A`.
///
/// `dx` is the resolution per axis. A non-invertible result is reported as
/// [`Error::Amplitude`] carrying the draw.
pub fn fluctuating_metric<R: Rng + ?Sized>(
    g: &Matrix4<f64>,
    params: &FractalParams,
    dx: &[f64; 4],
    rng: &mut R,
) -> Result<Matrix4<f64>> {
    params.validate()?;
    if dx.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::InvalidParameter(format!("resolution must be > 0 on every axis, got {dx:?}")));
    }
    if params.amplitude == 0.0 {
        return Ok(*g);
    }
    let mut out = *g;
    for m in 0..4 {
        for n in m..4 {
            let scale = ((params.lambda_c / dx[m]) * (params.lambda_c / dx[n])).sqrt();
            let v = draw(rng, params.distribution, params.amplitude) * scale;
            out[(m, n)] += v;
            if m != n {
                out[(n, m)] += v;
            }
        }
    }
    let det = out.determinant();
    if det.abs() < SINGULAR_DET || !det.is_finite() {
        return Err(Error::Amplitude {
            det,
            draw: Box::new(out),
        });
    }
    Ok(out)
}

/// Connection fluctuation `chi^a_{mn}`: independent draws for `m <= n`,
/// mirrored to the other lower-index order.
pub fn sample_connection_fluctuation<R: Rng + ?Sized>(
    params: &FractalParams,
    ds: f64,
    rng: &mut R,
) -> Result<Connection> {
    params.validate()?;
    if !(ds > 0.0) {
        return Err(Error::InvalidParameter(format!("ds must be > 0, got {ds}")));
    }
    let mut chi = Connection::zero();
    if params.amplitude == 0.0 {
        return Ok(chi);
    }
    let sigma = params.step_sigma(ds);
    for a in 0..4 {
        for m in 0..4 {
            for n in m..4 {
                chi.set_sym(a, m, n, draw(rng, params.distribution, sigma));
            }
        }
    }
    Ok(chi)
}

/// Curvature fluctuation `Xi^a_{bcd}`: independent draws for `c < d`,
/// antisymmetric in the last pair, zero on `c == d`.
pub fn sample_curvature_fluctuation<R: Rng + ?Sized>(
    params: &FractalParams,
    ds: f64,
    rng: &mut R,
) -> Result<CurvatureTensor> {
    params.validate()?;
    if !(ds > 0.0) {
        return Err(Error::InvalidParameter(format!("ds must be > 0, got {ds}")));
    }
    let mut xi = CurvatureTensor::zero();
    if params.amplitude == 0.0 {
        return Ok(xi);
    }
    let sigma = params.step_sigma(ds);
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in (c + 1)..4 {
                    let v = draw(rng, params.distribution, sigma);
                    xi.0[a][b][c][d] = v;
                    xi.0[a][b][d][c] = -v;
                }
            }
        }
    }
    Ok(xi)
}

/// One joint draw of all three fluctuating parts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluctuationSample {
    pub chi: Connection,
    pub xi: CurvatureTensor,
    pub gamma_metric: Matrix4<f64>,
}

/// Draws `gamma_{mn}` (via [`fluctuating_metric`] around `g`), then `chi`,
/// then `Xi`, in that order.
pub fn sample_fluctuations<R: Rng + ?Sized>(
    g: &Matrix4<f64>,
    params: &FractalParams,
    dx: &[f64; 4],
    ds: f64,
    rng: &mut R,
) -> Result<FluctuationSample> {
    let g_tilde = fluctuating_metric(g, params, dx, rng)?;
    let chi = sample_connection_fluctuation(params, ds, rng)?;
    let xi = sample_curvature_fluctuation(params, ds, rng)?;
    Ok(FluctuationSample {
        chi,
        xi,
        gamma_metric: g_tilde - g,
    })
}
