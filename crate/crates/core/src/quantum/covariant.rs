use std::fmt::Debug;

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use rayon::prelude::*;

use super::QuantumParams;
use crate::error::{Error, Result};
use crate::geometry::{christoffel, inverse_metric, ricci_scalar, ChartPoint, Connection, Metric};

type C4 = [Complex64; 4];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// The three groups of the covariant scale derivative, kept apart so the
/// dependence on `mu` is exact.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CovariantScaleTerms {
    /// `dV/ds` at fixed chart point.
    pub parametric: C4,
    /// `V^m D_m V`.
    pub advection: C4,
    /// `(D^m D_m + xi R) V`.
    pub laplacian: C4,
}

impl CovariantScaleTerms {
    /// `parametric + advection - i mu laplacian`.
    pub fn total(&self, mu: f64) -> C4 {
        let f = Complex64::new(0.0, -mu);
        [0, 1, 2, 3].map(|a| self.parametric[a] + self.advection[a] + f * self.laplacian[a])
    }
}

fn curvature_term(metric: &dyn Metric, x: &ChartPoint, xi: f64) -> Result<f64> {
    if xi == 0.0 {
        Ok(0.0)
    } else {
        Ok(xi * ricci_scalar(metric, x)?)
    }
}

fn connection(metric: &dyn Metric, x: &ChartPoint) -> Result<Connection> {
    christoffel(metric, x, metric.default_step())
}

/// `D_n V^a = dV^a/dx^n + G^a_{nl} V^l`, indexed `[n][a]`.
fn vector_gradient(
    field: &dyn Fn(&ChartPoint, f64) -> Result<C4>,
    metric: &dyn Metric,
    x: &ChartPoint,
    s: f64,
    h: f64,
) -> Result<[C4; 4]> {
    let v = field(x, s)?;
    let gamma = connection(metric, x)?;
    let mut t = [[ZERO; 4]; 4];
    for n in 0..4 {
        let vp = field(&x.shifted(n, h), s)?;
        let vm = field(&x.shifted(n, -h), s)?;
        for a in 0..4 {
            let mut sum = (vp[a] - vm[a]) / (2.0 * h);
            for l in 0..4 {
                sum += gamma.get(a, n, l) * v[l];
            }
            t[n][a] = sum;
        }
    }
    Ok(t)
}

/// Covariant scale derivative of a complex vector field `V(x, s)` by nested
/// central differences of step `h` plus connection terms.
pub fn covariant_scale_derivative(
    field: &dyn Fn(&ChartPoint, f64) -> Result<C4>,
    metric: &dyn Metric,
    params: &QuantumParams,
    x: &ChartPoint,
    s: f64,
    h: f64,
) -> Result<CovariantScaleTerms> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("difference step must be > 0, got {h}")));
    }
    let v = field(x, s)?;
    let (vp, vm) = (field(x, s + h)?, field(x, s - h)?);
    let parametric = [0, 1, 2, 3].map(|a| (vp[a] - vm[a]) / (2.0 * h));

    let grad = vector_gradient(field, metric, x, s, h)?;
    let mut advection = [ZERO; 4];
    for (m, row) in grad.iter().enumerate() {
        for a in 0..4 {
            advection[a] += v[m] * row[a];
        }
    }

    let gamma = connection(metric, x)?;
    let ginv = inverse_metric(metric, x)?;
    let mut shifted = Vec::with_capacity(8);
    for m in 0..4 {
        shifted.push((
            vector_gradient(field, metric, &x.shifted(m, h), s, h)?,
            vector_gradient(field, metric, &x.shifted(m, -h), s, h)?,
        ));
    }
    let mut laplacian = [ZERO; 4];
    for m in 0..4 {
        for n in 0..4 {
            let gmn = ginv[(m, n)];
            if gmn == 0.0 {
                continue;
            }
            for a in 0..4 {
                // D_m T_n^a = d_m T_n^a - G^l_{mn} T_l^a + G^a_{ml} T_n^l
                let mut d = (shifted[m].0[n][a] - shifted[m].1[n][a]) / (2.0 * h);
                for l in 0..4 {
                    d += -gamma.get(l, m, n) * grad[l][a] + gamma.get(a, m, l) * grad[n][l];
                }
                laplacian[a] += gmn * d;
            }
        }
    }
    let r = curvature_term(metric, x, params.xi)?;
    for a in 0..4 {
        laplacian[a] += r * v[a];
    }
    Ok(CovariantScaleTerms {
        parametric,
        advection,
        laplacian,
    })
}

/// Scalar wave on a spacetime chart.
pub trait ChartWave: Send + Sync + Debug {
    fn value(&self, x: &ChartPoint) -> Complex64;

    /// `d ln Psi / dx^m` if known in closed form.
    fn log_gradient(&self, _x: &ChartPoint) -> Option<C4> {
        None
    }
}

/// `amplitude * exp(i(x.Mx/2 + b.x))` with symmetric `M`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseWave {
    pub quadratic: Matrix4<f64>,
    pub linear: Vector4<f64>,
    pub amplitude: f64,
}

impl PhaseWave {
    pub fn new(quadratic: Matrix4<f64>, linear: Vector4<f64>) -> Self {
        PhaseWave {
            quadratic: 0.5 * (quadratic + quadratic.transpose()),
            linear,
            amplitude: 1.0,
        }
    }

    pub fn plane(k: Vector4<f64>) -> Self {
        Self::new(Matrix4::zeros(), k)
    }

    pub fn phase(&self, x: &ChartPoint) -> f64 {
        0.5 * x.0.dot(&(self.quadratic * x.0)) + self.linear.dot(&x.0)
    }
}

impl ChartWave for PhaseWave {
    fn value(&self, x: &ChartPoint) -> Complex64 {
        Complex64::from_polar(self.amplitude, self.phase(x))
    }

    fn log_gradient(&self, x: &ChartPoint) -> Option<C4> {
        let g = self.quadratic * x.0 + self.linear;
        Some([0, 1, 2, 3].map(|m| Complex64::new(0.0, g[m])))
    }
}

fn log_gradient(wave: &dyn ChartWave, x: &ChartPoint, h: f64, floor: f64) -> Result<C4> {
    let psi = wave.value(x);
    if !(psi.norm() >= floor) {
        return Err(Error::AmplitudeFloor {
            value: psi.norm(),
            floor,
        });
    }
    if let Some(g) = wave.log_gradient(x) {
        return Ok(g);
    }
    let mut g = [ZERO; 4];
    for (m, gm) in g.iter_mut().enumerate() {
        *gm = (wave.value(&x.shifted(m, h)) - wave.value(&x.shifted(m, -h))) / (2.0 * h * psi);
    }
    Ok(g)
}

/// `D_m D_r ln Psi`, indexed `[m][r]`.
fn log_hessian(wave: &dyn ChartWave, metric: &dyn Metric, x: &ChartPoint, h: f64, floor: f64) -> Result<[C4; 4]> {
    let a = log_gradient(wave, x, h, floor)?;
    let gamma = connection(metric, x)?;
    let mut b = [[ZERO; 4]; 4];
    for m in 0..4 {
        let ap = log_gradient(wave, &x.shifted(m, h), h, floor)?;
        let am = log_gradient(wave, &x.shifted(m, -h), h, floor)?;
        for r in 0..4 {
            let mut sum = (ap[r] - am[r]) / (2.0 * h);
            for l in 0..4 {
                sum -= gamma.get(l, m, r) * a[l];
            }
            b[m][r] = sum;
        }
    }
    Ok(b)
}

/// Klein-Gordon correspondence residual at one chart point:
/// `lambda^2 D^m lnPsi D_m D_r lnPsi + (lambda_c^2/2)(D^m D_m D_r lnPsi + xi R D_r lnPsi)`.
pub fn klein_gordon_residual_at(
    wave: &dyn ChartWave,
    metric: &dyn Metric,
    params: &QuantumParams,
    x: &ChartPoint,
    h: f64,
    floor: f64,
) -> Result<C4> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("difference step must be > 0, got {h}")));
    }
    let a = log_gradient(wave, x, h, floor)?;
    let b = log_hessian(wave, metric, x, h, floor)?;
    let gamma = connection(metric, x)?;
    let ginv = inverse_metric(metric, x)?;
    let mut shifted = Vec::with_capacity(4);
    for n in 0..4 {
        shifted.push((
            log_hessian(wave, metric, &x.shifted(n, h), h, floor)?,
            log_hessian(wave, metric, &x.shifted(n, -h), h, floor)?,
        ));
    }
    let r_term = curvature_term(metric, x, params.xi)?;
    let mut out = [ZERO; 4];
    for (rho, o) in out.iter_mut().enumerate() {
        let mut quadratic = ZERO;
        let mut box_term = ZERO;
        for m in 0..4 {
            for n in 0..4 {
                let gmn = ginv[(m, n)];
                if gmn == 0.0 {
                    continue;
                }
                quadratic += gmn * a[n] * b[m][rho];
                // D_n B_{m rho} = d_n B_{m rho} - G^l_{nm} B_{l rho} - G^l_{n rho} B_{m l}
                let mut d = (shifted[n].0[m][rho] - shifted[n].1[m][rho]) / (2.0 * h);
                for l in 0..4 {
                    d -= gamma.get(l, n, m) * b[l][rho] + gamma.get(l, n, rho) * b[m][l];
                }
                box_term += gmn * d;
            }
        }
        *o = params.lambda * params.lambda * quadratic
            + 0.5 * params.lambda_c * params.lambda_c * (box_term + r_term * a[rho]);
    }
    Ok(out)
}

/// Residual at every point; evaluated in parallel, returned in input order.
pub fn klein_gordon_residual(
    wave: &dyn ChartWave,
    metric: &dyn Metric,
    params: &QuantumParams,
    points: &[ChartPoint],
    h: f64,
    floor: f64,
) -> Result<Vec<C4>> {
    points
        .par_iter()
        .map(|x| klein_gordon_residual_at(wave, metric, params, x, h, floor))
        .collect()
}
