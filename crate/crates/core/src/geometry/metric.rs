use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix4, SymmetricEigen, Vector4};

use super::tensors::{Connection, ConnectionDerivative};
use crate::error::{Error, Result};

/// Determinant magnitude below which a metric is treated as singular.
pub const SINGULAR_DET: f64 = 1e-14;

/// Coordinates `(t, x1, x2, x3)` in geometric units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChartPoint(pub Vector4<f64>);

impl ChartPoint {
    pub fn new(t: f64, x1: f64, x2: f64, x3: f64) -> Self {
        ChartPoint(Vector4::new(t, x1, x2, x3))
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.0[0], self.0[1], self.0[2], self.0[3]]
    }

    /// Copy of the point moved by `h` along coordinate `axis`.
    pub fn shifted(&self, axis: usize, h: f64) -> Self {
        let mut p = *self;
        p.0[axis] += h;
        p
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

impl From<[f64; 4]> for ChartPoint {
    fn from(c: [f64; 4]) -> Self {
        ChartPoint(Vector4::from(c))
    }
}

/// A metric on a single coordinate chart.
///
/// Implementors provide the raw component evaluator and the domain predicate;
/// [`metric_components`] wraps both with finiteness and singularity checks.
/// Exact connection and connection-derivative evaluators are optional; when
/// present they replace the finite-difference paths.
pub trait Metric: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    /// Components `g_{mu nu}` at `x`. Only called on points that passed
    /// [`Metric::check_domain`].
    fn eval(&self, x: &ChartPoint) -> Matrix4<f64>;

    fn check_domain(&self, x: &ChartPoint) -> Result<()>;

    fn exact_christoffel(&self, _x: &ChartPoint) -> Option<Connection> {
        None
    }

    fn exact_christoffel_derivative(&self, _x: &ChartPoint) -> Option<ConnectionDerivative> {
        None
    }

    /// Characteristic coordinate length used to scale difference steps.
    fn coordinate_scale(&self) -> f64 {
        1.0
    }

    /// Step for first derivatives of the metric.
    fn default_step(&self) -> f64 {
        1e-5 * self.coordinate_scale()
    }

    /// Step for derivatives of the connection.
    fn curvature_step(&self) -> f64 {
        1e-3 * self.coordinate_scale()
    }
}

fn domain_error(metric: &str, x: &ChartPoint, reason: impl Into<String>) -> Error {
    Error::Domain {
        metric: metric.to_string(),
        point: x.coords(),
        reason: reason.into(),
    }
}

/// Checked metric evaluation: domain, finiteness and determinant.
pub fn metric_components(metric: &dyn Metric, x: &ChartPoint) -> Result<Matrix4<f64>> {
    if !x.is_finite() {
        return Err(domain_error(metric.name(), x, "non-finite coordinates"));
    }
    metric.check_domain(x)?;
    let g = metric.eval(x);
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteResult("metric components"));
    }
    let det = g.determinant();
    if det.abs() < SINGULAR_DET {
        return Err(Error::SingularMetric { det });
    }
    Ok(g)
}

/// Inverse of a symmetric metric matrix, rejecting near-singular input.
pub fn invert_metric(g: &Matrix4<f64>) -> Result<Matrix4<f64>> {
    let det = g.determinant();
    if det.abs() < SINGULAR_DET || !det.is_finite() {
        return Err(Error::SingularMetric { det });
    }
    let inv = g
        .try_inverse()
        .ok_or(Error::SingularMetric { det })?;
    // Symmetrize to remove round-off asymmetry from the LU solve.
    Ok((inv + inv.transpose()) * 0.5)
}

pub fn inverse_metric(metric: &dyn Metric, x: &ChartPoint) -> Result<Matrix4<f64>> {
    invert_metric(&metric_components(metric, x)?)
}

/// True when the symmetric matrix has exactly one negative eigenvalue.
pub fn is_lorentzian(g: &Matrix4<f64>) -> bool {
    let eig = SymmetricEigen::new(*g);
    let negative = eig.eigenvalues.iter().filter(|&&l| l < 0.0).count();
    let zero = eig.eigenvalues.iter().filter(|&&l| l == 0.0).count();
    negative == 1 && zero == 0
}

/// Flat space in Cartesian coordinates.
#[derive(Clone, Copy, Debug, Default)]
pub struct Minkowski;

impl Metric for Minkowski {
    fn name(&self) -> &str {
        "minkowski"
    }

    fn eval(&self, _x: &ChartPoint) -> Matrix4<f64> {
        Matrix4::from_diagonal(&Vector4::new(-1.0, 1.0, 1.0, 1.0))
    }

    fn check_domain(&self, _x: &ChartPoint) -> Result<()> {
        Ok(())
    }

    fn exact_christoffel(&self, _x: &ChartPoint) -> Option<Connection> {
        Some(Connection::zero())
    }

    fn exact_christoffel_derivative(&self, _x: &ChartPoint) -> Option<ConnectionDerivative> {
        Some(ConnectionDerivative::zero())
    }
}

/// Schwarzschild exterior in Schwarzschild coordinates `(t, r, theta, phi)`.
///
/// Points with `r <= 2M + horizon_margin` or with `theta` within
/// `polar_margin` of the axis are outside the chart.
#[derive(Clone, Copy, Debug)]
pub struct Schwarzschild {
    mass: f64,
    horizon_margin: f64,
    polar_margin: f64,
}

impl Schwarzschild {
    pub const DEFAULT_HORIZON_MARGIN: f64 = 1e-3;

    pub fn new(mass: f64) -> Result<Self> {
        Self::with_margin(mass, Self::DEFAULT_HORIZON_MARGIN)
    }

    pub fn with_margin(mass: f64, horizon_margin: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidParameter(format!("mass must be > 0, got {mass}")));
        }
        if !(horizon_margin >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "horizon margin must be >= 0, got {horizon_margin}"
            )));
        }
        Ok(Schwarzschild {
            mass,
            horizon_margin,
            polar_margin: 1e-6,
        })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }
}

impl Metric for Schwarzschild {
    fn name(&self) -> &str {
        "schwarzschild"
    }

    fn eval(&self, x: &ChartPoint) -> Matrix4<f64> {
        let r = x.0[1];
        let s = x.0[2].sin();
        let f = 1.0 - 2.0 * self.mass / r;
        Matrix4::from_diagonal(&Vector4::new(-f, 1.0 / f, r * r, r * r * s * s))
    }

    fn check_domain(&self, x: &ChartPoint) -> Result<()> {
        let r = x.0[1];
        let theta = x.0[2];
        if r <= 2.0 * self.mass + self.horizon_margin {
            return Err(domain_error(
                self.name(),
                x,
                format!("r = {r} inside horizon exclusion r <= {}", 2.0 * self.mass + self.horizon_margin),
            ));
        }
        if theta.sin() < self.polar_margin || theta <= 0.0 || theta >= std::f64::consts::PI {
            return Err(domain_error(self.name(), x, "theta on or near the polar axis"));
        }
        Ok(())
    }

    fn exact_christoffel(&self, x: &ChartPoint) -> Option<Connection> {
        let m = self.mass;
        let r = x.0[1];
        let (s, c) = x.0[2].sin_cos();
        let f = 1.0 - 2.0 * m / r;
        let mut g = Connection::zero();
        g.set_sym(0, 0, 1, m / (r * r * f));
        g.set_sym(1, 0, 0, m * f / (r * r));
        g.set_sym(1, 1, 1, -m / (r * r * f));
        g.set_sym(1, 2, 2, -r * f);
        g.set_sym(1, 3, 3, -r * f * s * s);
        g.set_sym(2, 1, 2, 1.0 / r);
        g.set_sym(2, 3, 3, -s * c);
        g.set_sym(3, 1, 3, 1.0 / r);
        g.set_sym(3, 2, 3, c / s);
        Some(g)
    }

    fn exact_christoffel_derivative(&self, x: &ChartPoint) -> Option<ConnectionDerivative> {
        let m = self.mass;
        let r = x.0[1];
        let (s, c) = x.0[2].sin_cos();
        let q = r * r - 2.0 * m * r;
        let dq = 2.0 * r - 2.0 * m;
        let mut d = ConnectionDerivative::zero();
        // d/dr
        d.set_sym(1, 0, 0, 1, -m * dq / (q * q));
        d.set_sym(1, 1, 0, 0, -2.0 * m / r.powi(3) + 6.0 * m * m / r.powi(4));
        d.set_sym(1, 1, 1, 1, m * dq / (q * q));
        d.set_sym(1, 1, 2, 2, -1.0);
        d.set_sym(1, 1, 3, 3, -s * s);
        d.set_sym(1, 2, 1, 2, -1.0 / (r * r));
        d.set_sym(1, 3, 1, 3, -1.0 / (r * r));
        // d/dtheta
        d.set_sym(2, 1, 3, 3, -(r - 2.0 * m) * 2.0 * s * c);
        d.set_sym(2, 2, 3, 3, -(c * c - s * s));
        d.set_sym(2, 3, 2, 3, -1.0 / (s * s));
        Some(d)
    }

    fn coordinate_scale(&self) -> f64 {
        self.mass
    }
}

/// Linearized static field in Cartesian coordinates:
/// `ds^2 = -(1 + 2 phi) dt^2 + (1 - 2 phi) dx.dx` with the softened potential
/// `phi = -A / sqrt(rho^2 + 1)`.
///
/// No exact connection is registered, so this metric exercises the
/// finite-difference paths.
#[derive(Clone, Copy, Debug)]
pub struct WeakField {
    amplitude: f64,
}

impl WeakField {
    pub fn new(amplitude: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&amplitude) {
            return Err(Error::InvalidParameter(format!(
                "weak-field amplitude must lie in [0, 0.5), got {amplitude}"
            )));
        }
        Ok(WeakField { amplitude })
    }

    pub fn potential(&self, x: &ChartPoint) -> f64 {
        let rho2 = x.0[1] * x.0[1] + x.0[2] * x.0[2] + x.0[3] * x.0[3];
        -self.amplitude / (rho2 + 1.0).sqrt()
    }
}

impl Metric for WeakField {
    fn name(&self) -> &str {
        "weak-field"
    }

    fn eval(&self, x: &ChartPoint) -> Matrix4<f64> {
        let phi = self.potential(x);
        let a = 1.0 - 2.0 * phi;
        Matrix4::from_diagonal(&Vector4::new(-(1.0 + 2.0 * phi), a, a, a))
    }

    fn check_domain(&self, _x: &ChartPoint) -> Result<()> {
        Ok(())
    }
}

/// Named metrics addressable from configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MetricSpec {
    Minkowski,
    Schwarzschild { mass: f64, horizon_margin: f64 },
    WeakField { amplitude: f64 },
}

impl MetricSpec {
    pub const NAMES: [&'static str; 3] = ["minkowski", "schwarzschild", "weak-field"];

    /// Resolve a registry name. `mass` applies to "schwarzschild",
    /// `amplitude` to "weak-field".
    pub fn from_name(name: &str, mass: Option<f64>, amplitude: Option<f64>) -> Result<Self> {
        match name {
            "minkowski" => Ok(MetricSpec::Minkowski),
            "schwarzschild" => Ok(MetricSpec::Schwarzschild {
                mass: mass.ok_or_else(|| Error::InvalidParameter("schwarzschild requires M".into()))?,
                horizon_margin: Schwarzschild::DEFAULT_HORIZON_MARGIN,
            }),
            "weak-field" => Ok(MetricSpec::WeakField {
                amplitude: amplitude
                    .ok_or_else(|| Error::InvalidParameter("weak-field requires amplitude".into()))?,
            }),
            other => Err(Error::InvalidParameter(format!("unknown metric '{other}'"))),
        }
    }

    pub fn build(&self) -> Result<Arc<dyn Metric>> {
        Ok(match *self {
            MetricSpec::Minkowski => Arc::new(Minkowski),
            MetricSpec::Schwarzschild { mass, horizon_margin } => {
                Arc::new(Schwarzschild::with_margin(mass, horizon_margin)?)
            }
            MetricSpec::WeakField { amplitude } => Arc::new(WeakField::new(amplitude)?),
        })
    }
}
