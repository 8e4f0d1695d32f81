//! Metrics, connection and curvature on a single coordinate chart.
//!
//! Riemann convention:
//! `R^a_{bcd} = d_c G^a_{bd} - d_d G^a_{bc} + G^a_{ce} G^e_{bd} - G^a_{de} G^e_{bc}`.

pub mod action;
pub mod metric;
pub mod tensors;

pub use action::{bazanski_action, bazanski_lagrangian, discrete_bazanski_action, pair_samples, ActionSample};
pub use metric::{
    inverse_metric, invert_metric, is_lorentzian, metric_components, ChartPoint, Metric, MetricSpec, Minkowski,
    Schwarzschild, WeakField, SINGULAR_DET,
};
pub use tensors::{
    christoffel, christoffel_derivative_numeric, christoffel_numeric, kretschmann, ricci_scalar, riemann,
    Connection, ConnectionDerivative, CurvatureTensor, LocalGeometry,
};
