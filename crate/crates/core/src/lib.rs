//! Path and path-deviation equations on curved and fractal space-times.
//!
//! The crate is layered bottom-up:
//!
//! * [`geometry`]: metrics, connection, curvature and the Bazanski action density.
//! * [`motion`]: geodesic, Lorentz, Papapetrou and Dixon right-hand sides plus a
//!   fixed-step fourth-order integrator.
//! * [`deviation`]: the geodesic deviation equation integrated jointly with its
//!   base geodesic, and a two-geodesic finite-difference oracle.
//! * [`fractal`]: zero-mean fluctuations of metric, connection and curvature,
//!   stochastic geodesic/deviation ensembles and their statistics.
//! * [`quantum`]: forward/backward derivatives, complex velocity, Nelson walkers
//!   and residual evaluators for the Schrodinger and Klein-Gordon forms.
//!
//! Conventions: signature (-,+,+,+), geometric units c = G = 1, and
//! `R^a_{bcd} = d_c G^a_{bd} - d_d G^a_{bc} + G^a_{ce} G^e_{bd} - G^a_{de} G^e_{bc}`.

// `!(x > 0.0)` rejects NaN as well; index loops mirror tensor notation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod deviation;
pub mod error;
pub mod fractal;
pub mod geometry;
pub mod motion;
pub mod ode;
pub mod quantum;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use geometry::{ChartPoint, Metric};
