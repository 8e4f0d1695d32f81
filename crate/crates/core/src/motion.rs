//! Geodesic and force-law right-hand sides with a fixed-step RK4 integrator.
//!
//! All force laws share the geodesic left-hand side:
//!
//! * Lorentz: `dU^a/ds = -G^a_{mn} U^m U^n + (e/m) F^a_n U^n`
//! * Papapetrou: `dU^a/ds = -G^a_{mn} U^m U^n + (1/2m) R^a_{nsr} S^{sr} U^n`
//! * Dixon: both force terms together.
//!
//! Zero charge or zero spin short-circuits to the geodesic right-hand side, so
//! the reductions are exact rather than merely close.

use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use nalgebra::{Matrix4, Vector4};

use crate::error::{Error, Result};
use crate::geometry::{christoffel, inverse_metric, metric_components, ChartPoint, LocalGeometry, Metric};
use crate::ode::{rk4_step, uniform_steps};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParticleState {
    pub s: f64,
    pub x: ChartPoint,
    pub u: Vector4<f64>,
}

impl ParticleState {
    pub fn new(s: f64, x: ChartPoint, u: Vector4<f64>) -> Self {
        ParticleState { s, x, u }
    }

    pub(crate) fn to_array(self) -> [f64; 8] {
        let mut y = [0.0; 8];
        y[..4].copy_from_slice(self.x.0.as_slice());
        y[4..].copy_from_slice(self.u.as_slice());
        y
    }

    pub(crate) fn from_array(s: f64, y: &[f64]) -> Self {
        ParticleState {
            s,
            x: ChartPoint(Vector4::new(y[0], y[1], y[2], y[3])),
            u: Vector4::new(y[4], y[5], y[6], y[7]),
        }
    }
}

/// `(dx/ds, dU/ds)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateDerivative {
    pub dx: Vector4<f64>,
    pub du: Vector4<f64>,
}

/// Antisymmetric spin tensor `S^{ab}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinTensor(Matrix4<f64>);

impl SpinTensor {
    pub fn zero() -> Self {
        SpinTensor(Matrix4::zeros())
    }

    /// Rejects matrices that are not exactly antisymmetric.
    pub fn new(components: Matrix4<f64>) -> Result<Self> {
        for a in 0..4 {
            for b in 0..4 {
                if components[(a, b)] != -components[(b, a)] || !components[(a, b)].is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "spin tensor not antisymmetric at ({a},{b})"
                    )));
                }
            }
        }
        Ok(SpinTensor(components))
    }

    /// Builds `S` from its upper-triangular entries `(a, b, value)`, `a < b`.
    pub fn from_upper(entries: &[(usize, usize, f64)]) -> Result<Self> {
        let mut m = Matrix4::zeros();
        for &(a, b, v) in entries {
            if a >= b || b > 3 {
                return Err(Error::InvalidParameter(format!("spin entry ({a},{b}) must satisfy a < b <= 3")));
            }
            m[(a, b)] = v;
            m[(b, a)] = -v;
        }
        Self::new(m)
    }

    pub fn components(&self) -> &Matrix4<f64> {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn scaled(&self, k: f64) -> Self {
        SpinTensor(self.0 * k)
    }

    /// Projects onto the subspace with `S^{ab} U_b = 0` using
    /// `P^a_b = delta^a_b - U^a U_b / (U.U)`.
    pub fn with_supplementary_condition(&self, u: &Vector4<f64>, g: &Matrix4<f64>) -> Result<Self> {
        let u_low = g * u;
        let norm = u.dot(&u_low);
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidParameter("supplementary condition needs a non-null velocity".into()));
        }
        let p = Matrix4::identity() - (u * u_low.transpose()) / norm;
        let projected = p * self.0 * p.transpose();
        // Exact antisymmetry after round-off.
        let s = (projected - projected.transpose()) * 0.5;
        Ok(SpinTensor(s))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParticleProperties {
    pub mass: f64,
    pub charge: f64,
    pub spin: SpinTensor,
}

impl ParticleProperties {
    pub fn new(mass: f64, charge: f64, spin: SpinTensor) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidParameter(format!("mass must be > 0, got {mass}")));
        }
        Ok(ParticleProperties { mass, charge, spin })
    }
}

/// Electromagnetic field `F_{mn}` as a function of position.
type FieldFn = dyn Fn(&ChartPoint) -> Matrix4<f64> + Send + Sync;

#[derive(Clone)]
pub struct EMFieldTensor {
    eval: Arc<FieldFn>,
}

impl fmt::Debug for EMFieldTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("EMFieldTensor")
    }
}

impl EMFieldTensor {
    pub fn from_fn(eval: impl Fn(&ChartPoint) -> Matrix4<f64> + Send + Sync + 'static) -> Self {
        EMFieldTensor { eval: Arc::new(eval) }
    }

    /// Uniform field in Cartesian coordinates: `F_{i0} = E_i`,
    /// `F_{ij} = eps_{ijk} B_k`.
    pub fn uniform(e: [f64; 3], b: [f64; 3]) -> Self {
        let mut f = Matrix4::zeros();
        for i in 0..3 {
            f[(i + 1, 0)] = e[i];
            f[(0, i + 1)] = -e[i];
        }
        f[(1, 2)] = b[2];
        f[(2, 1)] = -b[2];
        f[(2, 3)] = b[0];
        f[(3, 2)] = -b[0];
        f[(3, 1)] = b[1];
        f[(1, 3)] = -b[1];
        Self::from_fn(move |_| f)
    }

    /// `F_{mn}(x)`, checked for antisymmetry and finiteness.
    pub fn at(&self, x: &ChartPoint) -> Result<Matrix4<f64>> {
        let f = (self.eval)(x);
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteResult("field tensor"));
        }
        if f != -f.transpose() {
            return Err(Error::InvalidParameter("field tensor is not antisymmetric".into()));
        }
        Ok(f)
    }
}

/// `g_{mn} U^m U^n`.
pub fn velocity_norm(metric: &dyn Metric, x: &ChartPoint, u: &Vector4<f64>) -> Result<f64> {
    let g = metric_components(metric, x)?;
    Ok(u.dot(&(g * u)))
}

pub fn geodesic_rhs(metric: &dyn Metric, state: &ParticleState) -> Result<StateDerivative> {
    let gamma = christoffel(metric, &state.x, metric.default_step())?;
    let du = -gamma.contract(&state.u, &state.u);
    if du.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteResult("geodesic rhs"));
    }
    Ok(StateDerivative { dx: state.u, du })
}

/// `(e/m) F^a_n U^n` with the index raised by `g^{ab}`.
pub fn lorentz_force(
    metric: &dyn Metric,
    field: &EMFieldTensor,
    props: &ParticleProperties,
    state: &ParticleState,
) -> Result<Vector4<f64>> {
    if props.charge == 0.0 {
        return Ok(Vector4::zeros());
    }
    let g_inv = inverse_metric(metric, &state.x)?;
    let f = field.at(&state.x)?;
    let force = (g_inv * f * state.u) * (props.charge / props.mass);
    if force.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteResult("lorentz force"));
    }
    Ok(force)
}

/// `(1/2m) R^a_{nsr} S^{sr} U^n`.
pub fn papapetrou_force(
    metric: &dyn Metric,
    props: &ParticleProperties,
    state: &ParticleState,
) -> Result<Vector4<f64>> {
    if props.spin.is_zero() {
        return Ok(Vector4::zeros());
    }
    let local = LocalGeometry::at(metric, &state.x, metric.curvature_step())?;
    let force = local.riemann.contract_bivector(props.spin.components(), &state.u) / (2.0 * props.mass);
    if force.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteResult("papapetrou force"));
    }
    Ok(force)
}

/// Sum of the Lorentz and Papapetrou force terms.
pub fn dixon_force(
    metric: &dyn Metric,
    field: &EMFieldTensor,
    props: &ParticleProperties,
    state: &ParticleState,
) -> Result<Vector4<f64>> {
    Ok(lorentz_force(metric, field, props, state)? + papapetrou_force(metric, props, state)?)
}

pub fn lorentz_rhs(
    metric: &dyn Metric,
    field: &EMFieldTensor,
    props: &ParticleProperties,
    state: &ParticleState,
) -> Result<StateDerivative> {
    let mut d = geodesic_rhs(metric, state)?;
    if props.charge != 0.0 {
        d.du += lorentz_force(metric, field, props, state)?;
    }
    Ok(d)
}

pub fn papapetrou_rhs(metric: &dyn Metric, props: &ParticleProperties, state: &ParticleState) -> Result<StateDerivative> {
    let mut d = geodesic_rhs(metric, state)?;
    if !props.spin.is_zero() {
        d.du += papapetrou_force(metric, props, state)?;
    }
    Ok(d)
}

pub fn dixon_rhs(
    metric: &dyn Metric,
    field: &EMFieldTensor,
    props: &ParticleProperties,
    state: &ParticleState,
) -> Result<StateDerivative> {
    let mut d = geodesic_rhs(metric, state)?;
    if props.charge != 0.0 || !props.spin.is_zero() {
        d.du += dixon_force(metric, field, props, state)?;
    }
    Ok(d)
}

/// Selects one of the right-hand sides above.
#[derive(Clone, Debug)]
pub enum ForceLaw {
    Geodesic,
    Lorentz { field: EMFieldTensor, props: ParticleProperties },
    Papapetrou { props: ParticleProperties },
    Dixon { field: EMFieldTensor, props: ParticleProperties },
}

impl ForceLaw {
    pub fn rhs(&self, metric: &dyn Metric, state: &ParticleState) -> Result<StateDerivative> {
        match self {
            ForceLaw::Geodesic => geodesic_rhs(metric, state),
            ForceLaw::Lorentz { field, props } => lorentz_rhs(metric, field, props, state),
            ForceLaw::Papapetrou { props } => papapetrou_rhs(metric, props, state),
            ForceLaw::Dixon { field, props } => dixon_rhs(metric, field, props, state),
        }
    }
}

/// Fixed step with optional global step halving.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepControl {
    pub step: f64,
    /// When set, the step is halved until the endpoints of consecutive runs
    /// agree to this absolute tolerance.
    pub tolerance: Option<f64>,
    pub max_halvings: u32,
}

impl StepControl {
    pub fn fixed(step: f64) -> Self {
        StepControl {
            step,
            tolerance: None,
            max_halvings: 0,
        }
    }

    pub fn halving(step: f64, tolerance: f64, max_halvings: u32) -> Self {
        StepControl {
            step,
            tolerance: Some(tolerance),
            max_halvings,
        }
    }
}

/// Sampled worldline, one entry per accepted step including both endpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<ParticleState>,
    /// `g_{mn} U^m U^n` at each sample.
    pub norms: Vec<f64>,
    /// Step actually used.
    pub step: f64,
    /// Set when integration stopped early on a domain error.
    pub stopped: Option<Error>,
}

pub const TRAJECTORY_CSV_HEADER: &str = "s,x0,x1,x2,x3,U0,U1,U2,U3,norm";

impl Trajectory {
    pub fn last(&self) -> &ParticleState {
        self.states.last().expect("trajectory holds at least the initial state")
    }

    pub fn is_complete(&self) -> bool {
        self.stopped.is_none()
    }

    /// Largest `|norm(s) - norm(s0)|`.
    pub fn norm_drift(&self) -> f64 {
        let n0 = self.norms[0];
        self.norms.iter().fold(0.0_f64, |m, n| m.max((n - n0).abs()))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{TRAJECTORY_CSV_HEADER}")?;
        for (st, n) in self.states.iter().zip(&self.norms) {
            write!(w, "{:e}", st.s)?;
            for v in st.x.0.iter().chain(st.u.iter()) {
                write!(w, ",{v:e}")?;
            }
            writeln!(w, ",{n:e}")?;
        }
        Ok(())
    }
}

/// Fixed-step march with a hook applied after every RK4 step. The hook sees
/// the pre-step state and may modify the post-step state.
pub(crate) fn march<F, K>(
    metric: &dyn Metric,
    rhs: F,
    initial: &ParticleState,
    s_end: f64,
    step: f64,
    mut kick: K,
) -> Result<Trajectory>
where
    F: Fn(&ParticleState) -> Result<StateDerivative>,
    K: FnMut(&ParticleState, &mut ParticleState) -> Result<()>,
{
    validate_span(initial.s, s_end, step)?;
    let (n, h) = uniform_steps(initial.s, s_end, step);
    let mut states = Vec::with_capacity(n + 1);
    let mut norms = Vec::with_capacity(n + 1);
    states.push(*initial);
    norms.push(velocity_norm(metric, &initial.x, &initial.u)?);

    let mut f = |s: f64, y: &[f64; 8]| -> Result<[f64; 8]> {
        let d = rhs(&ParticleState::from_array(s, y))?;
        let mut out = [0.0; 8];
        out[..4].copy_from_slice(d.dx.as_slice());
        out[4..].copy_from_slice(d.du.as_slice());
        Ok(out)
    };

    let mut current = *initial;
    for i in 0..n {
        let s_next = if i + 1 == n { s_end } else { initial.s + (i + 1) as f64 * h };
        let outcome = rk4_step(&mut f, current.s, &current.to_array(), h).and_then(|y| {
            let mut next = ParticleState::from_array(s_next, &y);
            kick(&current, &mut next)?;
            check_finite(&next)?;
            let norm = velocity_norm(metric, &next.x, &next.u)?;
            Ok((next, norm))
        });
        match outcome {
            Ok((next, norm)) => {
                states.push(next);
                norms.push(norm);
                current = next;
            }
            Err(e) if e.is_domain() => {
                return Ok(Trajectory {
                    states,
                    norms,
                    step: h,
                    stopped: Some(e),
                })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Trajectory {
        states,
        norms,
        step: h,
        stopped: None,
    })
}

fn check_finite(state: &ParticleState) -> Result<()> {
    if state.x.is_finite() && state.u.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteResult("integrated state"))
    }
}

pub(crate) fn validate_span(s0: f64, s_end: f64, step: f64) -> Result<()> {
    if !(s_end > s0) {
        return Err(Error::InvalidParameter(format!("s_end = {s_end} must exceed s0 = {s0}")));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParameter(format!("step must be > 0, got {step}")));
    }
    Ok(())
}

/// Integrates `rhs` from `initial` to `s_end`.
///
/// A domain error mid-trajectory returns the partial trajectory with
/// [`Trajectory::stopped`] set; non-finite results abort with an error.
pub fn integrate<F>(
    metric: &dyn Metric,
    rhs: F,
    initial: &ParticleState,
    s_end: f64,
    control: StepControl,
) -> Result<Trajectory>
where
    F: Fn(&ParticleState) -> Result<StateDerivative>,
{
    let no_kick = |_: &ParticleState, _: &mut ParticleState| Ok(());
    let mut coarse = march(metric, &rhs, initial, s_end, control.step, no_kick)?;
    let Some(tol) = control.tolerance else {
        return Ok(coarse);
    };
    let mut step = control.step;
    for _ in 0..control.max_halvings {
        if !coarse.is_complete() {
            break;
        }
        step *= 0.5;
        let fine = march(metric, &rhs, initial, s_end, step, no_kick)?;
        let a = coarse.last();
        let b = fine.last();
        let diff = (a.x.0 - b.x.0).amax().max((a.u - b.u).amax());
        coarse = fine;
        if diff <= tol {
            break;
        }
    }
    Ok(coarse)
}

/// Equatorial circular geodesic of Schwarzschild at radius `r > 3M`,
/// starting at `t = phi = 0`.
pub fn schwarzschild_circular_orbit(mass: f64, r: f64) -> Result<ParticleState> {
    if !(r > 3.0 * mass) {
        return Err(Error::InvalidParameter(format!("circular orbits need r > 3M, got r = {r}")));
    }
    let ut = 1.0 / (1.0 - 3.0 * mass / r).sqrt();
    let uphi = (mass / r.powi(3)).sqrt() * ut;
    Ok(ParticleState::new(
        0.0,
        ChartPoint::new(0.0, r, std::f64::consts::FRAC_PI_2, 0.0),
        Vector4::new(ut, 0.0, 0.0, uphi),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Minkowski, Schwarzschild};

    #[test]
    fn flat_geodesic_has_no_acceleration() {
        let st = ParticleState::new(0.0, ChartPoint::new(0.0, 1.0, 2.0, 3.0), Vector4::new(1.2, 0.3, -0.4, 0.5));
        let d = geodesic_rhs(&Minkowski, &st).unwrap();
        assert_eq!(d.du, Vector4::zeros());
        assert_eq!(d.dx, st.u);
    }

    #[test]
    fn excluded_point_is_domain_error() {
        let m = Schwarzschild::new(1.0).unwrap();
        let st = ParticleState::new(0.0, ChartPoint::new(0.0, 1.5, 1.0, 0.0), Vector4::new(1.0, 0.0, 0.0, 0.0));
        assert!(geodesic_rhs(&m, &st).unwrap_err().is_domain());
    }

    #[test]
    fn spin_tensor_validation() {
        let mut m = Matrix4::zeros();
        m[(0, 1)] = 1.0;
        assert!(SpinTensor::new(m).is_err());
        m[(1, 0)] = -1.0;
        assert!(SpinTensor::new(m).is_ok());
        assert!(SpinTensor::from_upper(&[(2, 1, 1.0)]).is_err());
        assert!(ParticleProperties::new(0.0, 1.0, SpinTensor::zero()).is_err());
    }

    #[test]
    fn supplementary_condition_holds_after_projection() {
        let g = Matrix4::from_diagonal(&Vector4::new(-1.0, 1.0, 1.0, 1.0));
        let u = Vector4::new(1.25, 0.75, 0.0, 0.0);
        let s = SpinTensor::from_upper(&[(0, 1, 0.3), (1, 2, 0.2), (0, 3, -0.1), (2, 3, 0.05)]).unwrap();
        let p = s.with_supplementary_condition(&u, &g).unwrap();
        let residual = p.components() * (g * u);
        assert!(residual.amax() < 1e-15);
        assert_eq!(*p.components(), -p.components().transpose());
    }

    #[test]
    fn radial_infall_stops_at_horizon_margin() {
        let m = Schwarzschild::new(1.0).unwrap();
        let r0 = 4.0;
        let f = 1.0 - 2.0 / r0;
        // Released from rest.
        let st = ParticleState::new(0.0, ChartPoint::new(0.0, r0, 1.0, 0.0), Vector4::new(1.0 / f.sqrt(), 0.0, 0.0, 0.0));
        let traj = integrate(&m, |s| geodesic_rhs(&m, s), &st, 50.0, StepControl::fixed(0.01)).unwrap();
        assert!(traj.stopped.as_ref().is_some_and(|e| e.is_domain()));
        assert!(traj.states.len() > 2);
        assert!(traj.last().x.0[1] > 2.0);
    }

    #[test]
    fn step_halving_refines() {
        let m = Schwarzschild::new(1.0).unwrap();
        let st = schwarzschild_circular_orbit(1.0, 8.0).unwrap();
        let traj = integrate(&m, |s| geodesic_rhs(&m, s), &st, 20.0, StepControl::halving(2.0, 1e-8, 10)).unwrap();
        assert!(traj.step < 2.0);
        assert!(traj.is_complete());
    }

    #[test]
    fn invalid_span_rejected() {
        let st = ParticleState::new(1.0, ChartPoint::new(0.0, 0.0, 0.0, 0.0), Vector4::new(1.0, 0.0, 0.0, 0.0));
        assert!(integrate(&Minkowski, |s| geodesic_rhs(&Minkowski, s), &st, 0.5, StepControl::fixed(0.1)).is_err());
        assert!(integrate(&Minkowski, |s| geodesic_rhs(&Minkowski, s), &st, 2.0, StepControl::fixed(0.0)).is_err());
    }

    #[test]
    fn csv_layout() {
        let st = ParticleState::new(0.0, ChartPoint::new(0.0, 0.0, 0.0, 0.0), Vector4::new(1.0, 0.0, 0.0, 0.0));
        let traj = integrate(&Minkowski, |s| geodesic_rhs(&Minkowski, s), &st, 1.0, StepControl::fixed(0.5)).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], TRAJECTORY_CSV_HEADER);
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[3].split(',').count(), 10);
    }
}
