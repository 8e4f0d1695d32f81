//! Geodesic deviation integrated alongside its base geodesic.
//!
//! The stored rate is the coordinate rate `W = dPsi/ds`; the covariant rate is
//! `DPsi/Ds = W + G^a_{mn} U^m Psi^n`. The right-hand side evaluates
//! `D^2 Psi^a/Ds^2 = R^a_{bcd} U^b U^c Psi^d` and converts it to coordinate form:
//!
//! ```text
//! dW^a/ds = K^a - G^a_{mn} U^m P^n - d_l G^a_{mn} U^l U^m Psi^n
//!         + G^a_{mn} G^m_{rs} U^r U^s Psi^n - G^a_{mn} U^m W^n
//! ```
//!
//! with `P = DPsi/Ds` and `K = CURVATURE_SIGN * R(U, U, Psi)`.

use std::io::{self, Write};

use nalgebra::Vector4;

use crate::error::{Error, Result};
use crate::geometry::{christoffel, ChartPoint, LocalGeometry, Metric};
use crate::motion::{geodesic_rhs, integrate, validate_span, velocity_norm, ParticleState, StepControl, Trajectory};
use crate::ode::{rk4_step, uniform_steps};

/// Sign multiplying `R^a_{bcd} U^b U^c Psi^d`, fixed against the two-geodesic
/// oracle for the Riemann convention in [`crate::geometry`].
pub const CURVATURE_SIGN: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeviationState {
    pub psi: Vector4<f64>,
    /// Coordinate rate `dPsi/ds`.
    pub w: Vector4<f64>,
}

impl DeviationState {
    pub fn new(psi: Vector4<f64>, w: Vector4<f64>) -> Self {
        DeviationState { psi, w }
    }

    pub fn zero() -> Self {
        DeviationState {
            psi: Vector4::zeros(),
            w: Vector4::zeros(),
        }
    }
}

/// `DPsi/Ds = W + G^a_{mn} U^m Psi^n` at the base point.
pub fn covariant_rate(metric: &dyn Metric, base: &ParticleState, dev: &DeviationState) -> Result<Vector4<f64>> {
    let gamma = christoffel(metric, &base.x, metric.default_step())?;
    Ok(dev.w + gamma.contract(&base.u, &dev.psi))
}

/// Inverse of [`covariant_rate`]: coordinate rate from a covariant rate.
pub fn coordinate_rate(
    metric: &dyn Metric,
    base: &ParticleState,
    psi: &Vector4<f64>,
    covariant: &Vector4<f64>,
) -> Result<Vector4<f64>> {
    let gamma = christoffel(metric, &base.x, metric.default_step())?;
    Ok(covariant - gamma.contract(&base.u, psi))
}

fn rhs_with_sign(
    local: &LocalGeometry,
    u: &Vector4<f64>,
    dev: &DeviationState,
    sign: f64,
) -> (Vector4<f64>, Vector4<f64>) {
    let g = &local.gamma;
    let p = dev.w + g.contract(u, &dev.psi);
    let accel = -g.contract(u, u);
    let curvature = local.riemann.contract(u, u, &dev.psi) * sign;
    let dw = curvature - g.contract(u, &p) - local.dgamma.contract(u, u, &dev.psi) - g.contract(&accel, &dev.psi)
        - g.contract(u, &dev.w);
    (dev.w, dw)
}

/// `(dPsi/ds, dW/ds)` at the base state.
pub fn deviation_rhs(
    metric: &dyn Metric,
    base: &ParticleState,
    dev: &DeviationState,
) -> Result<(Vector4<f64>, Vector4<f64>)> {
    let local = LocalGeometry::at(metric, &base.x, metric.curvature_step())?;
    let out = rhs_with_sign(&local, &base.u, dev, CURVATURE_SIGN);
    if out.1.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteResult("deviation rhs"));
    }
    Ok(out)
}

/// Base geodesic plus deviation samples on the same grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedTrajectory {
    pub base: Trajectory,
    pub deviation: Vec<DeviationState>,
}

pub const DEVIATION_CSV_HEADER: &str = "s,Psi0,Psi1,Psi2,Psi3,W0,W1,W2,W3";

impl PairedTrajectory {
    /// CSV with one row per sample; oracle columns are appended when given.
    pub fn write_csv<W: Write>(&self, mut w: W, oracle: Option<&[DeviationState]>) -> io::Result<()> {
        if let Some(o) = oracle {
            if o.len() != self.deviation.len() {
                return Err(io::Error::new(io::ErrorKind::InvalidInput, "oracle length differs from trajectory"));
            }
        }
        write!(w, "{DEVIATION_CSV_HEADER}")?;
        if oracle.is_some() {
            write!(w, ",oPsi0,oPsi1,oPsi2,oPsi3,oW0,oW1,oW2,oW3")?;
        }
        writeln!(w)?;
        for (i, (b, d)) in self.base.states.iter().zip(&self.deviation).enumerate() {
            write!(w, "{:e}", b.s)?;
            for v in d.psi.iter().chain(d.w.iter()) {
                write!(w, ",{v:e}")?;
            }
            if let Some(o) = oracle {
                for v in o[i].psi.iter().chain(o[i].w.iter()) {
                    write!(w, ",{v:e}")?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn pack(base: &ParticleState, dev: &DeviationState) -> [f64; 16] {
    let mut y = [0.0; 16];
    y[..8].copy_from_slice(&base.to_array());
    y[8..12].copy_from_slice(dev.psi.as_slice());
    y[12..].copy_from_slice(dev.w.as_slice());
    y
}

fn unpack(s: f64, y: &[f64; 16]) -> (ParticleState, DeviationState) {
    (
        ParticleState::from_array(s, &y[..8]),
        DeviationState::new(Vector4::new(y[8], y[9], y[10], y[11]), Vector4::new(y[12], y[13], y[14], y[15])),
    )
}

/// Joint fixed-step march of base and deviation with a post-step hook.
pub(crate) fn march_pair<K>(
    metric: &dyn Metric,
    base: &ParticleState,
    dev: &DeviationState,
    s_end: f64,
    step: f64,
    mut kick: K,
) -> Result<PairedTrajectory>
where
    K: FnMut(&ParticleState, &DeviationState, &mut ParticleState, &mut DeviationState) -> Result<()>,
{
    validate_span(base.s, s_end, step)?;
    let (n, h) = uniform_steps(base.s, s_end, step);
    let mut states = vec![*base];
    let mut norms = vec![velocity_norm(metric, &base.x, &base.u)?];
    let mut devs = vec![*dev];

    let curvature_step = metric.curvature_step();
    let mut f = |_s: f64, y: &[f64; 16]| -> Result<[f64; 16]> {
        let x = ChartPoint(Vector4::new(y[0], y[1], y[2], y[3]));
        let u = Vector4::new(y[4], y[5], y[6], y[7]);
        let local = LocalGeometry::at(metric, &x, curvature_step)?;
        let d = DeviationState::new(Vector4::new(y[8], y[9], y[10], y[11]), Vector4::new(y[12], y[13], y[14], y[15]));
        let (dpsi, dw) = rhs_with_sign(&local, &u, &d, CURVATURE_SIGN);
        let du = -local.gamma.contract(&u, &u);
        let mut out = [0.0; 16];
        out[..4].copy_from_slice(u.as_slice());
        out[4..8].copy_from_slice(du.as_slice());
        out[8..12].copy_from_slice(dpsi.as_slice());
        out[12..].copy_from_slice(dw.as_slice());
        Ok(out)
    };

    let (mut cur_b, mut cur_d) = (*base, *dev);
    let mut stopped = None;
    for i in 0..n {
        let s_next = if i + 1 == n { s_end } else { base.s + (i + 1) as f64 * h };
        let outcome = rk4_step(&mut f, cur_b.s, &pack(&cur_b, &cur_d), h).and_then(|y| {
            let (mut nb, mut nd) = unpack(s_next, &y);
            kick(&cur_b, &cur_d, &mut nb, &mut nd)?;
            if !pack(&nb, &nd).iter().all(|v| v.is_finite()) {
                return Err(Error::NonFiniteResult("deviation state"));
            }
            let norm = velocity_norm(metric, &nb.x, &nb.u)?;
            Ok((nb, nd, norm))
        });
        match outcome {
            Ok((nb, nd, norm)) => {
                states.push(nb);
                devs.push(nd);
                norms.push(norm);
                cur_b = nb;
                cur_d = nd;
            }
            Err(e) if e.is_domain() => {
                stopped = Some(e);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(PairedTrajectory {
        base: Trajectory {
            states,
            norms,
            step: h,
            stopped,
        },
        deviation: devs,
    })
}

/// Evolves the base geodesic and its deviation with the same RK4 steps.
pub fn integrate_deviation(
    metric: &dyn Metric,
    base: &ParticleState,
    dev: &DeviationState,
    s_end: f64,
    step: f64,
) -> Result<PairedTrajectory> {
    march_pair(metric, base, dev, s_end, step, |_, _, _, _| Ok(()))
}

/// Default oracle offset for a metric.
pub fn default_oracle_epsilon(metric: &dyn Metric) -> f64 {
    1e-6 * metric.coordinate_scale()
}

/// Reference deviation from two neighbouring geodesics.
///
/// Integrates geodesics from `(x0, U0)` and `(x0 + eps Psi0, U0 + eps W0)`
/// with the same steps and returns `(x2 - x1)/eps`, `(U2 - U1)/eps`. Because
/// `W0` is a coordinate rate, the offset velocity needs no connection term.
pub fn two_geodesic_oracle(
    metric: &dyn Metric,
    base: &ParticleState,
    psi0: &Vector4<f64>,
    w0: &Vector4<f64>,
    eps: f64,
    s_end: f64,
    step: f64,
) -> Result<Vec<DeviationState>> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("oracle offset must be > 0, got {eps}")));
    }
    let offset = ParticleState::new(base.s, ChartPoint(base.x.0 + psi0 * eps), base.u + w0 * eps);
    let control = StepControl::fixed(step);
    let a = integrate(metric, |s| geodesic_rhs(metric, s), base, s_end, control)?;
    let b = integrate(metric, |s| geodesic_rhs(metric, s), &offset, s_end, control)?;
    for t in [&a, &b] {
        if let Some(e) = &t.stopped {
            return Err(e.clone());
        }
    }
    Ok(a
        .states
        .iter()
        .zip(&b.states)
        .map(|(p, q)| DeviationState::new((q.x.0 - p.x.0) / eps, (q.u - p.u) / eps))
        .collect())
}

/// `max_s |Psi(s) - Psi_ref(s)| / max_s |Psi_ref(s)|` using the max-abs norm.
pub fn relative_sup_error(psi: &[DeviationState], reference: &[DeviationState]) -> Result<f64> {
    if psi.len() != reference.len() {
        return Err(Error::GridMismatch(format!("{} vs {} samples", psi.len(), reference.len())));
    }
    let scale = reference.iter().fold(0.0_f64, |m, d| m.max(d.psi.amax()));
    let err = psi
        .iter()
        .zip(reference)
        .fold(0.0_f64, |m, (a, b)| m.max((a.psi - b.psi).amax()));
    Ok(if scale > 0.0 { err / scale } else { err })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Minkowski, Schwarzschild};
    use crate::motion::schwarzschild_circular_orbit;

    fn orbit_case(sign: f64) -> f64 {
        let m = Schwarzschild::new(1.0).unwrap();
        let base = schwarzschild_circular_orbit(1.0, 6.0).unwrap();
        let dev = DeviationState::new(Vector4::new(0.0, 1.0, 0.0, 0.0), Vector4::zeros());
        let s_end = 20.0;
        let h = 0.05;
        let (n, hh) = uniform_steps(0.0, s_end, h);
        let mut y = pack(&base, &dev);
        let mut f = |_s: f64, y: &[f64; 16]| -> Result<[f64; 16]> {
            let (b, d) = unpack(0.0, y);
            let local = LocalGeometry::at(&m, &b.x, m.curvature_step())?;
            let (dpsi, dw) = rhs_with_sign(&local, &b.u, &d, sign);
            let du = -local.gamma.contract(&b.u, &b.u);
            let mut out = [0.0; 16];
            out[..4].copy_from_slice(b.u.as_slice());
            out[4..8].copy_from_slice(du.as_slice());
            out[8..12].copy_from_slice(dpsi.as_slice());
            out[12..].copy_from_slice(dw.as_slice());
            Ok(out)
        };
        let mut out = vec![dev];
        for i in 0..n {
            y = rk4_step(&mut f, i as f64 * hh, &y, hh).unwrap();
            out.push(unpack(0.0, &y).1);
        }
        let oracle = two_geodesic_oracle(&m, &base, &dev.psi, &dev.w, 1e-6, s_end, h).unwrap();
        relative_sup_error(&out, &oracle).unwrap()
    }

    // Permanent convention check: the frozen sign reproduces the oracle and
    // the opposite sign does not.
    #[test]
    fn curvature_sign_convention() {
        assert_eq!(CURVATURE_SIGN, 1.0);
        assert!(orbit_case(CURVATURE_SIGN) < 1e-4);
        assert!(orbit_case(-CURVATURE_SIGN) > 1e-2);
    }

    #[test]
    fn flat_deviation_is_affine() {
        let base = ParticleState::new(0.0, ChartPoint::new(0.0, 0.0, 0.0, 0.0), Vector4::new(1.0, 0.0, 0.0, 0.0));
        let dev = DeviationState::new(Vector4::new(0.0, 1.0, 0.0, 0.0), Vector4::new(0.0, 0.0, 1.0, 0.0));
        let pair = integrate_deviation(&Minkowski, &base, &dev, 2.0, 0.1).unwrap();
        let last = pair.deviation.last().unwrap();
        assert!((last.psi - Vector4::new(0.0, 1.0, 2.0, 0.0)).amax() < 1e-14);
        let (_, dw) = deviation_rhs(&Minkowski, &base, &dev).unwrap();
        assert_eq!(dw, Vector4::zeros());
    }

    #[test]
    fn zero_deviation_stays_zero() {
        let m = Schwarzschild::new(1.0).unwrap();
        let base = schwarzschild_circular_orbit(1.0, 6.0).unwrap();
        let pair = integrate_deviation(&m, &base, &DeviationState::zero(), 10.0, 0.1).unwrap();
        assert!(pair.deviation.iter().all(|d| d.psi == Vector4::zeros() && d.w == Vector4::zeros()));
    }

    #[test]
    fn covariant_rate_round_trip() {
        let m = Schwarzschild::new(1.0).unwrap();
        let base = schwarzschild_circular_orbit(1.0, 7.0).unwrap();
        let dev = DeviationState::new(Vector4::new(0.1, 0.2, 0.0, -0.3), Vector4::new(0.0, 0.5, 0.1, 0.2));
        let p = covariant_rate(&m, &base, &dev).unwrap();
        let w = coordinate_rate(&m, &base, &dev.psi, &p).unwrap();
        assert!((w - dev.w).amax() < 1e-15);
    }

    #[test]
    fn oracle_rejects_bad_epsilon() {
        let base = ParticleState::new(0.0, ChartPoint::new(0.0, 0.0, 0.0, 0.0), Vector4::new(1.0, 0.0, 0.0, 0.0));
        let z = Vector4::zeros();
        assert!(two_geodesic_oracle(&Minkowski, &base, &z, &z, 0.0, 1.0, 0.1).is_err());
    }
}
