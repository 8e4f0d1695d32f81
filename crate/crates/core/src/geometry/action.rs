//! Discrete Bazanski action `L = g_{ab} U^a DPsi^b/Ds` along a sampled worldline.

use nalgebra::Vector4;

use super::metric::{metric_components, ChartPoint, Metric};
use super::tensors::christoffel;
use crate::error::{Error, Result};

/// One sample of the integrand inputs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActionSample {
    pub s: f64,
    pub x: ChartPoint,
    pub u: Vector4<f64>,
    pub psi: Vector4<f64>,
    /// Covariant rate `DPsi/Ds`.
    pub dpsi: Vector4<f64>,
}

/// Lagrangian density `g_{ab} U^a DPsi^b/Ds` at one sample.
pub fn bazanski_lagrangian(metric: &dyn Metric, sample: &ActionSample) -> Result<f64> {
    let g = metric_components(metric, &sample.x)?;
    Ok((g * sample.dpsi).dot(&sample.u))
}

/// Trapezoidal integral of the Bazanski Lagrangian.
pub fn bazanski_action(metric: &dyn Metric, samples: &[ActionSample]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::GridMismatch("need at least two samples".into()));
    }
    let mut total = 0.0;
    let mut prev = bazanski_lagrangian(metric, &samples[0])?;
    for w in samples.windows(2) {
        let ds = w[1].s - w[0].s;
        if !(ds > 0.0) {
            return Err(Error::GridMismatch("proper-time grid must be increasing".into()));
        }
        let next = bazanski_lagrangian(metric, &w[1])?;
        total += 0.5 * ds * (prev + next);
        prev = next;
    }
    Ok(total)
}

/// Pairs base samples `(s, x, U)` with deviation samples `(s, Psi, DPsi/Ds)`;
/// the two grids must coincide.
pub fn pair_samples(
    base: &[(f64, ChartPoint, Vector4<f64>)],
    deviation: &[(f64, Vector4<f64>, Vector4<f64>)],
) -> Result<Vec<ActionSample>> {
    if base.len() != deviation.len() {
        return Err(Error::GridMismatch(format!(
            "{} base samples vs {} deviation samples",
            base.len(),
            deviation.len()
        )));
    }
    base.iter()
        .zip(deviation)
        .enumerate()
        .map(|(i, (&(s, x, u), &(sd, psi, dpsi)))| {
            if s != sd {
                return Err(Error::GridMismatch(format!("sample {i}: s = {s} vs {sd}")));
            }
            Ok(ActionSample { s, x, u, psi, dpsi })
        })
        .collect()
}

/// Action with `DPsi/Ds` reconstructed from the sampled `Psi` alone:
/// `dPsi/ds` by differences on the grid (central inside, one-sided at the
/// ends) plus the connection term `G^a_{mn} U^m Psi^n`.
///
/// The result is linear in the `Psi` samples, so its gradient with respect
/// to interior samples is the discrete Euler-Lagrange residual of the base
/// worldline.
pub fn discrete_bazanski_action(
    metric: &dyn Metric,
    s: &[f64],
    x: &[ChartPoint],
    u: &[Vector4<f64>],
    psi: &[Vector4<f64>],
) -> Result<f64> {
    let n = s.len();
    if x.len() != n || u.len() != n || psi.len() != n {
        return Err(Error::GridMismatch("s, x, U and Psi lengths differ".into()));
    }
    if n < 3 {
        return Err(Error::GridMismatch("need at least three samples".into()));
    }
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let rate = if i == 0 {
            (psi[1] - psi[0]) / (s[1] - s[0])
        } else if i == n - 1 {
            (psi[n - 1] - psi[n - 2]) / (s[n - 1] - s[n - 2])
        } else {
            (psi[i + 1] - psi[i - 1]) / (s[i + 1] - s[i - 1])
        };
        let gamma = christoffel(metric, &x[i], metric.default_step())?;
        samples.push(ActionSample {
            s: s[i],
            x: x[i],
            u: u[i],
            psi: psi[i],
            dpsi: rate + gamma.contract(&u[i], &psi[i]),
        });
    }
    bazanski_action(metric, &samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::metric::Minkowski;

    #[test]
    fn zero_deviation_gives_zero_action() {
        let samples: Vec<_> = (0..5)
            .map(|i| ActionSample {
                s: i as f64 * 0.1,
                x: ChartPoint::new(i as f64 * 0.1, 0.0, 0.0, 0.0),
                u: Vector4::new(1.0, 0.0, 0.0, 0.0),
                psi: Vector4::zeros(),
                dpsi: Vector4::zeros(),
            })
            .collect();
        assert_eq!(bazanski_action(&Minkowski, &samples).unwrap(), 0.0);
    }

    #[test]
    fn flat_constant_integrand() {
        let u = Vector4::new(1.25, 0.75, 0.0, 0.0);
        let rate = Vector4::new(0.5, 2.0, -1.0, 0.0);
        let (s0, s1) = (0.5, 3.0);
        let samples: Vec<_> = (0..11)
            .map(|i| {
                let s = s0 + (s1 - s0) * i as f64 / 10.0;
                ActionSample {
                    s,
                    x: ChartPoint(u * s),
                    u,
                    psi: rate * s,
                    dpsi: rate,
                }
            })
            .collect();
        // g(U, rate) = -1.25*0.5 + 0.75*2.0 = 0.875
        let expected = 0.875 * (s1 - s0);
        assert!((bazanski_action(&Minkowski, &samples).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn mismatched_grids_rejected() {
        let base = vec![(0.0, ChartPoint::new(0.0, 0.0, 0.0, 0.0), Vector4::zeros()); 3];
        let dev = vec![(0.0, Vector4::zeros(), Vector4::zeros()); 2];
        assert!(matches!(pair_samples(&base, &dev), Err(Error::GridMismatch(_))));
        let mut dev = vec![(0.0, Vector4::zeros(), Vector4::zeros()); 3];
        dev[2].0 = 0.5;
        assert!(matches!(pair_samples(&base, &dev), Err(Error::GridMismatch(_))));
    }
}
