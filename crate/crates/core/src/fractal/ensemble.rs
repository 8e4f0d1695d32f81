use std::ops::Range;

use rand::Rng;
use rayon::prelude::*;

use super::sampling::{sample_connection_fluctuation, sample_curvature_fluctuation};
use super::statistics::Track;
use super::FractalParams;
use crate::deviation::{march_pair, DeviationState, PairedTrajectory};
use crate::error::Result;
use crate::geometry::Metric;
use crate::motion::{geodesic_rhs, march, ParticleState, Trajectory};
use crate::ode::uniform_steps;
use crate::rng::member_rng;

/// Geodesic with connection `G + chi`: each RK4 step of the mean geodesic is
/// followed by the kick `dU^a = -chi^a_{mn} U^m U^n ds`, with a fresh `chi`
/// per step and `U` taken before the step.
///
/// With zero amplitude no kick is applied and the result is bitwise equal to
/// deterministic integration at the same step.
pub fn stochastic_geodesic<R: Rng + ?Sized>(
    metric: &dyn Metric,
    params: &FractalParams,
    initial: &ParticleState,
    s_end: f64,
    ds: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    params.validate()?;
    let rhs = |s: &ParticleState| geodesic_rhs(metric, s);
    if params.amplitude == 0.0 {
        return march(metric, rhs, initial, s_end, ds, |_, _| Ok(()));
    }
    let (_, h) = uniform_steps(initial.s, s_end.max(initial.s + ds), ds);
    march(metric, rhs, initial, s_end, ds, |pre, post| {
        let chi = sample_connection_fluctuation(params, h, rng)?;
        post.u -= chi.contract(&pre.u, &pre.u) * h;
        Ok(())
    })
}

/// Deviation with curvature `R + Xi` on a base path with connection `G + chi`.
/// Per step, `chi` is drawn first and kicks the base velocity; then `Xi`
/// is drawn and kicks the deviation rate by `Xi^a_{bcd} U^b U^c Psi^d ds`.
pub fn stochastic_deviation<R: Rng + ?Sized>(
    metric: &dyn Metric,
    params: &FractalParams,
    base: &ParticleState,
    dev: &DeviationState,
    s_end: f64,
    ds: f64,
    rng: &mut R,
) -> Result<PairedTrajectory> {
    params.validate()?;
    if params.amplitude == 0.0 {
        return march_pair(metric, base, dev, s_end, ds, |_, _, _, _| Ok(()));
    }
    let (_, h) = uniform_steps(base.s, s_end.max(base.s + ds), ds);
    march_pair(metric, base, dev, s_end, ds, |pb, pd, nb, nd| {
        let chi = sample_connection_fluctuation(params, h, rng)?;
        nb.u -= chi.contract(&pb.u, &pb.u) * h;
        let xi = sample_curvature_fluctuation(params, h, rng)?;
        nd.w += xi.contract(&pb.u, &pb.u, &pd.psi) * h;
        Ok(())
    })
}

fn geodesic_track(t: &Trajectory) -> Track {
    let s = t.states.iter().map(|st| st.s).collect();
    let data = t.states.iter().flat_map(|st| st.x.0.iter().chain(st.u.iter()).copied()).collect();
    Track::new(s, 8, data).expect("consistent layout")
}

fn deviation_track(p: &PairedTrajectory) -> Track {
    let s = p.base.states.iter().map(|st| st.s).collect();
    let data = p.deviation.iter().flat_map(|d| d.psi.iter().chain(d.w.iter()).copied()).collect();
    Track::new(s, 8, data).expect("consistent layout")
}

fn complete(t: Trajectory) -> Result<Trajectory> {
    match t.stopped {
        Some(e) => Err(e),
        None => Ok(t),
    }
}

fn run_members<T, F>(members: Range<u64>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    // Indexed collection keeps member order independent of scheduling.
    members.into_par_iter().map(f).collect()
}

/// `n` stochastic geodesics, member `i` drawing from stream `i` of the
/// master seed. Tracks hold `(x, U)` per sample.
pub fn geodesic_ensemble(
    metric: &dyn Metric,
    params: &FractalParams,
    initial: &ParticleState,
    s_end: f64,
    ds: f64,
    n: usize,
) -> Result<Vec<Track>> {
    geodesic_ensemble_range(metric, params, initial, s_end, ds, 0..n as u64)
}

/// Members `members` of the ensemble; member `i` always draws from the same
/// stream, so ranges can be run in chunks.
pub fn geodesic_ensemble_range(
    metric: &dyn Metric,
    params: &FractalParams,
    initial: &ParticleState,
    s_end: f64,
    ds: f64,
    members: Range<u64>,
) -> Result<Vec<Track>> {
    run_members(members, |i| {
        let mut rng = member_rng(params.seed, i);
        let t = complete(stochastic_geodesic(metric, params, initial, s_end, ds, &mut rng)?)?;
        Ok(geodesic_track(&t))
    })
}

/// Endpoint `(x, U)` of each member of [`geodesic_ensemble`].
pub fn geodesic_ensemble_endpoints(
    metric: &dyn Metric,
    params: &FractalParams,
    initial: &ParticleState,
    s_end: f64,
    ds: f64,
    n: usize,
) -> Result<Vec<Vec<f64>>> {
    run_members(0..n as u64, |i| {
        let mut rng = member_rng(params.seed, i);
        let t = complete(stochastic_geodesic(metric, params, initial, s_end, ds, &mut rng)?)?;
        Ok(t.last().x.0.iter().chain(t.last().u.iter()).copied().collect())
    })
}

/// `n` stochastic deviations; tracks hold `(Psi, W)` per sample.
pub fn deviation_ensemble(
    metric: &dyn Metric,
    params: &FractalParams,
    base: &ParticleState,
    dev: &DeviationState,
    s_end: f64,
    ds: f64,
    n: usize,
) -> Result<Vec<Track>> {
    deviation_ensemble_range(metric, params, base, dev, s_end, ds, 0..n as u64)
}

pub fn deviation_ensemble_range(
    metric: &dyn Metric,
    params: &FractalParams,
    base: &ParticleState,
    dev: &DeviationState,
    s_end: f64,
    ds: f64,
    members: Range<u64>,
) -> Result<Vec<Track>> {
    run_members(members, |i| {
        let mut rng = member_rng(params.seed, i);
        let p = stochastic_deviation(metric, params, base, dev, s_end, ds, &mut rng)?;
        if let Some(e) = p.base.stopped.clone() {
            return Err(e);
        }
        Ok(deviation_track(&p))
    })
}

/// Endpoint `(Psi, W)` of each member of [`deviation_ensemble`].
pub fn deviation_ensemble_endpoints(
    metric: &dyn Metric,
    params: &FractalParams,
    base: &ParticleState,
    dev: &DeviationState,
    s_end: f64,
    ds: f64,
    n: usize,
) -> Result<Vec<Vec<f64>>> {
    run_members(0..n as u64, |i| {
        let mut rng = member_rng(params.seed, i);
        let p = stochastic_deviation(metric, params, base, dev, s_end, ds, &mut rng)?;
        if let Some(e) = p.base.stopped.clone() {
            return Err(e);
        }
        let d = p.deviation.last().expect("non-empty");
        Ok(d.psi.iter().chain(d.w.iter()).copied().collect())
    })
}

impl Track {
    pub fn from_trajectory(t: &Trajectory) -> Track {
        geodesic_track(t)
    }

    pub fn from_deviation(p: &PairedTrajectory) -> Track {
        deviation_track(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deviation::integrate_deviation;
    use crate::fractal::NoiseDistribution;
    use crate::geometry::{Minkowski, Schwarzschild};
    use crate::motion::{integrate, schwarzschild_circular_orbit, StepControl};
    use crate::rng::counter_rng;
    use nalgebra::Vector4;

    #[test]
    fn zero_amplitude_matches_deterministic_bitwise() {
        let m = Schwarzschild::new(1.0).unwrap();
        let init = schwarzschild_circular_orbit(1.0, 6.0).unwrap();
        let p = FractalParams::new(1.0, 0.0, 9, NoiseDistribution::Gaussian).unwrap();
        let a = stochastic_geodesic(&m, &p, &init, 5.0, 0.1, &mut counter_rng(9, 0, 0)).unwrap();
        let b = integrate(&m, |s| geodesic_rhs(&m, s), &init, 5.0, StepControl::fixed(0.1)).unwrap();
        assert_eq!(a, b);

        let dev = DeviationState::new(Vector4::new(0.0, 1.0, 0.0, 0.0), Vector4::zeros());
        let c = stochastic_deviation(&m, &p, &init, &dev, 5.0, 0.1, &mut counter_rng(9, 0, 0)).unwrap();
        let d = integrate_deviation(&m, &init, &dev, 5.0, 0.1).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let m = Minkowski;
        let init = ParticleState::new(0.0, crate::ChartPoint::new(0.0, 0.0, 0.0, 0.0), Vector4::new(1.0, 0.1, 0.0, 0.0));
        let p = FractalParams::new(1.0, 0.01, 42, NoiseDistribution::Gaussian).unwrap();
        let a = geodesic_ensemble(&m, &p, &init, 1.0, 0.1, 16).unwrap();
        let b = geodesic_ensemble(&m, &p, &init, 1.0, 0.1, 16).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
    }
}
