use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::velocity::nelson_drift;
use super::wavefunction::Wavefunction;
use super::QuantumParams;
use crate::error::{Error, Result};
use crate::rng::counter_rng;

/// Walkers of the forward diffusion `dx = b+ dt + sqrt(2D) dW`.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkerEnsemble {
    pub positions: Vec<[f64; 3]>,
    pub t: f64,
    pub params: QuantumParams,
    pub seed: u64,
    /// Steps taken so far; keys the per-step random streams.
    pub steps: u64,
    /// Moves rejected because the walker started or landed below the floor.
    pub rejections: u64,
}

impl WalkerEnsemble {
    pub fn new(positions: Vec<[f64; 3]>, t: f64, params: QuantumParams, seed: u64) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidParameter("a walker ensemble needs at least one walker".into()));
        }
        if positions.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("walker positions must be finite".into()));
        }
        params.validate()?;
        Ok(WalkerEnsemble {
            positions,
            t,
            params,
            seed,
            steps: 0,
            rejections: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// One coordinate of every walker.
    pub fn axis(&self, a: usize) -> Vec<f64> {
        self.positions.iter().map(|p| p[a]).collect()
    }
}

/// Advances every walker by `dt`. Walker `i` at step `n` draws from stream
/// `(seed, i, n)`, so results do not depend on thread count. A move that
/// starts or lands where `|psi|` is below the floor is undone and counted.
pub fn walker_step(ensemble: &mut WalkerEnsemble, psi: &Wavefunction, dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
    }
    let params = ensemble.params;
    let (seed, step, t) = (ensemble.seed, ensemble.steps, ensemble.t);
    let noise = (2.0 * params.diffusion * dt).sqrt();
    let outcomes: Vec<Result<bool>> = ensemble
        .positions
        .par_iter_mut()
        .enumerate()
        .map(|(i, x)| {
            let mut rng = counter_rng(seed, i as u64, step);
            let eta: [f64; 3] = [0, 1, 2].map(|_| StandardNormal.sample(&mut rng));
            let drift = match nelson_drift(psi, &params, x, t) {
                Ok(b) => b,
                Err(Error::AmplitudeFloor { .. }) => return Ok(false),
                Err(e) => return Err(e),
            };
            let next = [0, 1, 2].map(|a| x[a] + drift[a] * dt + noise * eta[a]);
            if next.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFiniteResult("walker position"));
            }
            if psi.value(&next, t + dt)?.norm() < psi.floor() {
                return Ok(false);
            }
            *x = next;
            Ok(true)
        })
        .collect();
    let mut rejected = 0;
    for outcome in outcomes {
        if !outcome? {
            rejected += 1;
        }
    }
    ensemble.rejections += rejected;
    ensemble.steps += 1;
    ensemble.t += dt;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistogramBin {
    pub center: f64,
    pub count: u64,
    /// Expected count from the reference density.
    pub reference: f64,
}

/// Equal-width histogram on `[lo, hi)`; values outside are ignored.
pub fn histogram(values: &[f64], bins: usize, lo: f64, hi: f64, density: impl Fn(f64) -> f64) -> Result<Vec<HistogramBin>> {
    if bins == 0 || !(hi > lo) {
        return Err(Error::InvalidParameter("histogram needs bins > 0 and hi > lo".into()));
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &v in values {
        if v >= lo && v < hi {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
    }
    let n = values.len() as f64;
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(b, count)| {
            let center = lo + (b as f64 + 0.5) * width;
            HistogramBin {
                center,
                count,
                reference: n * width * density(center),
            }
        })
        .collect())
}
