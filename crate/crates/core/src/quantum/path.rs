use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::member_rng;

/// Samples `f(t)` on an increasing grid, optionally tagged with a resolution
/// `dt` at which difference quotients are taken.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledPath {
    times: Vec<f64>,
    values: Vec<Complex64>,
    stride: usize,
}

impl SampledPath {
    pub fn new(times: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::GridMismatch(format!("{} times vs {} values", times.len(), values.len())));
        }
        if times.len() < 3 {
            return Err(Error::InvalidParameter("a sampled path needs at least 3 samples".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("sample times must be strictly increasing".into()));
        }
        Ok(SampledPath { times, values, stride: 1 })
    }

    pub fn from_real(times: Vec<f64>, values: &[f64]) -> Result<Self> {
        Self::new(times, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    /// Wiener path `x(t)` with `<dx^2> = 2 D dt`, starting at 0 on a uniform
    /// grid of spacing `dt`. Increments come from stream 0 of `seed`.
    pub fn brownian(seed: u64, samples: usize, dt: f64, diffusion: f64) -> Result<Self> {
        if !(dt > 0.0 && diffusion > 0.0) {
            return Err(Error::InvalidParameter(format!("need dt > 0 and D > 0, got dt = {dt}, D = {diffusion}")));
        }
        let mut rng = member_rng(seed, 0);
        let sd = (2.0 * diffusion * dt).sqrt();
        let mut x = 0.0;
        let mut values = Vec::with_capacity(samples);
        for _ in 0..samples {
            values.push(x);
            let eta: f64 = StandardNormal.sample(&mut rng);
            x += sd * eta;
        }
        Self::from_real((0..samples).map(|i| i as f64 * dt).collect(), &values)
    }

    /// Mean `|forward|` and mean `|forward - backward|` over every
    /// interior sample at the current resolution.
    pub fn mean_quotients(&self) -> (f64, f64) {
        let (mut fwd, mut gap, mut count) = (0.0, 0.0, 0usize);
        for i in self.stride..self.len() - self.stride {
            let f = self.forward_derivative(i).expect("interior index");
            let b = self.backward_derivative(i).expect("interior index");
            fwd += f.norm();
            gap += (f - b).norm();
            count += 1;
        }
        let n = count.max(1) as f64;
        (fwd / n, gap / n)
    }

    /// Takes difference quotients at resolution `dt`, which must be a whole
    /// multiple of the (uniform) grid spacing.
    pub fn with_resolution(mut self, dt: f64) -> Result<Self> {
        let h = self.times[1] - self.times[0];
        let uniform = self
            .times
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(1e-300));
        if !uniform {
            return Err(Error::InvalidParameter("resolution indexing needs a uniform grid".into()));
        }
        let stride = (dt / h).round();
        if stride < 1.0 || (stride * h - dt).abs() > 1e-9 * dt {
            return Err(Error::InvalidParameter(format!("dt = {dt} is not a multiple of the spacing {h}")));
        }
        self.stride = stride as usize;
        Ok(self)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn resolution(&self) -> f64 {
        self.times[self.stride] - self.times[0]
    }

    pub fn index_of(&self, t: f64) -> Result<usize> {
        let tol = 1e-12 * t.abs().max(1.0);
        let i = self.times.partition_point(|&x| x < t - tol);
        if i < self.times.len() && (self.times[i] - t).abs() <= tol {
            Ok(i)
        } else {
            Err(Error::GridMismatch(format!("t = {t} is not a grid time")))
        }
    }

    /// `(f(t + dt) - f(t)) / dt` at sample `index`.
    pub fn forward_derivative(&self, index: usize) -> Result<Complex64> {
        let j = index + self.stride;
        if j >= self.len() {
            return Err(Error::Boundary { side: "right", index });
        }
        Ok((self.values[j] - self.values[index]) / (self.times[j] - self.times[index]))
    }

    /// `(f(t) - f(t - dt)) / dt` at sample `index`.
    pub fn backward_derivative(&self, index: usize) -> Result<Complex64> {
        if index < self.stride || index >= self.len() {
            return Err(Error::Boundary { side: "left", index });
        }
        let j = index - self.stride;
        Ok((self.values[index] - self.values[j]) / (self.times[index] - self.times[j]))
    }

    pub fn forward_derivative_at(&self, t: f64) -> Result<Complex64> {
        self.forward_derivative(self.index_of(t)?)
    }

    pub fn backward_derivative_at(&self, t: f64) -> Result<Complex64> {
        self.backward_derivative(self.index_of(t)?)
    }
}
