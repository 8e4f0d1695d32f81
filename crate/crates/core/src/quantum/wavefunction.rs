use std::fmt::Debug;
use std::io::{BufRead, Write};
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

const DEFAULT_FLOOR_FRACTION: f64 = 1e-10;

/// Closed-form `psi(x, t)` with its derivatives.
pub trait AnalyticWave: Send + Sync + Debug {
    fn value(&self, x: &[f64; 3], t: f64) -> Complex64;
    fn gradient(&self, x: &[f64; 3], t: f64) -> [Complex64; 3];
    fn laplacian(&self, x: &[f64; 3], t: f64) -> Complex64;
    fn time_derivative(&self, x: &[f64; 3], t: f64) -> Complex64;
    /// Largest `|psi|` over the domain; sets the default floor.
    fn peak_amplitude(&self) -> f64;
}

/// `amplitude * exp(i(k.x - omega t))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlaneWave {
    pub amplitude: Complex64,
    pub k: [f64; 3],
    pub omega: f64,
}

impl PlaneWave {
    pub fn new(k: [f64; 3], omega: f64) -> Self {
        PlaneWave {
            amplitude: Complex64::new(1.0, 0.0),
            k,
            omega,
        }
    }
}

impl AnalyticWave for PlaneWave {
    fn value(&self, x: &[f64; 3], t: f64) -> Complex64 {
        let phase = self.k[0] * x[0] + self.k[1] * x[1] + self.k[2] * x[2] - self.omega * t;
        self.amplitude * Complex64::from_polar(1.0, phase)
    }

    fn gradient(&self, x: &[f64; 3], t: f64) -> [Complex64; 3] {
        let psi = self.value(x, t);
        self.k.map(|k| Complex64::new(0.0, k) * psi)
    }

    fn laplacian(&self, x: &[f64; 3], t: f64) -> Complex64 {
        let k2: f64 = self.k.iter().map(|k| k * k).sum();
        -k2 * self.value(x, t)
    }

    fn time_derivative(&self, x: &[f64; 3], t: f64) -> Complex64 {
        Complex64::new(0.0, -self.omega) * self.value(x, t)
    }

    fn peak_amplitude(&self) -> f64 {
        self.amplitude.norm()
    }
}

/// `exp(-|x|^2 / (4 sigma^2) - i E t)`; with `E = 3D/(2 sigma^2)` this is the
/// isotropic harmonic-oscillator ground state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianState {
    pub sigma: f64,
    pub energy: f64,
}

impl GaussianState {
    pub fn new(sigma: f64, energy: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be > 0, got {sigma}")));
        }
        Ok(GaussianState { sigma, energy })
    }

    pub fn harmonic_ground_state(sigma: f64, diffusion: f64) -> Result<Self> {
        Self::new(sigma, 1.5 * diffusion / (sigma * sigma))
    }

    /// Marginal density of one coordinate, `N(0, sigma^2)`.
    pub fn marginal_density(&self, x: f64) -> f64 {
        let s = self.sigma;
        (-x * x / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
    }
}

impl AnalyticWave for GaussianState {
    fn value(&self, x: &[f64; 3], t: f64) -> Complex64 {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        Complex64::from_polar((-r2 / (4.0 * self.sigma * self.sigma)).exp(), -self.energy * t)
    }

    fn gradient(&self, x: &[f64; 3], t: f64) -> [Complex64; 3] {
        let psi = self.value(x, t);
        let c = -1.0 / (2.0 * self.sigma * self.sigma);
        x.map(|xi| c * xi * psi)
    }

    fn laplacian(&self, x: &[f64; 3], t: f64) -> Complex64 {
        let s2 = self.sigma * self.sigma;
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        (r2 / (4.0 * s2 * s2) - 1.5 / s2) * self.value(x, t)
    }

    fn time_derivative(&self, x: &[f64; 3], t: f64) -> Complex64 {
        Complex64::new(0.0, -self.energy) * self.value(x, t)
    }

    fn peak_amplitude(&self) -> f64 {
        1.0
    }
}

/// Complex samples on a uniform spatial grid, one slice per time stamp.
/// Axes with a single node are treated as directions of no variation.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveGrid {
    pub dims: [usize; 3],
    pub spacing: f64,
    pub origin: [f64; 3],
    pub times: Vec<f64>,
    pub slices: Vec<Vec<Complex64>>,
}

impl WaveGrid {
    pub fn new(
        dims: [usize; 3],
        spacing: f64,
        origin: [f64; 3],
        times: Vec<f64>,
        slices: Vec<Vec<Complex64>>,
    ) -> Result<Self> {
        let grid = WaveGrid {
            dims,
            spacing,
            origin,
            times,
            slices,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Samples an analytic wave at every node and time.
    pub fn sample(
        wave: &dyn AnalyticWave,
        dims: [usize; 3],
        spacing: f64,
        origin: [f64; 3],
        times: Vec<f64>,
    ) -> Result<Self> {
        let n = dims.iter().product::<usize>();
        let slices = times
            .iter()
            .map(|&t| {
                (0..n)
                    .map(|lin| {
                        let x = node_position(dims, spacing, origin, lin);
                        wave.value(&x, t)
                    })
                    .collect()
            })
            .collect();
        Self::new(dims, spacing, origin, times, slices)
    }

    fn validate(&self) -> Result<()> {
        if self.dims.contains(&0) {
            return Err(Error::GridMismatch("grid dimensions must be >= 1".into()));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::GridMismatch(format!("grid spacing must be > 0, got {}", self.spacing)));
        }
        if self.times.is_empty() || self.times.len() != self.slices.len() {
            return Err(Error::GridMismatch(format!(
                "{} time stamps vs {} slices",
                self.times.len(),
                self.slices.len()
            )));
        }
        let n = self.node_count();
        if let Some(bad) = self.slices.iter().position(|s| s.len() != n) {
            return Err(Error::GridMismatch(format!("slice {bad} has {} values, expected {n}", self.slices[bad].len())));
        }
        if self.times.len() > 1 {
            let dt = self.times[1] - self.times[0];
            let uniform = dt > 0.0
                && self
                    .times
                    .windows(2)
                    .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt);
            if !uniform {
                return Err(Error::GridMismatch("time stamps must be uniform and increasing".into()));
            }
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn time_step(&self) -> Option<f64> {
        (self.times.len() > 1).then(|| self.times[1] - self.times[0])
    }

    pub fn max_abs(&self) -> f64 {
        self.slices
            .iter()
            .flatten()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn linear_index(&self, idx: [usize; 3]) -> usize {
        idx[0] + self.dims[0] * (idx[1] + self.dims[1] * idx[2])
    }

    pub fn position(&self, lin: usize) -> [f64; 3] {
        node_position(self.dims, self.spacing, self.origin, lin)
    }

    /// Node whose position matches `x` to within a small fraction of the spacing.
    pub fn node_of(&self, x: &[f64; 3]) -> Result<[usize; 3]> {
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let f = (x[a] - self.origin[a]) / self.spacing;
            let i = f.round();
            if (f - i).abs() > 1e-6 || i < 0.0 || i >= self.dims[a] as f64 {
                return Err(Error::GridMismatch(format!("point {x:?} is not a grid node")));
            }
            idx[a] = i as usize;
        }
        Ok(idx)
    }

    pub fn slice_of(&self, t: f64) -> Result<usize> {
        let tol = 1e-6 * self.time_step().unwrap_or(1.0);
        self.times
            .iter()
            .position(|&ts| (ts - t).abs() <= tol)
            .ok_or_else(|| Error::GridMismatch(format!("t = {t} is not a stored time")))
    }

    pub fn value(&self, idx: [usize; 3], slice: usize) -> Complex64 {
        self.slices[slice][self.linear_index(idx)]
    }

    /// Value, central-difference gradient and Laplacian at an interior node.
    pub fn spatial_jet(&self, idx: [usize; 3], slice: usize) -> Result<(Complex64, [Complex64; 3], Complex64)> {
        let psi = self.value(idx, slice);
        let h = self.spacing;
        let mut grad = [Complex64::new(0.0, 0.0); 3];
        let mut lap = Complex64::new(0.0, 0.0);
        for a in 0..3 {
            if self.dims[a] == 1 {
                continue;
            }
            if idx[a] == 0 {
                return Err(Error::Boundary {
                    side: "left",
                    index: self.linear_index(idx),
                });
            }
            if idx[a] + 1 >= self.dims[a] {
                return Err(Error::Boundary {
                    side: "right",
                    index: self.linear_index(idx),
                });
            }
            let mut lo = idx;
            lo[a] -= 1;
            let mut hi = idx;
            hi[a] += 1;
            let (vl, vh) = (self.value(lo, slice), self.value(hi, slice));
            grad[a] = (vh - vl) / (2.0 * h);
            lap += (vh - 2.0 * psi + vl) / (h * h);
        }
        Ok((psi, grad, lap))
    }

    /// Central difference in time, one-sided at the first and last slices.
    pub fn time_derivative(&self, idx: [usize; 3], slice: usize) -> Result<Complex64> {
        let n = self.times.len();
        if n < 2 {
            return Err(Error::InvalidParameter("a time derivative needs at least two slices".into()));
        }
        let (lo, hi) = if slice == 0 {
            (0, 1)
        } else if slice + 1 == n {
            (n - 2, n - 1)
        } else {
            (slice - 1, slice + 1)
        };
        Ok((self.value(idx, hi) - self.value(idx, lo)) / (self.times[hi] - self.times[lo]))
    }

    /// Text layout: `dims`, `spacing`, `origin` header lines, then for each
    /// slice a `time t` line followed by `index re im` rows.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "dims {} {} {}", self.dims[0], self.dims[1], self.dims[2])?;
        writeln!(w, "spacing {:e}", self.spacing)?;
        writeln!(w, "origin {:e} {:e} {:e}", self.origin[0], self.origin[1], self.origin[2])?;
        for (t, slice) in self.times.iter().zip(&self.slices) {
            writeln!(w, "time {t:e}")?;
            for (i, z) in slice.iter().enumerate() {
                writeln!(w, "{i} {:e} {:e}", z.re, z.im)?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::GridMismatch(format!("line {line}: {msg}"));
        let mut dims = None;
        let mut spacing = None;
        let mut origin = None;
        let mut times = Vec::new();
        let mut slices: Vec<Vec<Complex64>> = Vec::new();
        for (no, line) in r.lines().enumerate() {
            let no = no + 1;
            let line = line.map_err(|e| bad(no, &e.to_string()))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() || fields[0].starts_with('#') {
                continue;
            }
            let nums = |from: usize| -> Result<Vec<f64>> {
                fields[from..]
                    .iter()
                    .map(|f| f.parse::<f64>().map_err(|_| bad(no, &format!("bad number {f:?}"))))
                    .collect()
            };
            match fields[0] {
                "dims" => {
                    let v = nums(1)?;
                    if v.len() != 3 || v.iter().any(|d| *d < 1.0 || d.fract() != 0.0) {
                        return Err(bad(no, "dims needs three positive integers"));
                    }
                    dims = Some([v[0] as usize, v[1] as usize, v[2] as usize]);
                }
                "spacing" => {
                    let v = nums(1)?;
                    if v.len() != 1 {
                        return Err(bad(no, "spacing needs one value"));
                    }
                    spacing = Some(v[0]);
                }
                "origin" => {
                    let v = nums(1)?;
                    if v.len() != 3 {
                        return Err(bad(no, "origin needs three values"));
                    }
                    origin = Some([v[0], v[1], v[2]]);
                }
                "time" => {
                    let v = nums(1)?;
                    if v.len() != 1 {
                        return Err(bad(no, "time needs one value"));
                    }
                    times.push(v[0]);
                    slices.push(Vec::new());
                }
                _ => {
                    let slice = slices.last_mut().ok_or_else(|| bad(no, "data row before any time line"))?;
                    let index: usize = fields[0].parse().map_err(|_| bad(no, "bad index"))?;
                    if index != slice.len() {
                        return Err(bad(no, &format!("expected index {}, found {index}", slice.len())));
                    }
                    let v = nums(1)?;
                    if v.len() != 2 {
                        return Err(bad(no, "data rows are `index re im`"));
                    }
                    slice.push(Complex64::new(v[0], v[1]));
                }
            }
        }
        let dims = dims.ok_or_else(|| Error::GridMismatch("missing dims".into()))?;
        let spacing = spacing.ok_or_else(|| Error::GridMismatch("missing spacing".into()))?;
        let origin = origin.unwrap_or([0.0; 3]);
        Self::new(dims, spacing, origin, times, slices)
    }
}

fn node_position(dims: [usize; 3], spacing: f64, origin: [f64; 3], lin: usize) -> [f64; 3] {
    let i = lin % dims[0];
    let j = (lin / dims[0]) % dims[1];
    let k = lin / (dims[0] * dims[1]);
    [
        origin[0] + i as f64 * spacing,
        origin[1] + j as f64 * spacing,
        origin[2] + k as f64 * spacing,
    ]
}

/// Value and derivatives of `psi` at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaveJet {
    pub psi: Complex64,
    pub gradient: [Complex64; 3],
    pub laplacian: Complex64,
    pub time_derivative: Complex64,
}

impl WaveJet {
    /// `grad psi / psi`.
    pub fn log_gradient(&self) -> [Complex64; 3] {
        self.gradient.map(|g| g / self.psi)
    }

    /// `Laplacian(ln psi) = Laplacian(psi)/psi - (grad psi / psi)^2`.
    pub fn log_laplacian(&self) -> Complex64 {
        let lg = self.log_gradient();
        self.laplacian / self.psi - lg.iter().map(|g| g * g).sum::<Complex64>()
    }
}

#[derive(Clone, Debug)]
pub enum Wavefunction {
    Analytic { wave: Arc<dyn AnalyticWave>, floor: f64 },
    Grid { grid: WaveGrid, floor: f64 },
}

impl Wavefunction {
    pub fn analytic(wave: Arc<dyn AnalyticWave>) -> Self {
        let floor = DEFAULT_FLOOR_FRACTION * wave.peak_amplitude();
        Wavefunction::Analytic { wave, floor }
    }

    pub fn grid(grid: WaveGrid) -> Self {
        let floor = DEFAULT_FLOOR_FRACTION * grid.max_abs();
        Wavefunction::Grid { grid, floor }
    }

    pub fn with_floor(mut self, value: f64) -> Self {
        match &mut self {
            Wavefunction::Analytic { floor, .. } | Wavefunction::Grid { floor, .. } => *floor = value,
        }
        self
    }

    pub fn floor(&self) -> f64 {
        match self {
            Wavefunction::Analytic { floor, .. } | Wavefunction::Grid { floor, .. } => *floor,
        }
    }

    /// Probe steps used for derivatives of derived fields: the grid spacing
    /// and time step in grid mode, the supplied fallbacks otherwise.
    pub fn probe_steps(&self, h: f64, dt: f64) -> (f64, f64) {
        match self {
            Wavefunction::Analytic { .. } => (h, dt),
            Wavefunction::Grid { grid, .. } => (grid.spacing, grid.time_step().unwrap_or(dt)),
        }
    }

    pub fn value(&self, x: &[f64; 3], t: f64) -> Result<Complex64> {
        match self {
            Wavefunction::Analytic { wave, .. } => Ok(wave.value(x, t)),
            Wavefunction::Grid { grid, .. } => Ok(grid.value(grid.node_of(x)?, grid.slice_of(t)?)),
        }
    }

    /// Value and spatial gradient, with the floor enforced.
    pub fn gradient_jet(&self, x: &[f64; 3], t: f64) -> Result<(Complex64, [Complex64; 3])> {
        let (psi, grad) = match self {
            Wavefunction::Analytic { wave, .. } => (wave.value(x, t), wave.gradient(x, t)),
            Wavefunction::Grid { grid, .. } => {
                let (psi, grad, _) = grid.spatial_jet(grid.node_of(x)?, grid.slice_of(t)?)?;
                (psi, grad)
            }
        };
        self.check_floor(psi)?;
        Ok((psi, grad))
    }

    /// Full jet, with the floor enforced.
    pub fn jet(&self, x: &[f64; 3], t: f64) -> Result<WaveJet> {
        let jet = match self {
            Wavefunction::Analytic { wave, .. } => WaveJet {
                psi: wave.value(x, t),
                gradient: wave.gradient(x, t),
                laplacian: wave.laplacian(x, t),
                time_derivative: wave.time_derivative(x, t),
            },
            Wavefunction::Grid { grid, .. } => {
                let (idx, slice) = (grid.node_of(x)?, grid.slice_of(t)?);
                let (psi, gradient, laplacian) = grid.spatial_jet(idx, slice)?;
                WaveJet {
                    psi,
                    gradient,
                    laplacian,
                    time_derivative: grid.time_derivative(idx, slice)?,
                }
            }
        };
        self.check_floor(jet.psi)?;
        Ok(jet)
    }

    fn check_floor(&self, psi: Complex64) -> Result<()> {
        let value = psi.norm();
        if value < self.floor() || !value.is_finite() {
            return Err(Error::AmplitudeFloor {
                value,
                floor: self.floor(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn plane_wave_derivatives() {
        let w = PlaneWave::new([2.0, 0.0, 0.0], 2.0);
        let x = [0.3, 0.1, -0.2];
        let psi = w.value(&x, 0.7);
        assert!((psi.norm() - 1.0).abs() < 1e-15);
        let g = w.gradient(&x, 0.7);
        assert!((g[0] - c(0.0, 2.0) * psi).norm() < 1e-15);
        assert!((w.laplacian(&x, 0.7) + 4.0 * psi).norm() < 1e-15);
    }

    #[test]
    fn gaussian_laplacian_matches_differences() {
        let w = GaussianState::new(0.8, 1.0).unwrap();
        let x = [0.3, -0.4, 0.5];
        let h = 1e-4;
        let mut lap = c(0.0, 0.0);
        for a in 0..3 {
            let mut p = x;
            p[a] += h;
            let mut m = x;
            m[a] -= h;
            lap += (w.value(&p, 0.2) - 2.0 * w.value(&x, 0.2) + w.value(&m, 0.2)) / (h * h);
        }
        assert!((lap - w.laplacian(&x, 0.2)).norm() < 1e-6);
    }

    #[test]
    fn grid_round_trips_through_text() {
        let w = PlaneWave::new([1.0, 0.5, 0.0], 0.3);
        let grid = WaveGrid::sample(&w, [4, 3, 2], 0.25, [-0.5, 0.0, 1.0], vec![0.0, 0.1]).unwrap();
        let mut buf = Vec::new();
        grid.write_to(&mut buf).unwrap();
        let back = WaveGrid::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, grid);
    }

    #[test]
    fn malformed_grid_files_rejected() {
        let text = "dims 2 1 1\nspacing 0.5\ntime 0\n0 1 0\n";
        assert!(matches!(WaveGrid::read_from(text.as_bytes()), Err(Error::GridMismatch(_))));
        let text = "dims 2 1 1\nspacing 0.5\n0 1 0\n";
        assert!(WaveGrid::read_from(text.as_bytes()).is_err());
        let text = "dims 2 1 1\nspacing 0.5\ntime 0\n1 1 0\n";
        assert!(WaveGrid::read_from(text.as_bytes()).is_err());
    }

    #[test]
    fn nonuniform_times_rejected() {
        let w = PlaneWave::new([1.0, 0.0, 0.0], 0.0);
        assert!(WaveGrid::sample(&w, [3, 1, 1], 0.1, [0.0; 3], vec![0.0, 0.1, 0.3]).is_err());
    }

    #[test]
    fn grid_jet_approximates_analytic_jet() {
        let w = PlaneWave::new([1.0, 0.0, 0.0], 0.5);
        let h = 0.01;
        let grid = WaveGrid::sample(&w, [5, 1, 1], h, [0.0; 3], vec![0.0, 0.01, 0.02]).unwrap();
        let psi = Wavefunction::grid(grid);
        let x = [2.0 * h, 0.0, 0.0];
        let jet = psi.jet(&x, 0.01).unwrap();
        let exact = Wavefunction::analytic(Arc::new(w)).jet(&x, 0.01).unwrap();
        assert!((jet.gradient[0] - exact.gradient[0]).norm() < 1e-4);
        assert!((jet.laplacian - exact.laplacian).norm() < 1e-4);
        assert!((jet.time_derivative - exact.time_derivative).norm() < 1e-4);
        assert!(matches!(psi.jet(&[0.0; 3], 0.0), Err(Error::Boundary { .. })));
        assert!(matches!(psi.jet(&[0.015, 0.0, 0.0], 0.0), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn floor_blocks_nodes() {
        let w = Wavefunction::analytic(Arc::new(GaussianState::new(0.1, 0.0).unwrap()));
        assert!(matches!(w.jet(&[3.0, 0.0, 0.0], 0.0), Err(Error::AmplitudeFloor { .. })));
        assert!(w.jet(&[0.1, 0.0, 0.0], 0.0).is_ok());
    }
}
