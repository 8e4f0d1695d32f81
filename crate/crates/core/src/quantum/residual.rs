use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use super::velocity::velocity_from_wavefunction;
use super::wavefunction::Wavefunction;
use super::QuantumParams;
use crate::error::{Error, Result};

/// Points at a common time where residuals are evaluated. `spacing` and `dt`
/// are the probe steps for analytic waves; grid waves use their own.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualRegion {
    pub points: Vec<[f64; 3]>,
    pub t: f64,
    pub spacing: f64,
    pub dt: f64,
}

impl ResidualRegion {
    pub fn new(points: Vec<[f64; 3]>, t: f64, spacing: f64, dt: f64) -> Result<Self> {
        if !(spacing > 0.0 && dt > 0.0) {
            return Err(Error::InvalidParameter("probe steps must be > 0".into()));
        }
        Ok(ResidualRegion { points, t, spacing, dt })
    }

    /// Uniform lattice of `dims` nodes starting at `origin`, ordered with the
    /// first axis fastest.
    pub fn lattice(origin: [f64; 3], step: f64, dims: [usize; 3], t: f64, spacing: f64, dt: f64) -> Result<Self> {
        let mut points = Vec::with_capacity(dims.iter().product());
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    points.push([
                        origin[0] + i as f64 * step,
                        origin[1] + j as f64 * step,
                        origin[2] + k as f64 * step,
                    ]);
                }
            }
        }
        Self::new(points, t, spacing, dt)
    }
}

/// `dV/dt + (V.grad)V` with `V` from the wavefunction, per point.
pub fn fractal_geodesic_residual(
    psi: &Wavefunction,
    params: &QuantumParams,
    region: &ResidualRegion,
) -> Result<Vec<[Complex64; 3]>> {
    let (h, dt) = psi.probe_steps(region.spacing, region.dt);
    let t = region.t;
    let vel = |x: &[f64; 3], t: f64| velocity_from_wavefunction(psi, params, x, t);
    region
        .points
        .par_iter()
        .map(|x| {
            let v0 = vel(x, t)?;
            let (vp, vm) = (vel(x, t + dt)?, vel(x, t - dt)?);
            let mut r: [Complex64; 3] = [0, 1, 2].map(|i| (vp[i] - vm[i]) / (2.0 * dt));
            for j in 0..3 {
                if is_flat_axis(psi, j) {
                    continue;
                }
                let mut p = *x;
                p[j] += h;
                let mut m = *x;
                m[j] -= h;
                let (fp, fm) = (vel(&p, t)?, vel(&m, t)?);
                for i in 0..3 {
                    r[i] += v0[j] * (fp[i] - fm[i]) / (2.0 * h);
                }
            }
            Ok(r)
        })
        .collect()
}

fn is_flat_axis(psi: &Wavefunction, axis: usize) -> bool {
    matches!(psi, Wavefunction::Grid { grid, .. } if grid.dims[axis] == 1)
}

/// `D^2 Laplacian(psi) + iD dpsi/dt - U psi` with `U = D^2 Laplacian(ln psi)`, per point.
pub fn schrodinger_residual(
    psi: &Wavefunction,
    params: &QuantumParams,
    region: &ResidualRegion,
) -> Result<Vec<Complex64>> {
    let d = params.diffusion;
    region
        .points
        .par_iter()
        .map(|x| {
            let jet = psi.jet(x, region.t)?;
            let potential = d * d * jet.log_laplacian();
            Ok(d * d * jet.laplacian + Complex64::new(0.0, d) * jet.time_derivative - potential * jet.psi)
        })
        .collect()
}

/// Writes per-node residual rows in the wave-grid layout: `dims`, `spacing`,
/// `origin`, `time`, then `index re im [re im ...]`.
pub fn write_lattice_residual(
    mut w: impl Write,
    dims: [usize; 3],
    spacing: f64,
    origin: [f64; 3],
    t: f64,
    rows: &[Vec<Complex64>],
) -> std::io::Result<()> {
    writeln!(w, "dims {} {} {}", dims[0], dims[1], dims[2])?;
    writeln!(w, "spacing {spacing:e}")?;
    writeln!(w, "origin {:e} {:e} {:e}", origin[0], origin[1], origin[2])?;
    writeln!(w, "time {t:e}")?;
    for (i, row) in rows.iter().enumerate() {
        write!(w, "{i}")?;
        for z in row {
            write!(w, " {:e} {:e}", z.re, z.im)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::quantum::wavefunction::{AnalyticWave, GaussianState, PlaneWave, WaveGrid};

    fn params() -> QuantumParams {
        QuantumParams::with_diffusion(0.5).unwrap()
    }

    fn plane(omega: f64) -> Wavefunction {
        Wavefunction::analytic(Arc::new(PlaneWave::new([2.0, 0.0, 0.0], omega)))
    }

    fn region() -> ResidualRegion {
        ResidualRegion::lattice([-0.5, -0.5, 0.0], 0.25, [5, 5, 1], 0.3, 1e-3, 1e-3).unwrap()
    }

    #[test]
    fn plane_wave_schrodinger_residual() {
        let r = schrodinger_residual(&plane(2.0), &params(), &region()).unwrap();
        assert!(r.iter().all(|z| z.norm() < 1e-8));
        let r = schrodinger_residual(&plane(1.0), &params(), &region()).unwrap();
        assert!(r.iter().all(|z| (z.norm() - 0.5).abs() < 1e-12));
    }

    #[test]
    fn dispersion_scan() {
        let p = params();
        let reg = ResidualRegion::new(vec![[0.1, 0.2, 0.3]], 0.7, 1e-3, 1e-3).unwrap();
        for k in [0.5, 1.0, 2.0, 3.0] {
            for omega in [0.0, 0.125, 0.5, 1.0, 2.0, 4.5] {
                let psi = Wavefunction::analytic(Arc::new(PlaneWave::new([k, 0.0, 0.0], omega)));
                let r = schrodinger_residual(&psi, &p, &reg).unwrap()[0].norm();
                let expected = (p.diffusion * omega - p.diffusion * p.diffusion * k * k).abs();
                assert!((r - expected).abs() < 1e-12, "k={k} omega={omega}: {r} vs {expected}");
                if omega == p.diffusion * k * k {
                    assert!(r < 1e-12);
                } else {
                    assert!(r > 1e-3);
                }
            }
        }
    }

    #[test]
    fn fractal_geodesic_residual_vanishes_for_any_plane_wave() {
        for omega in [2.0, 1.0] {
            let r = fractal_geodesic_residual(&plane(omega), &params(), &region()).unwrap();
            assert!(r.iter().flatten().all(|z| z.norm() < 1e-9));
        }
    }

    #[test]
    fn gaussian_fractal_residual_converges_at_second_order() {
        // V = iDx/sigma^2 is linear, so (V.grad)V = -(D/sigma^2)^2 x exactly.
        let psi = Wavefunction::analytic(Arc::new(GaussianState::new(1.0, 0.0).unwrap()));
        let x = [0.3, -0.2, 0.4];
        let err = |h: f64| {
            let reg = ResidualRegion::new(vec![x], 0.0, h, h).unwrap();
            let r = fractal_geodesic_residual(&psi, &params(), &reg).unwrap()[0];
            (0..3).map(|i| (r[i] + Complex64::new(0.25 * x[i], 0.0)).norm()).fold(0.0, f64::max)
        };
        assert!(err(1e-2) < 1e-9);
    }

    #[test]
    fn grid_schrodinger_residual_converges_at_second_order() {
        let wave = PlaneWave::new([2.0, 0.0, 0.0], 1.0);
        let analytic = -0.5 * wave.value(&[0.5, 0.0, 0.0], 0.2);
        let err = |h: f64| {
            let n = (1.0 / h).round() as usize + 1;
            let steps = (0.4 / h).round() as usize;
            let times = (0..=steps).map(|i| i as f64 * h).collect();
            let grid = WaveGrid::sample(&wave, [n, 1, 1], h, [0.0; 3], times).unwrap();
            let psi = Wavefunction::grid(grid);
            let reg = ResidualRegion::new(vec![[0.5, 0.0, 0.0]], 0.2, h, h).unwrap();
            (schrodinger_residual(&psi, &params(), &reg).unwrap()[0] - analytic).norm()
        };
        let (e1, e2) = (err(0.05), err(0.025));
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn floor_reported() {
        let psi = Wavefunction::analytic(Arc::new(GaussianState::new(0.05, 0.0).unwrap()));
        let reg = ResidualRegion::new(vec![[2.0, 0.0, 0.0]], 0.0, 1e-3, 1e-3).unwrap();
        assert!(matches!(
            schrodinger_residual(&psi, &params(), &reg),
            Err(Error::AmplitudeFloor { .. })
        ));
    }

    #[test]
    fn residual_layout() {
        let mut buf = Vec::new();
        let rows = vec![vec![Complex64::new(1.0, -2.0)], vec![Complex64::new(0.0, 0.5)]];
        write_lattice_residual(&mut buf, [2, 1, 1], 0.5, [0.0; 3], 1.0, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("dims 2 1 1\nspacing 5e-1\n"));
        assert!(text.ends_with("0 1e0 -2e0\n1 0e0 5e-1\n"));
    }
}
