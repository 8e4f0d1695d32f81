use num_complex::Complex64;

use super::wavefunction::Wavefunction;
use super::QuantumParams;
use crate::error::{Error, Result};

type C3 = [Complex64; 3];

/// Real 3-vector samples at a set of points.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorSamples {
    pub points: Vec<[f64; 3]>,
    pub values: Vec<[f64; 3]>,
}

impl VectorSamples {
    pub fn new(points: Vec<[f64; 3]>, values: Vec<[f64; 3]>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::GridMismatch(format!("{} points vs {} values", points.len(), values.len())));
        }
        Ok(VectorSamples { points, values })
    }
}

/// Complex velocity `V = classical - i * nondifferentiable`.
#[derive(Clone, Debug)]
pub enum ComplexVelocityField {
    Uniform(C3),
    Sampled { points: Vec<[f64; 3]>, values: Vec<C3> },
    FromWave { psi: Wavefunction, params: QuantumParams },
}

/// Combines the two parts the way the scale derivative expects: real part
/// `(v+ + v-)/2`, imaginary part `-(v+ - v-)/2`.
pub fn combine(classical: [f64; 3], nondifferentiable: [f64; 3]) -> C3 {
    [0, 1, 2].map(|a| Complex64::new(classical[a], -nondifferentiable[a]))
}

/// Builds `V` from forward and backward mean velocities sampled on the same points.
pub fn complex_velocity(v_plus: &VectorSamples, v_minus: &VectorSamples) -> Result<ComplexVelocityField> {
    if v_plus.points != v_minus.points {
        return Err(Error::GridMismatch("forward and backward velocities sampled on different points".into()));
    }
    let values = v_plus
        .values
        .iter()
        .zip(&v_minus.values)
        .map(|(p, m)| {
            let classical = [0, 1, 2].map(|a| 0.5 * (p[a] + m[a]));
            let nondiff = [0, 1, 2].map(|a| 0.5 * (p[a] - m[a]));
            combine(classical, nondiff)
        })
        .collect();
    Ok(ComplexVelocityField::Sampled {
        points: v_plus.points.clone(),
        values,
    })
}

impl ComplexVelocityField {
    pub fn at(&self, x: &[f64; 3], t: f64) -> Result<C3> {
        match self {
            ComplexVelocityField::Uniform(v) => Ok(*v),
            ComplexVelocityField::Sampled { points, values } => points
                .iter()
                .position(|p| p == x)
                .map(|i| values[i])
                .ok_or_else(|| Error::GridMismatch(format!("no velocity sample at {x:?}"))),
            ComplexVelocityField::FromWave { psi, params } => velocity_from_wavefunction(psi, params, x, t),
        }
    }

    /// `(v+ + v-)/2`.
    pub fn classical_part(&self, x: &[f64; 3], t: f64) -> Result<[f64; 3]> {
        Ok(self.at(x, t)?.map(|z| z.re))
    }

    /// `(v+ - v-)/2`.
    pub fn nondifferentiable_part(&self, x: &[f64; 3], t: f64) -> Result<[f64; 3]> {
        Ok(self.at(x, t)?.map(|z| -z.im))
    }

    /// Recovers `(v+, v-)` at `x`.
    pub fn forward_backward(&self, x: &[f64; 3], t: f64) -> Result<([f64; 3], [f64; 3])> {
        let c = self.classical_part(x, t)?;
        let n = self.nondifferentiable_part(x, t)?;
        Ok(([0, 1, 2].map(|a| c[a] + n[a]), [0, 1, 2].map(|a| c[a] - n[a])))
    }
}

/// `V = -2iD grad(psi)/psi`.
pub fn velocity_from_wavefunction(psi: &Wavefunction, params: &QuantumParams, x: &[f64; 3], t: f64) -> Result<C3> {
    let (value, grad) = psi.gradient_jet(x, t)?;
    let factor = Complex64::new(0.0, -2.0 * params.diffusion);
    Ok(grad.map(|g| factor * g / value))
}

/// Forward drift `b+ = 2D(grad S + grad R)` with `ln psi = R + iS`.
pub fn nelson_drift(psi: &Wavefunction, params: &QuantumParams, x: &[f64; 3], t: f64) -> Result<[f64; 3]> {
    let (value, grad) = psi.gradient_jet(x, t)?;
    Ok(grad.map(|g| {
        let lg = g / value;
        2.0 * params.diffusion * (lg.re + lg.im)
    }))
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum ScaleMode {
    /// `df/dt + V.grad f`.
    #[default]
    Standard,
    /// Adds `-iD Laplacian(f)`; for cross-checks only.
    WithDiffusion { diffusion: f64 },
}

/// Scale derivative of `f` along `V` at `(x, t)`, by central differences of
/// step `h` in space and time.
pub fn scale_derivative(
    f: &dyn Fn(&[f64; 3], f64) -> Result<Complex64>,
    velocity: &ComplexVelocityField,
    x: &[f64; 3],
    t: f64,
    h: f64,
    mode: ScaleMode,
) -> Result<Complex64> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("difference step must be > 0, got {h}")));
    }
    let v = velocity.at(x, t)?;
    let f0 = f(x, t)?;
    let mut total = (f(x, t + h)? - f(x, t - h)?) / (2.0 * h);
    let mut lap = Complex64::new(0.0, 0.0);
    for a in 0..3 {
        let mut p = *x;
        p[a] += h;
        let mut m = *x;
        m[a] -= h;
        let (fp, fm) = (f(&p, t)?, f(&m, t)?);
        total += v[a] * (fp - fm) / (2.0 * h);
        lap += (fp - 2.0 * f0 + fm) / (h * h);
    }
    if let ScaleMode::WithDiffusion { diffusion } = mode {
        total -= Complex64::new(0.0, diffusion) * lap;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::quantum::wavefunction::{GaussianState, PlaneWave};

    fn params(d: f64) -> QuantumParams {
        QuantumParams::with_diffusion(d).unwrap()
    }

    #[test]
    fn plane_wave_velocity_is_real() {
        let psi = Wavefunction::analytic(Arc::new(PlaneWave::new([2.0, 0.0, 0.0], 2.0)));
        let v = velocity_from_wavefunction(&psi, &params(0.5), &[0.3, 0.2, 0.1], 0.4).unwrap();
        assert!((v[0] - Complex64::new(2.0, 0.0)).norm() < 1e-14);
        assert!(v[1].norm() < 1e-14 && v[2].norm() < 1e-14);
    }

    #[test]
    fn gaussian_velocity_is_imaginary() {
        let sigma = 0.7;
        let d = 0.5;
        let psi = Wavefunction::analytic(Arc::new(GaussianState::new(sigma, 0.0).unwrap()));
        let x = [0.4, -0.2, 0.1];
        let v = velocity_from_wavefunction(&psi, &params(d), &x, 0.0).unwrap();
        for a in 0..3 {
            let expected = Complex64::new(0.0, d * x[a] / (sigma * sigma));
            assert!((v[a] - expected).norm() < 1e-14);
        }
    }

    #[test]
    fn velocity_respects_floor() {
        let psi = Wavefunction::analytic(Arc::new(GaussianState::new(0.1, 0.0).unwrap()));
        let r = velocity_from_wavefunction(&psi, &params(0.5), &[5.0, 0.0, 0.0], 0.0);
        assert!(matches!(r, Err(Error::AmplitudeFloor { .. })));
    }

    #[test]
    fn drift_examples() {
        let sigma = 1.3;
        let d = 0.5;
        let gs = Wavefunction::analytic(Arc::new(GaussianState::harmonic_ground_state(sigma, d).unwrap()));
        let x = [0.5, -1.0, 0.25];
        let b = nelson_drift(&gs, &params(d), &x, 2.0).unwrap();
        for a in 0..3 {
            assert!((b[a] + d * x[a] / (sigma * sigma)).abs() < 1e-14);
        }
        let pw = Wavefunction::analytic(Arc::new(PlaneWave::new([2.0, -1.0, 0.0], 0.0)));
        let b = nelson_drift(&pw, &params(d), &x, 0.0).unwrap();
        assert!((b[0] - 2.0).abs() < 1e-14 && (b[1] + 1.0).abs() < 1e-14 && b[2].abs() < 1e-14);
        let flat = Wavefunction::analytic(Arc::new(PlaneWave::new([0.0; 3], 0.0)));
        assert_eq!(nelson_drift(&flat, &params(d), &x, 0.0).unwrap(), [0.0; 3]);
    }

    #[test]
    fn decomposition_examples() {
        let pts = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]];
        let vp = VectorSamples::new(pts.clone(), vec![[1.0, 2.0, 3.0], [-1.0, 0.5, 0.0]]).unwrap();
        let field = complex_velocity(&vp, &vp).unwrap();
        let v = field.at(&pts[1], 0.0).unwrap();
        assert_eq!(v.map(|z| z.im), [0.0; 3]);
        assert_eq!(v.map(|z| z.re), [-1.0, 0.5, 0.0]);

        let neg: Vec<_> = vp.values.iter().map(|v| v.map(|c| -c)).collect();
        let vm = VectorSamples::new(pts.clone(), neg).unwrap();
        let field = complex_velocity(&vp, &vm).unwrap();
        assert_eq!(field.classical_part(&pts[0], 0.0).unwrap(), [0.0; 3]);
        let (p, m) = field.forward_backward(&pts[0], 0.0).unwrap();
        assert_eq!(p, vp.values[0]);
        assert_eq!(m, vm.values[0]);

        let other = VectorSamples::new(vec![[0.0; 3], [2.0, 0.0, 0.0]], vp.values.clone()).unwrap();
        assert!(matches!(complex_velocity(&vp, &other), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn scale_derivative_examples() {
        let zero = ComplexVelocityField::Uniform([Complex64::new(0.0, 0.0); 3]);
        let stat = |_: &[f64; 3], _: f64| Ok(Complex64::new(3.0, 1.0));
        assert_eq!(scale_derivative(&stat, &zero, &[0.1; 3], 0.0, 1e-3, ScaleMode::Standard).unwrap().norm(), 0.0);

        let c = Complex64::new(1.5, -0.25);
        let adv = ComplexVelocityField::Uniform([c, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)]);
        let lin = |x: &[f64; 3], _: f64| Ok(Complex64::new(x[0], 0.0));
        let r = scale_derivative(&lin, &adv, &[0.3, 0.0, 0.0], 0.0, 1e-3, ScaleMode::Standard).unwrap();
        assert!((r - c).norm() < 1e-12);

        let p = params(0.5);
        let psi = Wavefunction::analytic(Arc::new(PlaneWave::new([2.0, 0.0, 0.0], 2.0)));
        let field = ComplexVelocityField::FromWave { psi: psi.clone(), params: p };
        for a in 0..3 {
            let comp = |x: &[f64; 3], t: f64| Ok(velocity_from_wavefunction(&psi, &p, x, t)?[a]);
            let r = scale_derivative(&comp, &field, &[0.2, 0.1, 0.0], 0.5, 1e-3, ScaleMode::Standard).unwrap();
            assert!(r.norm() < 1e-9, "component {a}: {r}");
        }
    }

    #[test]
    fn extended_mode_adds_diffusion_term() {
        let zero = ComplexVelocityField::Uniform([Complex64::new(0.0, 0.0); 3]);
        let quad = |x: &[f64; 3], _: f64| Ok(Complex64::new(x[0] * x[0], 0.0));
        let r = scale_derivative(&quad, &zero, &[0.0; 3], 0.0, 1e-3, ScaleMode::WithDiffusion { diffusion: 0.5 })
            .unwrap();
        assert!((r - Complex64::new(0.0, -1.0)).norm() < 1e-9);
    }
}
