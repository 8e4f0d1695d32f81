//! Classical fixed-step fourth-order Runge-Kutta over flat state arrays.

use crate::error::Result;

/// One explicit RK4 step of size `h` for `dy/ds = f(s, y)`.
pub fn rk4_step<const N: usize, F>(f: &mut F, s: f64, y: &[f64; N], h: f64) -> Result<[f64; N]>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let k1 = f(s, y)?;
    let k2 = f(s + 0.5 * h, &axpy(y, 0.5 * h, &k1))?;
    let k3 = f(s + 0.5 * h, &axpy(y, 0.5 * h, &k2))?;
    let k4 = f(s + h, &axpy(y, h, &k3))?;
    let mut out = *y;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

fn axpy<const N: usize>(y: &[f64; N], a: f64, k: &[f64; N]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        out[i] += a * k[i];
    }
    out
}

/// Uniform grid from `s0` to `s_end` with spacing no larger than `step`.
/// Returns the number of steps and the actual spacing.
pub fn uniform_steps(s0: f64, s_end: f64, step: f64) -> (usize, f64) {
    let span = s_end - s0;
    let n = ((span / step) - 1e-9).ceil().max(1.0) as usize;
    (n, span / n as f64)
}
