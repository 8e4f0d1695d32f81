use nalgebra::{Matrix4, Vector4};

use super::metric::{inverse_metric, metric_components, ChartPoint, Metric};
use crate::error::{Error, Result};

/// Connection coefficients `G^a_{mn}`, stored as `[a][m][n]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Connection(pub [[[f64; 4]; 4]; 4]);

impl Connection {
    pub fn zero() -> Self {
        Connection([[[0.0; 4]; 4]; 4])
    }

    #[inline]
    pub fn get(&self, a: usize, m: usize, n: usize) -> f64 {
        self.0[a][m][n]
    }

    /// Set `G^a_{mn}` and its lower-index mirror.
    pub fn set_sym(&mut self, a: usize, m: usize, n: usize, value: f64) {
        self.0[a][m][n] = value;
        self.0[a][n][m] = value;
    }

    /// `G^a_{mn} u^m v^n`.
    pub fn contract(&self, u: &Vector4<f64>, v: &Vector4<f64>) -> Vector4<f64> {
        let mut out = Vector4::zeros();
        for a in 0..4 {
            let mut acc = 0.0;
            for m in 0..4 {
                let mut row = 0.0;
                for n in 0..4 {
                    row += self.0[a][m][n] * v[n];
                }
                acc += u[m] * row;
            }
            out[a] = acc;
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().flatten().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Largest `|G^a_{mn} - G^a_{nm}|`.
    pub fn lower_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for a in 0..4 {
            for m in 0..4 {
                for n in 0..4 {
                    worst = worst.max((self.0[a][m][n] - self.0[a][n][m]).abs());
                }
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &Connection) -> f64 {
        let mut worst = 0.0_f64;
        for a in 0..4 {
            for m in 0..4 {
                for n in 0..4 {
                    worst = worst.max((self.0[a][m][n] - other.0[a][m][n]).abs());
                }
            }
        }
        worst
    }

    fn is_finite(&self) -> bool {
        self.0.iter().flatten().flatten().all(|v| v.is_finite())
    }
}

/// Partial derivatives `d_l G^a_{mn}`, stored as `[l][a][m][n]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConnectionDerivative(pub [[[[f64; 4]; 4]; 4]; 4]);

impl ConnectionDerivative {
    pub fn zero() -> Self {
        ConnectionDerivative([[[[0.0; 4]; 4]; 4]; 4])
    }

    pub fn set_sym(&mut self, l: usize, a: usize, m: usize, n: usize, value: f64) {
        self.0[l][a][m][n] = value;
        self.0[l][a][n][m] = value;
    }

    /// `d_l G^a_{mn} w^l u^m v^n`.
    pub fn contract(&self, w: &Vector4<f64>, u: &Vector4<f64>, v: &Vector4<f64>) -> Vector4<f64> {
        let mut out = Vector4::zeros();
        for l in 0..4 {
            if w[l] == 0.0 {
                continue;
            }
            for a in 0..4 {
                let mut acc = 0.0;
                for m in 0..4 {
                    for n in 0..4 {
                        acc += self.0[l][a][m][n] * u[m] * v[n];
                    }
                }
                out[a] += w[l] * acc;
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &ConnectionDerivative) -> f64 {
        let a = self.0.iter().flatten().flatten().flatten();
        let b = other.0.iter().flatten().flatten().flatten();
        a.zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
    }

    fn is_finite(&self) -> bool {
        self.0.iter().flatten().flatten().flatten().all(|v| v.is_finite())
    }
}

/// Riemann tensor `R^a_{bcd}`, stored as `[a][b][c][d]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvatureTensor(pub [[[[f64; 4]; 4]; 4]; 4]);

impl CurvatureTensor {
    pub fn zero() -> Self {
        CurvatureTensor([[[[0.0; 4]; 4]; 4]; 4])
    }

    /// Builds `R^a_{bcd}` from the connection and its derivatives.
    pub fn from_connection(gamma: &Connection, dgamma: &ConnectionDerivative) -> Self {
        let g = &gamma.0;
        let dg = &dgamma.0;
        let mut r = CurvatureTensor::zero();
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in (c + 1)..4 {
                        let mut v = dg[c][a][b][d] - dg[d][a][b][c];
                        for e in 0..4 {
                            v += g[a][c][e] * g[e][b][d] - g[a][d][e] * g[e][b][c];
                        }
                        r.0[a][b][c][d] = v;
                        r.0[a][b][d][c] = -v;
                    }
                }
            }
        }
        r
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        self.0[a][b][c][d]
    }

    /// `R^a_{bcd} u^b v^c w^d`.
    pub fn contract(&self, u: &Vector4<f64>, v: &Vector4<f64>, w: &Vector4<f64>) -> Vector4<f64> {
        let mut out = Vector4::zeros();
        for a in 0..4 {
            let mut acc = 0.0;
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        acc += self.0[a][b][c][d] * u[b] * v[c] * w[d];
                    }
                }
            }
            out[a] = acc;
        }
        out
    }

    /// `R^a_{b s r} S^{s r} u^b` for a rank-2 tensor `S`.
    pub fn contract_bivector(&self, s: &Matrix4<f64>, u: &Vector4<f64>) -> Vector4<f64> {
        let mut out = Vector4::zeros();
        for a in 0..4 {
            let mut acc = 0.0;
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        acc += self.0[a][b][c][d] * s[(c, d)] * u[b];
                    }
                }
            }
            out[a] = acc;
        }
        out
    }

    pub fn add(&self, other: &CurvatureTensor) -> CurvatureTensor {
        let mut r = *self;
        for (x, y) in r.0.iter_mut().flatten().flatten().flatten().zip(other.0.iter().flatten().flatten().flatten()) {
            *x += y;
        }
        r
    }

    /// Ricci tensor `R_{bd} = R^a_{bad}`.
    pub fn ricci(&self) -> Matrix4<f64> {
        Matrix4::from_fn(|b, d| (0..4).map(|a| self.0[a][b][a][d]).sum())
    }

    pub fn ricci_scalar(&self, g_inv: &Matrix4<f64>) -> f64 {
        let ric = self.ricci();
        let mut s = 0.0;
        for b in 0..4 {
            for d in 0..4 {
                s += g_inv[(b, d)] * ric[(b, d)];
            }
        }
        s
    }

    /// `R_{abcd} R^{abcd}`.
    pub fn kretschmann(&self, g: &Matrix4<f64>, g_inv: &Matrix4<f64>) -> f64 {
        // all-lower: R_{abcd} = g_{ae} R^e_{bcd}
        let mut lower = [[[[0.0; 4]; 4]; 4]; 4];
        // all-upper: R^{abcd} = R^a_{efh} g^{eb} g^{fc} g^{hd}
        let mut upper = [[[[0.0; 4]; 4]; 4]; 4];
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        lower[a][b][c][d] = (0..4).map(|e| g[(a, e)] * self.0[e][b][c][d]).sum();
                    }
                }
            }
        }
        // Raise one index at a time.
        let mut t1 = [[[[0.0; 4]; 4]; 4]; 4];
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        t1[a][b][c][d] = (0..4).map(|h| self.0[a][b][c][h] * g_inv[(h, d)]).sum();
                    }
                }
            }
        }
        let mut t2 = [[[[0.0; 4]; 4]; 4]; 4];
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        t2[a][b][c][d] = (0..4).map(|f| t1[a][b][f][d] * g_inv[(f, c)]).sum();
                    }
                }
            }
        }
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        upper[a][b][c][d] = (0..4).map(|e| t2[a][e][c][d] * g_inv[(e, b)]).sum();
                    }
                }
            }
        }
        let mut k = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        k += lower[a][b][c][d] * upper[a][b][c][d];
                    }
                }
            }
        }
        k
    }

    /// Largest `|R^a_{bcd} + R^a_{bdc}|`.
    pub fn antisymmetry_violation(&self) -> f64 {
        let mut worst = 0.0_f64;
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        worst = worst.max((self.0[a][b][c][d] + self.0[a][b][d][c]).abs());
                    }
                }
            }
        }
        worst
    }

    /// Largest `|R^a_{bcd} + R^a_{cdb} + R^a_{dbc}|`.
    pub fn bianchi_violation(&self) -> f64 {
        let mut worst = 0.0_f64;
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        let s = self.0[a][b][c][d] + self.0[a][c][d][b] + self.0[a][d][b][c];
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().flatten().flatten().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &CurvatureTensor) -> f64 {
        let a = self.0.iter().flatten().flatten().flatten();
        let b = other.0.iter().flatten().flatten().flatten();
        a.zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
    }

    fn is_finite(&self) -> bool {
        self.0.iter().flatten().flatten().flatten().all(|v| v.is_finite())
    }
}

/// Christoffel symbols from central differences of the metric with step `h`.
pub fn christoffel_numeric(metric: &dyn Metric, x: &ChartPoint, h: f64) -> Result<Connection> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("difference step must be > 0, got {h}")));
    }
    let g_inv = inverse_metric(metric, x)?;
    // dg[l] = d_l g_{mn}
    let mut dg = [Matrix4::<f64>::zeros(); 4];
    for (l, slot) in dg.iter_mut().enumerate() {
        let gp = metric_components(metric, &x.shifted(l, h))?;
        let gm = metric_components(metric, &x.shifted(l, -h))?;
        *slot = (gp - gm) / (2.0 * h);
    }
    let mut gamma = Connection::zero();
    for a in 0..4 {
        for m in 0..4 {
            for n in m..4 {
                let mut v = 0.0;
                for b in 0..4 {
                    let bracket = dg[m][(b, n)] + dg[n][(b, m)] - dg[b][(m, n)];
                    v += g_inv[(a, b)] * bracket;
                }
                gamma.set_sym(a, m, n, 0.5 * v);
            }
        }
    }
    if !gamma.is_finite() {
        return Err(Error::NonFiniteResult("christoffel"));
    }
    Ok(gamma)
}

/// Christoffel symbols: the exact evaluator when the metric registers one,
/// otherwise central differences with step `h`.
pub fn christoffel(metric: &dyn Metric, x: &ChartPoint, h: f64) -> Result<Connection> {
    metric_components(metric, x)?;
    match metric.exact_christoffel(x) {
        Some(gamma) if gamma.is_finite() => Ok(gamma),
        Some(_) => Err(Error::NonFiniteResult("christoffel")),
        None => christoffel_numeric(metric, x, h),
    }
}

/// `d_l G^a_{mn}` by central differences of [`christoffel`] with step `h`.
pub fn christoffel_derivative_numeric(
    metric: &dyn Metric,
    x: &ChartPoint,
    h: f64,
) -> Result<ConnectionDerivative> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("difference step must be > 0, got {h}")));
    }
    let inner = metric.default_step();
    let mut d = ConnectionDerivative::zero();
    for l in 0..4 {
        let gp = christoffel(metric, &x.shifted(l, h), inner)?;
        let gm = christoffel(metric, &x.shifted(l, -h), inner)?;
        for a in 0..4 {
            for m in 0..4 {
                for n in 0..4 {
                    d.0[l][a][m][n] = (gp.0[a][m][n] - gm.0[a][m][n]) / (2.0 * h);
                }
            }
        }
    }
    if !d.is_finite() {
        return Err(Error::NonFiniteResult("connection derivative"));
    }
    Ok(d)
}

/// Connection, its derivatives and the curvature at one point.
#[derive(Clone, Copy, Debug)]
pub struct LocalGeometry {
    pub gamma: Connection,
    pub dgamma: ConnectionDerivative,
    pub riemann: CurvatureTensor,
}

impl LocalGeometry {
    /// Uses exact evaluators where registered; `h` is the step for
    /// differentiating the connection otherwise.
    pub fn at(metric: &dyn Metric, x: &ChartPoint, h: f64) -> Result<Self> {
        let gamma = christoffel(metric, x, metric.default_step())?;
        let dgamma = match metric.exact_christoffel_derivative(x) {
            Some(d) if d.is_finite() => d,
            Some(_) => return Err(Error::NonFiniteResult("connection derivative")),
            None => christoffel_derivative_numeric(metric, x, h)?,
        };
        Ok(Self::assemble(gamma, dgamma))
    }

    /// Forces finite differences of the connection with step `h`.
    pub fn numeric(metric: &dyn Metric, x: &ChartPoint, h: f64) -> Result<Self> {
        let gamma = christoffel(metric, x, metric.default_step())?;
        let dgamma = christoffel_derivative_numeric(metric, x, h)?;
        Ok(Self::assemble(gamma, dgamma))
    }

    fn assemble(gamma: Connection, dgamma: ConnectionDerivative) -> Self {
        let riemann = CurvatureTensor::from_connection(&gamma, &dgamma);
        LocalGeometry { gamma, dgamma, riemann }
    }
}

/// Riemann tensor at `x`; `h` is the connection-differencing step used when
/// no exact connection derivative is registered.
pub fn riemann(metric: &dyn Metric, x: &ChartPoint, h: f64) -> Result<CurvatureTensor> {
    let local = LocalGeometry::at(metric, x, h)?;
    if !local.riemann.is_finite() {
        return Err(Error::NonFiniteResult("riemann"));
    }
    Ok(local.riemann)
}

/// Ricci scalar at `x` with the metric's default curvature step.
pub fn ricci_scalar(metric: &dyn Metric, x: &ChartPoint) -> Result<f64> {
    let r = riemann(metric, x, metric.curvature_step())?;
    Ok(r.ricci_scalar(&inverse_metric(metric, x)?))
}

pub fn kretschmann(metric: &dyn Metric, x: &ChartPoint, h: f64) -> Result<f64> {
    let r = riemann(metric, x, h)?;
    let g = metric_components(metric, x)?;
    Ok(r.kretschmann(&g, &inverse_metric(metric, x)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::metric::{Minkowski, Schwarzschild, WeakField};

    #[test]
    fn minkowski_connection_and_curvature_vanish() {
        let x = ChartPoint::new(1.0, 2.0, -3.0, 0.5);
        assert_eq!(christoffel_numeric(&Minkowski, &x, 1e-3).unwrap().max_abs(), 0.0);
        assert_eq!(riemann(&Minkowski, &x, 1e-3).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn schwarzschild_gamma_r_tt() {
        let m = Schwarzschild::new(1.0).unwrap();
        let x = ChartPoint::new(0.0, 4.0, 1.0, 0.0);
        let exact = christoffel(&m, &x, 1e-5).unwrap();
        assert!((exact.get(1, 0, 0) - 0.03125).abs() < 1e-15);
        let fd = christoffel_numeric(&m, &x, 1e-5).unwrap();
        assert!((fd.get(1, 0, 0) - 0.03125).abs() < 1e-9);
    }

    #[test]
    fn exact_connection_matches_differences_at_r6() {
        let m = Schwarzschild::new(1.0).unwrap();
        let x = ChartPoint::new(0.0, 6.0, 0.9, 1.0);
        let exact = m.exact_christoffel(&x).unwrap();
        let fd = christoffel_numeric(&m, &x, 1e-5).unwrap();
        assert!(exact.max_abs_diff(&fd) < 1e-6);
        let dexact = m.exact_christoffel_derivative(&x).unwrap();
        let dfd = christoffel_derivative_numeric(&m, &x, 1e-4).unwrap();
        assert!(dexact.max_abs_diff(&dfd) < 1e-7, "{}", dexact.max_abs_diff(&dfd));
    }

    #[test]
    fn schwarzschild_kretschmann_and_ricci() {
        let m = Schwarzschild::new(1.0).unwrap();
        let x = ChartPoint::new(0.0, 2.5, 1.1, 0.0);
        let k = kretschmann(&m, &x, 1e-3).unwrap();
        let expected = 48.0 / 2.5_f64.powi(6);
        assert!(((k - expected) / expected).abs() < 1e-10);
        let r = riemann(&m, &x, 1e-3).unwrap();
        let numeric = LocalGeometry::numeric(&m, &x, 1e-4).unwrap().riemann;
        assert!(r.max_abs_diff(&numeric) < 1e-6);
        assert!(ricci_scalar(&m, &x).unwrap().abs() < 1e-12);
    }

    #[test]
    fn weak_field_curvature_satisfies_identities() {
        let m = WeakField::new(0.2).unwrap();
        let x = ChartPoint::new(0.0, 0.7, -0.4, 1.3);
        let r = riemann(&m, &x, m.curvature_step()).unwrap();
        assert_eq!(r.antisymmetry_violation(), 0.0);
        assert!(r.bianchi_violation() < 1e-6);
        assert!(r.max_abs() > 1e-3);
    }
}
