use crate::error::{Error, Result};
use crate::stats::{fit_log_log, LogLogFit};

/// Values sampled on an `s` grid, `dim` components per sample, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Track {
    pub s: Vec<f64>,
    pub dim: usize,
    data: Vec<f64>,
}

impl Track {
    pub fn new(s: Vec<f64>, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != s.len() * dim {
            return Err(Error::GridMismatch(format!(
                "{} values for {} samples of dimension {dim}",
                data.len(),
                s.len()
            )));
        }
        Ok(Track { s, dim, data })
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn last_row(&self) -> &[f64] {
        self.row(self.len() - 1)
    }
}

/// Log-log fit of batch RMS error against batch size.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceFit {
    pub sizes: Vec<usize>,
    pub errors: Vec<f64>,
    pub fit: LogLogFit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleResult {
    pub n: usize,
    pub s: Vec<f64>,
    pub dim: usize,
    /// Pointwise mean, one row per sample.
    pub mean: Vec<Vec<f64>>,
    /// Per-sample RMS distance of members from the mean.
    pub rms_spread: Vec<f64>,
    /// Per-sample, per-component standard deviation.
    pub component_sd: Vec<Vec<f64>>,
    pub convergence: Option<ConvergenceFit>,
}

/// Pointwise mean and spread over `tracks`, plus a convergence fit of the
/// endpoint against `reference` when given.
///
/// Reductions run in member order, so results do not depend on how the
/// tracks were produced.
pub fn ensemble_statistics(tracks: &[Track], reference: Option<&Track>) -> Result<EnsembleResult> {
    let n = tracks.len();
    if n < 2 {
        return Err(Error::InvalidParameter(format!("ensemble statistics need >= 2 members, got {n}")));
    }
    let first = &tracks[0];
    for (i, t) in tracks.iter().enumerate() {
        if t.s != first.s || t.dim != first.dim {
            return Err(Error::GridMismatch(format!("member {i} has a different grid")));
        }
    }
    let (len, dim) = (first.len(), first.dim);
    let mut mean = vec![vec![0.0; dim]; len];
    for t in tracks {
        for (k, row) in mean.iter_mut().enumerate() {
            for (m, v) in row.iter_mut().zip(t.row(k)) {
                *m += v;
            }
        }
    }
    for row in &mut mean {
        for m in row.iter_mut() {
            *m /= n as f64;
        }
    }
    let mut var = vec![vec![0.0; dim]; len];
    for t in tracks {
        for k in 0..len {
            for (c, v) in t.row(k).iter().enumerate() {
                let d = v - mean[k][c];
                var[k][c] += d * d;
            }
        }
    }
    let component_sd: Vec<Vec<f64>> = var
        .iter()
        .map(|row| row.iter().map(|v| (v / n as f64).sqrt()).collect())
        .collect();
    let rms_spread = var.iter().map(|row| (row.iter().sum::<f64>() / n as f64).sqrt()).collect();

    let convergence = match reference {
        None => None,
        Some(r) => {
            if r.s != first.s || r.dim != dim {
                return Err(Error::GridMismatch("reference grid differs from ensemble grid".into()));
            }
            let sizes: Vec<usize> = (1..)
                .map(|k| 10usize.pow(k))
                .take_while(|&size| size * 5 <= n)
                .collect();
            if sizes.len() >= 2 {
                let endpoints: Vec<Vec<f64>> = tracks.iter().map(|t| t.last_row().to_vec()).collect();
                Some(convergence_study(&endpoints, r.last_row(), &sizes)?)
            } else {
                None
            }
        }
    };

    Ok(EnsembleResult {
        n,
        s: first.s.clone(),
        dim,
        mean,
        rms_spread,
        component_sd,
        convergence,
    })
}

/// RMS over disjoint batches of `size` members of `|batch mean - reference|`.
pub fn batch_rms_error(endpoints: &[Vec<f64>], reference: &[f64], size: usize) -> Result<f64> {
    if size == 0 || endpoints.len() < size {
        return Err(Error::InvalidParameter(format!(
            "batch size {size} needs at least that many members, have {}",
            endpoints.len()
        )));
    }
    let groups = endpoints.len() / size;
    let mut acc = 0.0;
    for g in 0..groups {
        let batch = &endpoints[g * size..(g + 1) * size];
        let mut sq = 0.0;
        for (c, r) in reference.iter().enumerate() {
            let m = batch.iter().map(|e| e[c]).sum::<f64>() / size as f64;
            sq += (m - r) * (m - r);
        }
        acc += sq;
    }
    Ok((acc / groups as f64).sqrt())
}

/// Batch RMS error at each size and its log-log fit.
pub fn convergence_study(endpoints: &[Vec<f64>], reference: &[f64], sizes: &[usize]) -> Result<ConvergenceFit> {
    if endpoints.iter().any(|e| e.len() != reference.len()) {
        return Err(Error::GridMismatch("endpoint dimension differs from reference".into()));
    }
    let errors = sizes
        .iter()
        .map(|&size| batch_rms_error(endpoints, reference, size))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = sizes.iter().map(|&v| v as f64).collect();
    let fit = fit_log_log(&xs, &errors)?;
    Ok(ConvergenceFit {
        sizes: sizes.to_vec(),
        errors,
        fit,
    })
}

/// Running mean and spread over tracks pushed one at a time, for ensembles
/// too large to hold in memory. Updates follow push order, so pushing in
/// member order gives reproducible results.
#[derive(Clone, Debug, PartialEq)]
pub struct StreamingStatistics {
    n: usize,
    s: Vec<f64>,
    dim: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl StreamingStatistics {
    pub fn new() -> Self {
        StreamingStatistics {
            n: 0,
            s: Vec::new(),
            dim: 0,
            mean: Vec::new(),
            m2: Vec::new(),
        }
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn push(&mut self, track: &Track) -> Result<()> {
        if self.n == 0 {
            self.s = track.s.clone();
            self.dim = track.dim;
            self.mean = vec![0.0; track.data.len()];
            self.m2 = vec![0.0; track.data.len()];
        } else if track.s != self.s || track.dim != self.dim {
            return Err(Error::GridMismatch(format!("member {} has a different grid", self.n)));
        }
        self.n += 1;
        let k = self.n as f64;
        for ((m, q), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(&track.data) {
            let d = v - *m;
            *m += d / k;
            *q += d * (v - *m);
        }
        Ok(())
    }

    /// Mean and spread so far; needs at least two members.
    pub fn finish(&self) -> Result<EnsembleResult> {
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!("ensemble statistics need >= 2 members, got {}", self.n)));
        }
        let n = self.n as f64;
        let rows = self.s.len();
        let mean = (0..rows).map(|k| self.mean[k * self.dim..(k + 1) * self.dim].to_vec()).collect();
        let component_sd: Vec<Vec<f64>> = (0..rows)
            .map(|k| self.m2[k * self.dim..(k + 1) * self.dim].iter().map(|q| (q / n).sqrt()).collect())
            .collect();
        let rms_spread = (0..rows)
            .map(|k| (self.m2[k * self.dim..(k + 1) * self.dim].iter().sum::<f64>() / n).sqrt())
            .collect();
        Ok(EnsembleResult {
            n: self.n,
            s: self.s.clone(),
            dim: self.dim,
            mean,
            rms_spread,
            component_sd,
            convergence: None,
        })
    }
}

impl Default for StreamingStatistics {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::counter_rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn track(vals: &[[f64; 2]]) -> Track {
        let s = (0..vals.len()).map(|i| i as f64).collect();
        Track::new(s, 2, vals.iter().flatten().copied().collect()).unwrap()
    }

    #[test]
    fn identical_members_have_zero_spread() {
        let t = track(&[[1.0, 2.0], [3.0, 4.0]]);
        let r = ensemble_statistics(&[t.clone(), t.clone(), t], None).unwrap();
        assert!(r.rms_spread.iter().all(|&v| v == 0.0));
        assert_eq!(r.mean[1], vec![3.0, 4.0]);
    }

    #[test]
    fn symmetric_pair_averages_to_reference() {
        let reference = track(&[[1.0, -2.0], [0.5, 0.25]]);
        let a = track(&[[1.5, -1.0], [0.75, 0.5]]);
        let b = track(&[[0.5, -3.0], [0.25, 0.0]]);
        let r = ensemble_statistics(&[a, b], Some(&reference)).unwrap();
        for k in 0..2 {
            assert_eq!(r.mean[k], reference.row(k).to_vec());
        }
    }

    #[test]
    fn grid_mismatch_detected() {
        let a = track(&[[1.0, 2.0], [3.0, 4.0]]);
        let b = Track::new(vec![0.0, 0.5], 2, vec![0.0; 4]).unwrap();
        assert!(matches!(ensemble_statistics(&[a.clone(), b], None), Err(Error::GridMismatch(_))));
        assert!(ensemble_statistics(&[a], None).is_err());
        assert!(Track::new(vec![0.0], 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn synthetic_half_slope_recovered() {
        let mut rng = counter_rng(2024, 0, 0);
        let dim = 8;
        let reference = vec![0.25; dim];
        let endpoints: Vec<Vec<f64>> = (0..100_000)
            .map(|_| reference.iter().map(|r| r + rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let fit = convergence_study(&endpoints, &reference, &[10, 100, 1000, 10_000]).unwrap();
        assert!((fit.fit.slope + 0.5).abs() < 0.02, "{:?}", fit);
    }

    #[test]
    fn streaming_matches_two_pass() {
        let s = vec![0.0, 1.0];
        let tracks: Vec<Track> = (0..7)
            .map(|i| {
                let v = i as f64;
                Track::new(s.clone(), 2, vec![v, 1e3 + 0.5 * v, -v * v, 3.0]).unwrap()
            })
            .collect();
        let two_pass = ensemble_statistics(&tracks, None).unwrap();
        let mut acc = StreamingStatistics::new();
        for t in &tracks {
            acc.push(t).unwrap();
        }
        let streamed = acc.finish().unwrap();
        for k in 0..2 {
            for c in 0..2 {
                assert!((two_pass.mean[k][c] - streamed.mean[k][c]).abs() < 1e-12);
                assert!((two_pass.component_sd[k][c] - streamed.component_sd[k][c]).abs() < 1e-12);
            }
            assert!((two_pass.rms_spread[k] - streamed.rms_spread[k]).abs() < 1e-12);
        }
        let bad = Track::new(vec![0.0, 2.0], 2, vec![0.0; 4]).unwrap();
        assert!(matches!(acc.push(&bad), Err(Error::GridMismatch(_))));
    }
}
