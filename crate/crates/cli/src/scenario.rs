//! Dispatch from a validated configuration to the library, writing CSV, SVG
//! and residual files and collecting scalar results for the manifest.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use fractal_paths::deviation::{
    default_oracle_epsilon, integrate_deviation, relative_sup_error, two_geodesic_oracle, DeviationState,
};
use fractal_paths::fractal::{
    convergence_study, deviation_ensemble_range, geodesic_ensemble_range, EnsembleResult, StreamingStatistics, Track,
};
use fractal_paths::geometry::{metric_components, Metric, MetricSpec};
use fractal_paths::motion::{
    geodesic_rhs, integrate, schwarzschild_circular_orbit, EMFieldTensor, ForceLaw, ParticleProperties,
    ParticleState, SpinTensor, StepControl, Trajectory,
};
use fractal_paths::quantum::{
    fractal_geodesic_residual, histogram, klein_gordon_residual, scale_derivative, schrodinger_residual,
    velocity_from_wavefunction, walker_step, write_lattice_residual, Complex64, ComplexVelocityField,
    GaussianState, PhaseWave, PlaneWave, QuantumParams, ResidualRegion, SampledPath, ScaleMode, WalkerEnsemble,
    WaveGrid, Wavefunction,
};
use fractal_paths::stats::{fit_log_log, ks_critical_1pct, ks_statistic, normal_cdf};
use fractal_paths::ChartPoint;
use nalgebra::Vector4;
use rayon::prelude::*;
use serde_json::Value;

use crate::config::{InitialConfig, RegionConfig, Scenario, ScenarioConfig, WaveConfig};
use crate::manifest::{OutputDir, RunManifest};
use crate::plot::{emit_plot, PlotKind, PlotSpec, Table};

/// Members integrated per batch by the ensemble scenarios; bounds memory.
const ENSEMBLE_CHUNK: u64 = 1024;

type Results = BTreeMap<String, Value>;

/// Runs one scenario into `out` and writes the manifest last.
pub fn run_scenario(config: &ScenarioConfig, out: &Path) -> std::io::Result<RunManifest> {
    let start = Instant::now();
    let mut dir = OutputDir::create(out)?;
    let mut results = Results::new();
    let outcome = dispatch(config, &mut dir, &mut results);
    let manifest = RunManifest {
        scenario: config.scenario.name().into(),
        name: config.name.clone(),
        status: if outcome.is_ok() { "ok" } else { "error" }.into(),
        error: outcome.err().map(|e| format!("{e:#}")),
        version: env!("CARGO_PKG_VERSION").into(),
        wall_time_s: start.elapsed().as_secs_f64(),
        seed: config.seed,
        config: config.echo.clone(),
        files: dir.files.clone(),
        results,
    };
    manifest.write(out)?;
    Ok(manifest)
}

fn dispatch(c: &ScenarioConfig, out: &mut OutputDir, res: &mut Results) -> Result<()> {
    match c.scenario {
        Scenario::Geodesic => trajectory(c, ForceLaw::Geodesic, out, res),
        Scenario::Lorentz | Scenario::Papapetrou | Scenario::Dixon => {
            let law = force_law(c)?;
            trajectory(c, law, out, res)
        }
        Scenario::Deviation => deviation(c, out, res),
        Scenario::FractalEnsemble | Scenario::FractalDeviation => fractal_ensemble(c, out, res),
        Scenario::Nelson => nelson(c, out, res),
        Scenario::ResidualSchrodinger => residual_schrodinger(c, out, res),
        Scenario::ResidualKg => residual_kg(c, out, res),
        Scenario::ScaleDerivative => scale_derivative_scenario(c, out, res),
    }
}

fn put(res: &mut Results, key: &str, value: impl Into<Value>) {
    res.insert(key.into(), value.into());
}

fn plot(out: &mut OutputDir, name: &str, csv: &str, spec: &PlotSpec) -> Result<()> {
    let table = Table::parse(name, csv)?;
    out.write(&spec.output, emit_plot(&[table], spec)?)?;
    Ok(())
}

fn plot_spec(kind: PlotKind, x: &str, y: &[&str], title: &str, output: &str) -> PlotSpec {
    PlotSpec {
        output: output.into(),
        ..PlotSpec::new(kind, x, y, title)
    }
}

fn build_metric(c: &ScenarioConfig) -> Result<Arc<dyn Metric>> {
    Ok(c.metric.build()?)
}

fn initial_state(c: &ScenarioConfig) -> Result<ParticleState> {
    match c.initial.context("initial conditions missing")? {
        InitialConfig::Explicit { x, u } => Ok(ParticleState::new(0.0, ChartPoint::new(x[0], x[1], x[2], x[3]), Vector4::from(u))),
        InitialConfig::Circular { r } => {
            let mass = match c.metric {
                MetricSpec::Schwarzschild { mass, .. } => mass,
                _ => bail!("circular orbits need the schwarzschild metric"),
            };
            Ok(schwarzschild_circular_orbit(mass, r)?)
        }
    }
}

fn step_control(c: &ScenarioConfig) -> Result<(StepControl, f64)> {
    let i = c.integrator.context("integrator settings missing")?;
    let control = match i.tolerance {
        Some(tol) => StepControl::halving(i.step, tol, i.max_halvings),
        None => StepControl::fixed(i.step),
    };
    Ok((control, i.s_end))
}

fn force_law(c: &ScenarioConfig) -> Result<ForceLaw> {
    let p = c.particle.as_ref().context("particle settings missing")?;
    let metric = build_metric(c)?;
    let init = initial_state(c)?;
    let mut spin = SpinTensor::from_upper(&p.spin)?;
    if p.supplementary_condition {
        let g = metric_components(metric.as_ref(), &init.x)?;
        spin = spin.with_supplementary_condition(&init.u, &g)?;
    }
    let props = ParticleProperties::new(p.mass, p.charge, spin)?;
    let field = EMFieldTensor::uniform(c.field.electric, c.field.magnetic);
    Ok(match c.scenario {
        Scenario::Lorentz => ForceLaw::Lorentz { field, props },
        Scenario::Papapetrou => ForceLaw::Papapetrou { props },
        _ => ForceLaw::Dixon { field, props },
    })
}

fn trajectory(c: &ScenarioConfig, law: ForceLaw, out: &mut OutputDir, res: &mut Results) -> Result<()> {
    let metric = build_metric(c)?;
    let init = initial_state(c)?;
    let (control, s_end) = step_control(c)?;
    let t = integrate(metric.as_ref(), |s| law.rhs(metric.as_ref(), s), &init, s_end, control)?;
    let mut csv = Vec::new();
    t.write_csv(&mut csv)?;
    let csv = String::from_utf8(csv)?;
    out.write("trajectory.csv", &csv)?;
    put(res, "samples", t.states.len());
    put(res, "step", t.step);
    put(res, "norm_drift", t.norm_drift());
    put(res, "final_s", t.last().s);

    if matches!(c.metric, MetricSpec::Schwarzschild { .. }) {
        let orbit = equatorial_projection(&t);
        out.write("orbit.csv", &orbit)?;
        plot(out, "orbit.csv", &orbit, &plot_spec(PlotKind::Line, "X", &["Y"], "orbit", "trajectory.svg"))?;
    } else {
        plot(out, "trajectory.csv", &csv, &plot_spec(PlotKind::Line, "x1", &["x2"], "trajectory", "trajectory.svg"))?;
    }

    if let (Scenario::Geodesic, Some(InitialConfig::Circular { r }), MetricSpec::Schwarzschild { mass, .. }) =
        (c.scenario, c.initial, c.metric)
    {
        let expected = mass / r.powi(3);
        let worst = t
            .states
            .iter()
            .map(|s| ((s.u[3] / s.u[0]).powi(2) / expected - 1.0).abs())
            .fold(0.0, f64::max);
        put(res, "omega_sq_expected", expected);
        put(res, "omega_sq_rel_error", worst);
        put(res, "orbits", t.last().x.0[0] * expected.sqrt() / (2.0 * std::f64::consts::PI));
    }
    if let Some(e) = &t.stopped {
        put(res, "stopped", e.to_string());
        bail!("integration stopped at s = {}: {e}", t.last().s);
    }
    Ok(())
}

fn equatorial_projection(t: &Trajectory) -> String {
    let mut s = String::from("s,X,Y\n");
    for st in &t.states {
        let [_, r, th, ph] = st.x.coords();
        s.push_str(&format!("{:e},{:e},{:e}\n", st.s, r * th.sin() * ph.cos(), r * th.sin() * ph.sin()));
    }
    s
}

fn deviation_initial(c: &ScenarioConfig) -> Result<DeviationState> {
    let d = c.deviation.context("deviation settings missing")?;
    Ok(DeviationState::new(Vector4::from(d.psi), Vector4::from(d.w)))
}

fn deviation(c: &ScenarioConfig, out: &mut OutputDir, res: &mut Results) -> Result<()> {
    let metric = build_metric(c)?;
    let base = initial_state(c)?;
    let dev = deviation_initial(c)?;
    let cfg = c.deviation.context("deviation settings missing")?;
    let (control, s_end) = step_control(c)?;
    let pair = integrate_deviation(metric.as_ref(), &base, &dev, s_end, control.step)?;
    if let Some(e) = &pair.base.stopped {
        bail!("base geodesic stopped at s = {}: {e}", pair.base.last().s);
    }
    let oracle = if cfg.oracle {
        let eps = cfg.oracle_epsilon.unwrap_or_else(|| default_oracle_epsilon(metric.as_ref()));
        let o = two_geodesic_oracle(metric.as_ref(), &base, &dev.psi, &dev.w, eps, s_end, control.step)?;
        put(res, "oracle_epsilon", eps);
        put(res, "oracle_rel_sup_error", relative_sup_error(&pair.deviation, &o)?);
        Some(o)
    } else {
        None
    };
    let mut csv = Vec::new();
    pair.write_csv(&mut csv, oracle.as_deref())?;
    let csv = String::from_utf8(csv)?;
    out.write("deviation.csv", &csv)?;
    let ys: &[&str] = if oracle.is_some() { &["Psi1", "oPsi1"] } else { &["Psi1"] };
    plot(out, "deviation.csv", &csv, &plot_spec(PlotKind::Line, "s", ys, "deviation", "deviation.svg"))?;
    put(res, "samples", pair.deviation.len());
    put(res, "norm_drift", pair.base.norm_drift());
    let last = pair.deviation.last().expect("non-empty");
    put(res, "final_psi", last.psi.iter().copied().collect::<Vec<_>>());
    Ok(())
}

fn fractal_ensemble(c: &ScenarioConfig, out: &mut OutputDir, res: &mut Results) -> Result<()> {
    let metric = build_metric(c)?;
    let m = metric.as_ref();
    let f = c.fractal.as_ref().context("fractal settings missing")?;
    let (control, s_end) = step_control(c)?;
    let ds = control.step;
    let base = initial_state(c)?;
    let geodesic = c.scenario == Scenario::FractalEnsemble;
    let (reference, columns): (Track, [&str; 8]) = if geodesic {
        let t = integrate(m, |s| geodesic_rhs(m, s), &base, s_end, StepControl::fixed(ds))?;
        if let Some(e) = t.stopped {
            bail!("reference geodesic stopped: {e}");
        }
        (Track::from_trajectory(&t), ["x0", "x1", "x2", "x3", "U0", "U1", "U2", "U3"])
    } else {
        let p = integrate_deviation(m, &base, &deviation_initial(c)?, s_end, ds)?;
        if let Some(e) = p.base.stopped {
            bail!("reference geodesic stopped: {e}");
        }
        (Track::from_deviation(&p), ["Psi0", "Psi1", "Psi2", "Psi3", "W0", "W1", "W2", "W3"])
    };

    let n = f.members as u64;
    let mut stats = StreamingStatistics::new();
    let mut endpoints = Vec::with_capacity(f.members);
    let mut lo = 0;
    while lo < n {
        let hi = (lo + ENSEMBLE_CHUNK).min(n);
        let tracks = if geodesic {
            geodesic_ensemble_range(m, &f.params, &base, s_end, ds, lo..hi)?
        } else {
            let dev = deviation_initial(c)?;
            deviation_ensemble_range(m, &f.params, &base, &dev, s_end, ds, lo..hi)?
        };
        for t in &tracks {
            stats.push(t)?;
            endpoints.push(t.last_row().to_vec());
        }
        lo = hi;
    }
    let summary = stats.finish()?;
    let csv = ensemble_csv(&summary, &reference, &columns);
    out.write("ensemble.csv", &csv)?;
    plot(
        out,
        "ensemble.csv",
        &csv,
        &plot_spec(PlotKind::Line, "s", &["rms_spread"], "ensemble spread", "ensemble.svg"),
    )?;

    let final_mean: Vec<f64> = summary.mean.last().expect("non-empty").clone();
    let ref_end = reference.last_row();
    let mean_error = final_mean.iter().zip(ref_end).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    put(res, "members", f.members);
    put(res, "amplitude", f.params.amplitude);
    put(res, "final_mean_max_abs_error", mean_error);
    put(res, "final_rms_spread", *summary.rms_spread.last().expect("non-empty"));

    let mut stats_csv = format!(
        "key,value\nseed,{}\nmembers,{}\namplitude,{:e}\nlambda_c,{:e}\ndistribution,{}\nstep,{ds:e}\ns_end,{s_end:e}\nfinal_mean_max_abs_error,{mean_error:e}\n",
        f.params.seed,
        f.members,
        f.params.amplitude,
        f.params.lambda_c,
        f.params.distribution.name()
    );
    let sizes = f.sizes.clone().unwrap_or_else(|| default_sizes(f.members));
    if sizes.len() >= 2 && f.params.amplitude > 0.0 {
        let conv = convergence_study(&endpoints, ref_end, &sizes)?;
        let mut csv = String::from("N,rms_error\n");
        for (s, e) in conv.sizes.iter().zip(&conv.errors) {
            csv.push_str(&format!("{s},{e:e}\n"));
        }
        out.write("convergence.csv", &csv)?;
        plot(
            out,
            "convergence.csv",
            &csv,
            &plot_spec(PlotKind::LogLog, "N", &["rms_error"], "ensemble mean error", "convergence.svg"),
        )?;
        put(res, "convergence_sizes", conv.sizes.clone());
        put(res, "convergence_errors", conv.errors.clone());
        put(res, "convergence_slope", conv.fit.slope);
        put(res, "convergence_intercept", conv.fit.intercept);
        stats_csv.push_str(&format!("slope,{:e}\nintercept,{:e}\n", conv.fit.slope, conv.fit.intercept));
    }
    out.write("ensemble_stats.csv", &stats_csv)?;
    Ok(())
}

fn default_sizes(members: usize) -> Vec<usize> {
    let mut sizes = Vec::new();
    let mut s = 10;
    while s * 10 <= members {
        sizes.push(s);
        s *= 10;
    }
    sizes
}

fn ensemble_csv(summary: &EnsembleResult, reference: &Track, columns: &[&str; 8]) -> String {
    let mut s = String::from("s");
    for c in columns {
        s.push_str(&format!(",mean_{c}"));
    }
    for c in columns {
        s.push_str(&format!(",ref_{c}"));
    }
    s.push_str(",rms_spread\n");
    for (i, t) in summary.s.iter().enumerate() {
        s.push_str(&format!("{t:e}"));
        for v in summary.mean[i].iter().chain(reference.row(i)) {
            s.push_str(&format!(",{v:e}"));
        }
        s.push_str(&format!(",{:e}\n", summary.rms_spread[i]));
    }
    s
}

fn quantum_params(c: &ScenarioConfig) -> Result<QuantumParams> {
    c.quantum.context("quantum settings missing")
}

fn wavefunction(c: &ScenarioConfig, params: &QuantumParams) -> Result<Wavefunction> {
    let psi = match c.wave.as_ref().context("wave settings missing")? {
        WaveConfig::Plane { k, omega } => Wavefunction::analytic(Arc::new(PlaneWave::new(*k, *omega))),
        WaveConfig::Gaussian { sigma, energy } => Wavefunction::analytic(Arc::new(GaussianState::new(*sigma, *energy)?)),
        WaveConfig::Harmonic { sigma } => {
            Wavefunction::analytic(Arc::new(GaussianState::harmonic_ground_state(*sigma, params.diffusion)?))
        }
        WaveConfig::GridFile { path } => {
            let file = File::open(path).with_context(|| format!("opening wave grid {path}"))?;
            Wavefunction::grid(WaveGrid::read_from(BufReader::new(file))?)
        }
        WaveConfig::Phase { .. } => bail!("phase waves live on a space-time chart"),
    };
    Ok(match c.wave_floor {
        Some(v) => psi.with_floor(v),
        None => psi,
    })
}

fn wave_sigma(c: &ScenarioConfig) -> Result<f64> {
    match c.wave {
        Some(WaveConfig::Harmonic { sigma }) | Some(WaveConfig::Gaussian { sigma, .. }) => Ok(sigma),
        _ => bail!("nelson needs a gaussian wave"),
    }
}

fn nelson(c: &ScenarioConfig, out: &mut OutputDir, res: &mut Results) -> Result<()> {
    let params = quantum_params(c)?;
    let psi = wavefunction(c, &params)?;
    let sigma = wave_sigma(c)?;
    let w = c.walkers.context("walker settings missing")?;
    let mut ens = WalkerEnsemble::new(vec![w.start; w.members], 0.0, params, c.seed)?;
    for _ in 0..w.steps {
        walker_step(&mut ens, &psi, w.dt)?;
    }
    let density = GaussianState::new(sigma, 0.0)?;
    let half = w.range * sigma;
    let bins = histogram(&ens.axis(0), w.bins, -half, half, |x| density.marginal_density(x))?;
    let mut csv = String::from("center,count,reference\n");
    for b in &bins {
        csv.push_str(&format!("{:e},{},{:e}\n", b.center, b.count, b.reference));
    }
    out.write("histogram.csv", &csv)?;
    plot(
        out,
        "histogram.csv",
        &csv,
        &plot_spec(PlotKind::Histogram, "center", &["count", "reference"], "walkers vs |psi|^2", "histogram.svg"),
    )?;
    let ks: Vec<f64> = (0..3)
        .map(|a| ks_statistic(&ens.axis(a), |x| normal_cdf(x, 0.0, sigma)))
        .collect();
    let xs = ens.axis(0);
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64;
    put(res, "walkers", w.members);
    put(res, "steps", w.steps);
    put(res, "time", ens.t);
    put(res, "rejections", ens.rejections);
    put(res, "ks_x", ks[0]);
    put(res, "ks_y", ks[1]);
    put(res, "ks_z", ks[2]);
    put(res, "ks_max", ks.iter().copied().fold(0.0, f64::max));
    put(res, "ks_critical_1pct", ks_critical_1pct(w.members));
    put(res, "mean_x", mean);
    put(res, "variance_x", var);
    put(res, "variance_expected", sigma * sigma);
    Ok(())
}

fn spatial_region(c: &ScenarioConfig) -> Result<(&RegionConfig, [f64; 3], ResidualRegion)> {
    let r = c.region.as_ref().context("region settings missing")?;
    let origin: [f64; 3] = r.origin.as_slice().try_into().context("region origin needs 3 components")?;
    let region = ResidualRegion::lattice(origin, r.step, r.dims, r.t, r.h, r.dt)?;
    Ok((r, origin, region))
}

fn max_norm(values: impl Iterator<Item = Complex64>) -> f64 {
    values.map(|z| z.norm()).fold(0.0, f64::max)
}

fn residual_schrodinger(c: &ScenarioConfig, out: &mut OutputDir, res: &mut Results) -> Result<()> {
    let params = quantum_params(c)?;
    let psi = wavefunction(c, &params)?;
    let (r, origin, region) = spatial_region(c)?;
    let sch = schrodinger_residual(&psi, &params, &region)?;
    let geo = fractal_geodesic_residual(&psi, &params, &region)?;

    let rows: Vec<Vec<Complex64>> = sch.iter().map(|z| vec![*z]).collect();
    let mut buf = Vec::new();
    write_lattice_residual(&mut buf, r.dims, r.step, origin, r.t, &rows)?;
    out.write("residual_schrodinger.txt", &buf)?;
    let rows: Vec<Vec<Complex64>> = geo.iter().map(|v| v.to_vec()).collect();
    let mut buf = Vec::new();
    write_lattice_residual(&mut buf, r.dims, r.step, origin, r.t, &rows)?;
    out.write("residual_geodesic.txt", &buf)?;

    let peak = max_norm(region.points.iter().map(|x| psi.value(x, r.t).unwrap_or_default()));
    put(res, "points", region.points.len());
    put(res, "schrodinger_max", max_norm(sch.iter().copied()));
    put(res, "schrodinger_max_per_amplitude", max_norm(sch.iter().copied()) / peak.max(f64::MIN_POSITIVE));
    put(res, "geodesic_max", max_norm(geo.iter().flatten().copied()));
    if let Some(WaveConfig::Plane { k, omega }) = &c.wave {
        let d = params.diffusion;
        let k2: f64 = k.iter().map(|v| v * v).sum();
        put(res, "dispersion_mismatch", (d * omega - d * d * k2).abs());
    }
    Ok(())
}

fn chart_points(r: &RegionConfig) -> Result<Vec<ChartPoint>> {
    let o: [f64; 4] = r.origin.as_slice().try_into().context("residual-kg needs a 4-component origin")?;
    Ok((0..r.count)
        .map(|i| {
            let mut p = ChartPoint::new(o[0], o[1], o[2], o[3]);
            p.0[r.axis] += i as f64 * r.step;
            p
        })
        .collect())
}

fn residual_kg(c: &ScenarioConfig, out: &mut OutputDir, res: &mut Results) -> Result<()> {
    let params = quantum_params(c)?;
    let metric = build_metric(c)?;
    let Some(WaveConfig::Phase { quadratic, linear }) = &c.wave else {
        bail!("residual-kg needs a phase wave");
    };
    let wave = PhaseWave::new(*quadratic, *linear);
    let r = c.region.as_ref().context("region settings missing")?;
    let points = chart_points(r)?;
    let floor = c.wave_floor.unwrap_or(1e-10);
    let run = |h: f64| klein_gordon_residual(&wave, metric.as_ref(), &params, &points, h, floor);
    let values = run(r.h)?;

    let mut csv = String::from("index,x0,x1,x2,x3");
    for m in 0..4 {
        csv.push_str(&format!(",r{m}_re,r{m}_im"));
    }
    csv.push('\n');
    for (i, (p, v)) in points.iter().zip(&values).enumerate() {
        csv.push_str(&format!("{i}"));
        for x in p.coords() {
            csv.push_str(&format!(",{x:e}"));
        }
        for z in v {
            csv.push_str(&format!(",{:e},{:e}", z.re, z.im));
        }
        csv.push('\n');
    }
    out.write("residual_kg.csv", &csv)?;
    put(res, "points", points.len());
    put(res, "h", r.h);
    put(res, "residual_max", max_norm(values.iter().flatten().copied()));

    if matches!(c.metric, MetricSpec::Minkowski) {
        // For a quadratic phase in flat space only the first-derivative term survives.
        let eta = nalgebra::Matrix4::from_diagonal(&Vector4::new(-1.0, 1.0, 1.0, 1.0));
        let l2 = params.lambda * params.lambda;
        let worst = points
            .iter()
            .zip(&values)
            .map(|(p, v)| {
                let g = eta * (wave.quadratic * p.0 + wave.linear);
                (0..4)
                    .map(|rho| {
                        let expected = -l2 * (0..4).map(|m| g[m] * wave.quadratic[(m, rho)]).sum::<f64>();
                        (v[rho] - Complex64::new(expected, 0.0)).norm()
                    })
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        put(res, "closed_form_max_error", worst);
    }

    if r.refine {
        let half = run(r.h / 2.0)?;
        let quarter = run(r.h / 4.0)?;
        let diff = |a: &[[Complex64; 4]], b: &[[Complex64; 4]]| {
            max_norm(a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| x - y))
        };
        let (d1, d2) = (diff(&values, &half), diff(&half, &quarter));
        put(res, "refinement_diff_h", d1);
        put(res, "refinement_diff_h2", d2);
        put(res, "refinement_ratio", d1 / d2);
    }
    Ok(())
}

fn scale_derivative_scenario(c: &ScenarioConfig, out: &mut OutputDir, res: &mut Results) -> Result<()> {
    let params = quantum_params(c)?;
    let psi = wavefunction(c, &params)?;
    let (r, _, region) = spatial_region(c)?;
    let velocity = ComplexVelocityField::FromWave {
        psi: psi.clone(),
        params,
    };
    let f = |x: &[f64; 3], t: f64| psi.value(x, t);
    let rows = region
        .points
        .par_iter()
        .map(|x| {
            let v = velocity_from_wavefunction(&psi, &params, x, r.t)?;
            let standard = scale_derivative(&f, &velocity, x, r.t, r.h, ScaleMode::Standard)?;
            let extended = scale_derivative(
                &f,
                &velocity,
                x,
                r.t,
                r.h,
                ScaleMode::WithDiffusion {
                    diffusion: params.diffusion,
                },
            )?;
            Ok((v, standard, extended))
        })
        .collect::<fractal_paths::Result<Vec<_>>>()?;

    let mut csv = String::from("x,y,z,V0_re,V0_im,V1_re,V1_im,V2_re,V2_im,dpsi_re,dpsi_im,dpsi_diffusion_re,dpsi_diffusion_im\n");
    for (x, (v, a, b)) in region.points.iter().zip(&rows) {
        csv.push_str(&format!("{:e},{:e},{:e}", x[0], x[1], x[2]));
        for z in v.iter().chain([a, b]) {
            csv.push_str(&format!(",{:e},{:e}", z.re, z.im));
        }
        csv.push('\n');
    }
    out.write("scale_derivative.csv", &csv)?;
    put(res, "points", rows.len());
    put(res, "scale_derivative_max", max_norm(rows.iter().map(|r| r.1)));
    put(res, "scale_derivative_diffusion_max", max_norm(rows.iter().map(|r| r.2)));

    if let Some(p) = &c.path {
        let path = SampledPath::brownian(c.seed, p.samples, p.dt, params.diffusion)?;
        let mut csv = String::from("resolution,mean_forward,mean_gap\n");
        let mut fwd = Vec::new();
        for &dt in &p.resolutions {
            let (f, g) = path.clone().with_resolution(dt)?.mean_quotients();
            fwd.push(f);
            csv.push_str(&format!("{dt:e},{f:e},{g:e}\n"));
        }
        out.write("brownian.csv", &csv)?;
        plot(
            out,
            "brownian.csv",
            &csv,
            &plot_spec(PlotKind::LogLog, "resolution", &["mean_forward"], "difference quotients", "brownian.svg"),
        )?;
        let fit = fit_log_log(&p.resolutions, &fwd)?;
        put(res, "brownian_slope", fit.slope);
    }
    Ok(())
}

