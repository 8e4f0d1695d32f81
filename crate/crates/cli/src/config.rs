//! Line-oriented `key = value` configuration with `[section]` headers.
//!
//! Values are numbers, booleans, bare strings or tuples written `(a, b, c)`.
//! `#` starts a comment. Every problem in a file is reported, not just the
//! first.

use std::collections::BTreeMap;
use std::fmt;

use fractal_paths::fractal::{FractalParams, NoiseDistribution};
use fractal_paths::geometry::MetricSpec;
use fractal_paths::quantum::QuantumParams;
use nalgebra::{Matrix4, Vector4};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("{}: {message}", line_list(lines))]
    Parse { lines: Vec<usize>, message: String },
    #[error("{field}: {message}")]
    Validation { field: String, message: String },
}

fn line_list(lines: &[usize]) -> String {
    let parts: Vec<String> = lines.iter().map(|l| l.to_string()).collect();
    if lines.len() == 1 {
        format!("line {}", parts[0])
    } else {
        format!("lines {}", parts.join(" and "))
    }
}

/// All errors found in one configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub value: String,
    pub line: usize,
}

/// Parsed but untyped entries, keyed `section.key` (top level: `key`).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawConfig {
    pub entries: BTreeMap<String, Entry>,
}

impl RawConfig {
    pub fn parse(text: &str) -> (RawConfig, Vec<ConfigError>) {
        let mut raw = RawConfig::default();
        let mut errors = Vec::new();
        let mut section = String::new();
        for (i, line) in text.lines().enumerate() {
            let no = i + 1;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                match rest.strip_suffix(']') {
                    Some(name) if !name.trim().is_empty() => section = name.trim().to_string(),
                    _ => errors.push(ConfigError::Parse {
                        lines: vec![no],
                        message: format!("malformed section header '{line}'"),
                    }),
                }
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                errors.push(ConfigError::Parse {
                    lines: vec![no],
                    message: format!("expected 'key = value', found '{line}'"),
                });
                continue;
            };
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                errors.push(ConfigError::Parse {
                    lines: vec![no],
                    message: format!("invalid key '{key}'"),
                });
                continue;
            }
            let full = if section.is_empty() {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            let value = value.trim().trim_matches('"').to_string();
            if let Some(prev) = raw.entries.get(&full) {
                errors.push(ConfigError::Parse {
                    lines: vec![prev.line, no],
                    message: format!("duplicate key '{full}'"),
                });
                continue;
            }
            raw.entries.insert(full, Entry { value, line: no });
        }
        (raw, errors)
    }

    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }

    /// `key = value` pairs for echoing into a manifest.
    pub fn echo(&self) -> BTreeMap<String, String> {
        self.entries.iter().map(|(k, e)| (k.clone(), e.value.clone())).collect()
    }
}

/// Typed access that records every failure instead of stopping.
pub struct Reader<'a> {
    raw: &'a RawConfig,
    pub errors: Vec<ConfigError>,
}

impl<'a> Reader<'a> {
    pub fn new(raw: &'a RawConfig) -> Self {
        Reader { raw, errors: Vec::new() }
    }

    fn bad(&mut self, key: &str, message: String) {
        self.errors.push(ConfigError::Validation {
            field: key.to_string(),
            message,
        });
    }

    pub fn has(&self, key: &str) -> bool {
        self.raw.get(key).is_some()
    }

    pub fn string(&mut self, key: &str) -> Option<String> {
        self.raw.get(key).map(|e| e.value.clone())
    }

    pub fn f64(&mut self, key: &str) -> Option<f64> {
        let e = self.raw.get(key)?;
        match e.value.parse::<f64>() {
            Ok(v) if v.is_finite() => Some(v),
            _ => {
                let msg = format!("line {}: expected a finite number, found '{}'", e.line, e.value);
                self.bad(key, msg);
                None
            }
        }
    }

    pub fn u64(&mut self, key: &str) -> Option<u64> {
        let e = self.raw.get(key)?;
        match e.value.parse::<u64>() {
            Ok(v) => Some(v),
            Err(_) => {
                let msg = format!("line {}: expected a non-negative integer, found '{}'", e.line, e.value);
                self.bad(key, msg);
                None
            }
        }
    }

    pub fn usize(&mut self, key: &str) -> Option<usize> {
        self.u64(key).map(|v| v as usize)
    }

    pub fn bool(&mut self, key: &str) -> Option<bool> {
        let e = self.raw.get(key)?;
        match e.value.as_str() {
            "true" | "yes" | "on" => Some(true),
            "false" | "no" | "off" => Some(false),
            other => {
                let msg = format!("line {}: expected true or false, found '{other}'", e.line);
                self.bad(key, msg);
                None
            }
        }
    }

    pub fn list(&mut self, key: &str) -> Option<Vec<f64>> {
        let e = self.raw.get(key)?;
        let inner = e.value.trim().trim_start_matches('(').trim_end_matches(')');
        let parsed: Result<Vec<f64>, _> = inner.split(',').map(|p| p.trim().parse::<f64>()).collect();
        match parsed {
            Ok(v) if v.iter().all(|x| x.is_finite()) => Some(v),
            _ => {
                let msg = format!("line {}: expected a tuple of numbers, found '{}'", e.line, e.value);
                self.bad(key, msg);
                None
            }
        }
    }

    pub fn tuple<const N: usize>(&mut self, key: &str) -> Option<[f64; N]> {
        let line = self.raw.get(key)?.line;
        let v = self.list(key)?;
        match <[f64; N]>::try_from(v.as_slice()) {
            Ok(a) => Some(a),
            Err(_) => {
                self.bad(key, format!("line {line}: expected {N} components, found {}", v.len()));
                None
            }
        }
    }

    pub fn require<T>(&mut self, key: &str, value: Option<T>) -> Option<T> {
        if value.is_none() && !self.has(key) {
            let short = key.rsplit('.').next().unwrap_or(key);
            self.bad(key, format!("{short} required"));
        }
        value
    }

    pub fn required_f64(&mut self, key: &str) -> Option<f64> {
        let v = self.f64(key);
        self.require(key, v)
    }

    pub fn required_string(&mut self, key: &str) -> Option<String> {
        let v = self.string(key);
        self.require(key, v)
    }

    pub fn required_tuple<const N: usize>(&mut self, key: &str) -> Option<[f64; N]> {
        let v = self.tuple::<N>(key);
        self.require(key, v)
    }

    pub fn check(&mut self, key: &str, ok: bool, message: &str) {
        if !ok {
            self.bad(key, message.to_string());
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Scenario {
    Geodesic,
    Deviation,
    Lorentz,
    Papapetrou,
    Dixon,
    FractalEnsemble,
    FractalDeviation,
    Nelson,
    ResidualSchrodinger,
    ResidualKg,
    ScaleDerivative,
}

impl Scenario {
    pub const ALL: [Scenario; 11] = [
        Scenario::Geodesic,
        Scenario::Deviation,
        Scenario::Lorentz,
        Scenario::Papapetrou,
        Scenario::Dixon,
        Scenario::FractalEnsemble,
        Scenario::FractalDeviation,
        Scenario::Nelson,
        Scenario::ResidualSchrodinger,
        Scenario::ResidualKg,
        Scenario::ScaleDerivative,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Geodesic => "geodesic",
            Scenario::Deviation => "deviation",
            Scenario::Lorentz => "lorentz",
            Scenario::Papapetrou => "papapetrou",
            Scenario::Dixon => "dixon",
            Scenario::FractalEnsemble => "fractal-ensemble",
            Scenario::FractalDeviation => "fractal-deviation",
            Scenario::Nelson => "nelson",
            Scenario::ResidualSchrodinger => "residual-schrodinger",
            Scenario::ResidualKg => "residual-kg",
            Scenario::ScaleDerivative => "scale-derivative",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }

    fn needs_trajectory(self) -> bool {
        matches!(
            self,
            Scenario::Geodesic
                | Scenario::Deviation
                | Scenario::Lorentz
                | Scenario::Papapetrou
                | Scenario::Dixon
                | Scenario::FractalEnsemble
                | Scenario::FractalDeviation
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialConfig {
    Explicit { x: [f64; 4], u: [f64; 4] },
    /// Equatorial circular orbit of Schwarzschild at radius `r`.
    Circular { r: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub step: f64,
    pub s_end: f64,
    pub tolerance: Option<f64>,
    pub max_halvings: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParticleConfig {
    pub mass: f64,
    pub charge: f64,
    /// Upper-triangle spin entries `(a, b, S^{ab})`.
    pub spin: Vec<(usize, usize, f64)>,
    pub supplementary_condition: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldConfig {
    pub electric: [f64; 3],
    pub magnetic: [f64; 3],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeviationConfig {
    pub psi: [f64; 4],
    pub w: [f64; 4],
    pub oracle: bool,
    pub oracle_epsilon: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FractalConfig {
    pub params: FractalParams,
    pub members: usize,
    pub sizes: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum WaveConfig {
    Plane { k: [f64; 3], omega: f64 },
    Gaussian { sigma: f64, energy: f64 },
    /// Ground state of the isotropic oscillator of width `sigma`.
    Harmonic { sigma: f64 },
    /// Chart wave `exp(i(x.Qx/2 + b.x))`.
    Phase { quadratic: Matrix4<f64>, linear: Vector4<f64> },
    /// Grid file, path relative to the configuration file.
    GridFile { path: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionConfig {
    pub origin: Vec<f64>,
    pub step: f64,
    pub dims: [usize; 3],
    pub t: f64,
    pub h: f64,
    pub dt: f64,
    pub axis: usize,
    pub count: usize,
    pub refine: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WalkerConfig {
    pub members: usize,
    pub dt: f64,
    pub steps: usize,
    pub start: [f64; 3],
    pub bins: usize,
    pub range: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathConfig {
    pub samples: usize,
    pub dt: f64,
    pub resolutions: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub name: String,
    pub seed: u64,
    /// Output directory; `--out` takes precedence.
    pub output: Option<String>,
    pub metric: MetricSpec,
    pub initial: Option<InitialConfig>,
    pub integrator: Option<IntegratorConfig>,
    pub particle: Option<ParticleConfig>,
    pub field: FieldConfig,
    pub deviation: Option<DeviationConfig>,
    pub fractal: Option<FractalConfig>,
    pub quantum: Option<QuantumParams>,
    pub wave: Option<WaveConfig>,
    pub wave_floor: Option<f64>,
    pub region: Option<RegionConfig>,
    pub walkers: Option<WalkerConfig>,
    pub path: Option<PathConfig>,
    pub echo: BTreeMap<String, String>,
}

const KNOWN_KEYS: &[&str] = &[
    "scenario",
    "name",
    "seed",
    "output",
    "metric.name",
    "metric.M",
    "metric.amplitude",
    "metric.horizon_margin",
    "initial.x",
    "initial.U",
    "initial.circular_r",
    "integrator.step",
    "integrator.s_end",
    "integrator.tolerance",
    "integrator.max_halvings",
    "particle.m",
    "particle.e",
    "particle.S01",
    "particle.S02",
    "particle.S03",
    "particle.S12",
    "particle.S13",
    "particle.S23",
    "particle.supplementary_condition",
    "field.E",
    "field.B",
    "deviation.psi",
    "deviation.w",
    "deviation.oracle",
    "deviation.oracle_epsilon",
    "fractal.lambda_c",
    "fractal.amplitude",
    "fractal.distribution",
    "fractal.N",
    "fractal.sizes",
    "quantum.D",
    "quantum.lambda_c",
    "quantum.lambda",
    "quantum.xi",
    "quantum.mu",
    "wave.kind",
    "wave.k",
    "wave.omega",
    "wave.sigma",
    "wave.energy",
    "wave.quadratic",
    "wave.linear",
    "wave.file",
    "wave.floor",
    "region.origin",
    "region.step",
    "region.dims",
    "region.t",
    "region.h",
    "region.dt",
    "region.axis",
    "region.count",
    "region.refine",
    "walkers.N",
    "walkers.dt",
    "walkers.steps",
    "walkers.start",
    "walkers.bins",
    "walkers.range",
    "path.samples",
    "path.dt",
    "path.resolutions",
];

/// Parses and validates a scenario configuration.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigErrors> {
    let (raw, mut errors) = RawConfig::parse(text);
    for (key, e) in &raw.entries {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            errors.push(ConfigError::Validation {
                field: key.clone(),
                message: format!("line {}: unknown key", e.line),
            });
        }
    }
    let mut r = Reader::new(&raw);
    let scenario = match r.string("scenario") {
        None => {
            r.require::<()>("scenario", None);
            None
        }
        Some(name) => {
            let s = Scenario::from_name(&name);
            if s.is_none() {
                let all: Vec<_> = Scenario::ALL.iter().map(|s| s.name()).collect();
                r.check("scenario", false, &format!("unknown scenario '{name}' (expected one of {})", all.join(", ")));
            }
            s
        }
    };
    let seed = r.u64("seed").unwrap_or(0);
    let metric = read_metric(&mut r);
    let initial = read_initial(&mut r, &metric);
    let integrator = read_integrator(&mut r);
    let particle = read_particle(&mut r);
    let field = FieldConfig {
        electric: r.tuple::<3>("field.E").unwrap_or([0.0; 3]),
        magnetic: r.tuple::<3>("field.B").unwrap_or([0.0; 3]),
    };
    let deviation = read_deviation(&mut r);
    let fractal = read_fractal(&mut r, seed);
    let quantum = read_quantum(&mut r);
    let wave = read_wave(&mut r);
    let wave_floor = r.f64("wave.floor");
    let region = read_region(&mut r);
    let walkers = read_walkers(&mut r);
    let path = read_path(&mut r);

    if let Some(s) = scenario {
        if s.needs_trajectory() {
            r.require("initial.x", initial.map(|_| ()).or(r.has("initial.circular_r").then_some(())));
            if !r.has("initial.circular_r") {
                r.require("initial.U", initial.map(|_| ()));
            }
            r.require("integrator.s_end", integrator.map(|_| ()));
        }
        match s {
            Scenario::Deviation | Scenario::FractalDeviation => {
                r.require("deviation.psi", deviation.map(|_| ()));
            }
            Scenario::Lorentz | Scenario::Papapetrou | Scenario::Dixon if particle.is_none() => {
                r.require::<()>("particle.m", None);
            }
            _ => {}
        }
        if matches!(s, Scenario::FractalEnsemble | Scenario::FractalDeviation) && fractal.is_none() {
            if !r.has("fractal.amplitude") {
                r.require::<()>("fractal.amplitude", None);
            }
            if !r.has("fractal.N") {
                r.require::<()>("fractal.N", None);
            }
        }
        if matches!(
            s,
            Scenario::Nelson | Scenario::ResidualSchrodinger | Scenario::ResidualKg | Scenario::ScaleDerivative
        ) {
            if quantum.is_none() && !r.has("quantum.D") {
                r.require::<()>("quantum.D", None);
            }
            if wave.is_none() && !r.has("wave.kind") {
                r.require::<()>("wave.kind", None);
            }
        }
        if matches!(s, Scenario::ResidualSchrodinger | Scenario::ResidualKg | Scenario::ScaleDerivative)
            && region.is_none()
        {
            r.require::<()>("region.origin", None);
        }
        if s == Scenario::Nelson && walkers.is_none() {
            for key in ["walkers.N", "walkers.dt", "walkers.steps"] {
                if !r.has(key) {
                    r.require::<()>(key, None);
                }
            }
        }
        if let Some(w) = &wave {
            let chart = matches!(w, WaveConfig::Phase { .. });
            if s == Scenario::ResidualKg && !chart {
                r.check("wave.kind", false, "residual-kg needs wave kind 'phase'");
            }
            if s != Scenario::ResidualKg && chart {
                r.check("wave.kind", false, "wave kind 'phase' is only used by residual-kg");
            }
            if s == Scenario::Nelson && !matches!(w, WaveConfig::Gaussian { .. } | WaveConfig::Harmonic { .. }) {
                r.check("wave.kind", false, "nelson needs wave kind 'harmonic' or 'gaussian'");
            }
        }
        if let (Some(reg), true) = (&region, s == Scenario::ResidualKg) {
            r.check("region.origin", reg.origin.len() == 4, "residual-kg needs a 4-component origin");
            r.check("region.axis", reg.axis < 4, "axis must be 0..3");
        }
        if let (Some(reg), true) = (&region, matches!(s, Scenario::ResidualSchrodinger | Scenario::ScaleDerivative)) {
            r.check("region.origin", reg.origin.len() == 3, "spatial regions need a 3-component origin");
        }
        if let (Some(InitialConfig::Circular { .. }), false) = (initial, matches!(metric, MetricSpec::Schwarzschild { .. })) {
            r.check("initial.circular_r", false, "circular orbits need the schwarzschild metric");
        }
    }

    errors.extend(r.errors);
    if !errors.is_empty() {
        return Err(ConfigErrors(errors));
    }
    let scenario = scenario.expect("checked above");
    let name = raw
        .get("name")
        .map(|e| e.value.clone())
        .unwrap_or_else(|| scenario.name().to_string());
    Ok(ScenarioConfig {
        scenario,
        name,
        seed,
        output: raw.get("output").map(|e| e.value.clone()),
        metric,
        initial,
        integrator,
        particle,
        field,
        deviation,
        fractal,
        quantum,
        wave,
        wave_floor,
        region,
        walkers,
        path,
        echo: raw.echo(),
    })
}

fn read_metric(r: &mut Reader) -> MetricSpec {
    let name = r.string("metric.name").unwrap_or_else(|| "minkowski".into());
    let mass = r.f64("metric.M");
    let amplitude = r.f64("metric.amplitude");
    let margin = r.f64("metric.horizon_margin");
    match MetricSpec::from_name(&name, mass, amplitude) {
        Ok(MetricSpec::Schwarzschild { mass, horizon_margin }) => {
            let spec = MetricSpec::Schwarzschild {
                mass,
                horizon_margin: margin.unwrap_or(horizon_margin),
            };
            if let Err(e) = spec.build() {
                r.check("metric", false, &e.to_string());
            }
            spec
        }
        Ok(spec) => {
            if let Err(e) = spec.build() {
                r.check("metric", false, &e.to_string());
            }
            spec
        }
        Err(_) => {
            match name.as_str() {
                "schwarzschild" => r.check("metric.M", false, "M required"),
                "weak-field" => r.check("metric.amplitude", false, "amplitude required"),
                other => r.check(
                    "metric.name",
                    false,
                    &format!("unknown metric '{other}' (expected one of {})", MetricSpec::NAMES.join(", ")),
                ),
            }
            MetricSpec::Minkowski
        }
    }
}

fn read_initial(r: &mut Reader, metric: &MetricSpec) -> Option<InitialConfig> {
    if let Some(radius) = r.f64("initial.circular_r") {
        let mass = match metric {
            MetricSpec::Schwarzschild { mass, .. } => *mass,
            _ => 0.0,
        };
        r.check("initial.circular_r", radius > 3.0 * mass, "circular orbits need r > 3M");
        return Some(InitialConfig::Circular { r: radius });
    }
    let x = r.tuple::<4>("initial.x").or_else(|| r.has("initial.U").then_some([0.0; 4]));
    let u = r.tuple::<4>("initial.U");
    match (x, u) {
        (Some(x), Some(u)) => Some(InitialConfig::Explicit { x, u }),
        _ => None,
    }
}

fn read_integrator(r: &mut Reader) -> Option<IntegratorConfig> {
    let step = r.f64("integrator.step").unwrap_or(0.01);
    r.check("integrator.step", step > 0.0, "step must be > 0");
    let tolerance = r.f64("integrator.tolerance");
    let max_halvings = r.u64("integrator.max_halvings").unwrap_or(8) as u32;
    let s_end = r.f64("integrator.s_end")?;
    r.check("integrator.s_end", s_end > 0.0, "s_end must be > 0");
    Some(IntegratorConfig {
        step,
        s_end,
        tolerance,
        max_halvings,
    })
}

fn read_particle(r: &mut Reader) -> Option<ParticleConfig> {
    let charge = r.f64("particle.e").unwrap_or(0.0);
    let mut spin = Vec::new();
    for (a, b) in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)] {
        if let Some(v) = r.f64(&format!("particle.S{a}{b}")) {
            spin.push((a, b, v));
        }
    }
    let supplementary_condition = r.bool("particle.supplementary_condition").unwrap_or(false);
    let mass = r.f64("particle.m")?;
    r.check("particle.m", mass > 0.0, "m must be > 0");
    Some(ParticleConfig {
        mass,
        charge,
        spin,
        supplementary_condition,
    })
}

fn read_deviation(r: &mut Reader) -> Option<DeviationConfig> {
    let w = r.tuple::<4>("deviation.w").unwrap_or([0.0; 4]);
    let oracle = r.bool("deviation.oracle").unwrap_or(false);
    let oracle_epsilon = r.f64("deviation.oracle_epsilon");
    if let Some(eps) = oracle_epsilon {
        r.check("deviation.oracle_epsilon", eps > 0.0, "oracle_epsilon must be > 0");
    }
    let psi = r.tuple::<4>("deviation.psi")?;
    Some(DeviationConfig {
        psi,
        w,
        oracle,
        oracle_epsilon,
    })
}

fn read_fractal(r: &mut Reader, seed: u64) -> Option<FractalConfig> {
    let lambda_c = r.f64("fractal.lambda_c").unwrap_or(1.0);
    let distribution = match r.string("fractal.distribution") {
        None => NoiseDistribution::Gaussian,
        Some(name) => match NoiseDistribution::from_name(&name) {
            Ok(d) => d,
            Err(e) => {
                r.check("fractal.distribution", false, &e.to_string());
                NoiseDistribution::Gaussian
            }
        },
    };
    let sizes = r.list("fractal.sizes").map(|v| v.iter().map(|x| x.max(0.0) as usize).collect::<Vec<_>>());
    let amplitude = r.f64("fractal.amplitude");
    let members = r.usize("fractal.N");
    let (amplitude, members) = (amplitude?, members?);
    r.check("fractal.N", members >= 2, "N must be >= 2");
    if let Some(s) = &sizes {
        r.check(
            "fractal.sizes",
            s.len() >= 2 && s.iter().all(|&v| v >= 1 && v <= members),
            "sizes need at least two entries between 1 and N",
        );
    }
    match FractalParams::new(lambda_c, amplitude, seed, distribution) {
        Ok(params) => Some(FractalConfig { params, members, sizes }),
        Err(e) => {
            r.check("fractal", false, &e.to_string());
            None
        }
    }
}

fn read_quantum(r: &mut Reader) -> Option<QuantumParams> {
    let lambda_c = r.f64("quantum.lambda_c").unwrap_or(1.0);
    let lambda = r.f64("quantum.lambda").unwrap_or(1.0);
    let xi = r.f64("quantum.xi").unwrap_or(0.0);
    let mu = r.f64("quantum.mu").unwrap_or(0.0);
    let d = r.f64("quantum.D")?;
    match QuantumParams::new(d, lambda_c, lambda, xi, mu) {
        Ok(p) => Some(p),
        Err(e) => {
            r.check("quantum", false, &e.to_string());
            None
        }
    }
}

fn read_wave(r: &mut Reader) -> Option<WaveConfig> {
    let kind = r.string("wave.kind")?;
    let wave = match kind.as_str() {
        "plane" => WaveConfig::Plane {
            k: r.required_tuple::<3>("wave.k")?,
            omega: r.required_f64("wave.omega")?,
        },
        "gaussian" => WaveConfig::Gaussian {
            sigma: r.required_f64("wave.sigma")?,
            energy: r.f64("wave.energy").unwrap_or(0.0),
        },
        "harmonic" => WaveConfig::Harmonic {
            sigma: r.required_f64("wave.sigma")?,
        },
        "phase" => {
            let q = r.list("wave.quadratic").unwrap_or_else(|| vec![0.0; 16]);
            if q.len() != 16 {
                r.check("wave.quadratic", false, "quadratic needs 16 entries (row-major 4x4)");
                return None;
            }
            WaveConfig::Phase {
                quadratic: Matrix4::from_row_slice(&q),
                linear: Vector4::from(r.tuple::<4>("wave.linear").unwrap_or([0.0; 4])),
            }
        }
        "grid" => WaveConfig::GridFile {
            path: r.required_string("wave.file")?,
        },
        other => {
            r.check(
                "wave.kind",
                false,
                &format!("unknown wave kind '{other}' (expected plane, gaussian, harmonic, phase or grid)"),
            );
            return None;
        }
    };
    if let WaveConfig::Gaussian { sigma, .. } | WaveConfig::Harmonic { sigma } = wave {
        r.check("wave.sigma", sigma > 0.0, "sigma must be > 0");
    }
    Some(wave)
}

fn read_region(r: &mut Reader) -> Option<RegionConfig> {
    let step = r.f64("region.step").unwrap_or(0.1);
    let dims = r.tuple::<3>("region.dims").unwrap_or([1.0; 3]);
    let t = r.f64("region.t").unwrap_or(0.0);
    let h = r.f64("region.h").unwrap_or(1e-3);
    let dt = r.f64("region.dt").unwrap_or(1e-3);
    let axis = r.usize("region.axis").unwrap_or(1);
    let count = r.usize("region.count").unwrap_or(1);
    let refine = r.bool("region.refine").unwrap_or(false);
    r.check("region.step", step > 0.0, "step must be > 0");
    r.check("region.h", h > 0.0, "h must be > 0");
    r.check("region.dt", dt > 0.0, "dt must be > 0");
    r.check("region.dims", dims.iter().all(|d| *d >= 1.0 && d.fract() == 0.0), "dims must be positive integers");
    r.check("region.count", count >= 1, "count must be >= 1");
    let origin = r.list("region.origin")?;
    Some(RegionConfig {
        origin,
        step,
        dims: dims.map(|d| d.max(1.0) as usize),
        t,
        h,
        dt,
        axis,
        count,
        refine,
    })
}

fn read_walkers(r: &mut Reader) -> Option<WalkerConfig> {
    let start = r.tuple::<3>("walkers.start").unwrap_or([0.0; 3]);
    let bins = r.usize("walkers.bins").unwrap_or(40);
    let range = r.f64("walkers.range").unwrap_or(4.0);
    r.check("walkers.bins", bins >= 1, "bins must be >= 1");
    r.check("walkers.range", range > 0.0, "range must be > 0");
    let members = r.usize("walkers.N");
    let dt = r.f64("walkers.dt");
    let steps = r.usize("walkers.steps");
    let (members, dt, steps) = (members?, dt?, steps?);
    r.check("walkers.N", members >= 1, "N must be >= 1");
    r.check("walkers.dt", dt > 0.0, "dt must be > 0");
    Some(WalkerConfig {
        members,
        dt,
        steps,
        start,
        bins,
        range,
    })
}

fn read_path(r: &mut Reader) -> Option<PathConfig> {
    if !(r.has("path.samples") || r.has("path.dt") || r.has("path.resolutions")) {
        return None;
    }
    let samples = r.usize("path.samples").unwrap_or(100_001);
    let dt = r.f64("path.dt").unwrap_or(1e-4);
    let resolutions = r.list("path.resolutions").unwrap_or_else(|| vec![1e-4, 1e-3, 1e-2]);
    r.check("path.samples", samples >= 3, "samples must be >= 3");
    r.check("path.dt", dt > 0.0, "dt must be > 0");
    r.check("path.resolutions", resolutions.len() >= 2, "resolutions need at least two entries");
    Some(PathConfig {
        samples,
        dt,
        resolutions,
    })
}

impl ScenarioConfig {
    /// Replaces the seed everywhere it is used, including the echo.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        if let Some(f) = &mut self.fractal {
            f.params.seed = seed;
        }
        self.echo.insert("seed".into(), seed.to_string());
        self
    }

    /// Resolves a relative wave grid file against `dir`.
    pub fn resolve_paths(&mut self, dir: &std::path::Path) {
        if let Some(WaveConfig::GridFile { path }) = &mut self.wave {
            let p = std::path::Path::new(path.as_str());
            if p.is_relative() {
                *path = dir.join(p).to_string_lossy().into_owned();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_geodesic_config_gets_defaults() {
        let text = "scenario = geodesic\n[metric]\nname = minkowski\n[initial]\nU = (1, 0, 0, 0)\n[integrator]\ns_end = 1\n";
        let c = parse_config(text).unwrap();
        assert_eq!(c.scenario, Scenario::Geodesic);
        assert_eq!(c.seed, 0);
        assert_eq!(c.name, "geodesic");
        assert_eq!(c.metric, MetricSpec::Minkowski);
        assert_eq!(
            c.initial,
            Some(InitialConfig::Explicit {
                x: [0.0; 4],
                u: [1.0, 0.0, 0.0, 0.0]
            })
        );
        assert_eq!(c.integrator.unwrap().step, 0.01);
    }

    #[test]
    fn papapetrou_without_mass_names_the_field() {
        let text = "scenario = papapetrou\n[initial]\nU = (1, 0, 0, 0)\n[integrator]\ns_end = 1\n";
        let err = parse_config(text).unwrap_err();
        assert!(err.0.iter().any(|e| e.to_string().contains("m required")), "{err}");
    }

    #[test]
    fn duplicate_key_reports_both_lines() {
        let text = "scenario = geodesic\nseed = 1\n\nseed = 2\n";
        let err = parse_config(text).unwrap_err();
        let dup = err
            .0
            .iter()
            .find(|e| matches!(e, ConfigError::Parse { .. }))
            .expect("parse error");
        assert_eq!(
            *dup,
            ConfigError::Parse {
                lines: vec![2, 4],
                message: "duplicate key 'seed'".into()
            }
        );
        assert!(dup.to_string().starts_with("lines 2 and 4"));
    }

    #[test]
    fn all_errors_are_collected() {
        let text = "scenario = warp\nseed = -3\n[metric]\nname = schwarzschild\nbogus line\n[initial]\nU = (1, 2)\n";
        let err = parse_config(text).unwrap_err();
        assert!(err.0.len() >= 4, "{err}");
        let text = err.to_string();
        assert!(text.contains("unknown scenario"));
        assert!(text.contains("line 5"));
        assert!(text.contains("M required"));
        assert!(text.contains("expected 4 components"));
    }

    #[test]
    fn comments_and_sections_are_handled() {
        let text = "# header\nscenario = nelson # trailing\nname = ho\n[quantum]\nD = 0.5\n[wave]\nkind = harmonic\nsigma = 1\n[walkers]\nN = 10\ndt = 0.01\nsteps = 5\n";
        let c = parse_config(text).unwrap();
        assert_eq!(c.name, "ho");
        assert_eq!(c.wave, Some(WaveConfig::Harmonic { sigma: 1.0 }));
        assert_eq!(c.walkers.unwrap().members, 10);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "scenario = geodesic\n[initial]\nU = (1,0,0,0)\nV = 3\n[integrator]\ns_end = 1\n";
        let err = parse_config(text).unwrap_err();
        assert!(err.to_string().contains("initial.V: line 4: unknown key"));
    }
}
