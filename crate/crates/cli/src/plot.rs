//! Static SVG plots from CSV tables.
//!
//! Output is a pure function of the inputs: numbers are written with fixed
//! precision and nothing depends on time or locale.

use std::fmt::Write as _;

use fractal_paths::stats::fit_log_log;

use crate::config::{ConfigError, ConfigErrors, RawConfig, Reader};

#[derive(Debug, thiserror::Error)]
pub enum PlotError {
    #[error("column '{column}' not found in {source_name} (have: {available})")]
    MissingColumn {
        column: String,
        source_name: String,
        available: String,
    },
    #[error("{source_name}: {message}")]
    Csv { source_name: String, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    Line,
    Scatter,
    LogLog,
    Histogram,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlotSpec {
    pub kind: PlotKind,
    pub x: String,
    pub y: Vec<String>,
    pub title: String,
    /// Least-squares line through the first series (log-log plots only).
    pub fit: bool,
    pub output: String,
}

impl PlotSpec {
    pub fn new(kind: PlotKind, x: &str, y: &[&str], title: &str) -> Self {
        PlotSpec {
            kind,
            x: x.into(),
            y: y.iter().map(|s| s.to_string()).collect(),
            title: title.into(),
            fit: kind == PlotKind::LogLog,
            output: "plot.svg".into(),
        }
    }
}

/// Parses a plot spec: top-level `kind`, `x`, `y` (comma separated),
/// `title`, `fit`, `output`.
pub fn parse_plot_spec(text: &str) -> Result<PlotSpec, ConfigErrors> {
    let (raw, mut errors) = RawConfig::parse(text);
    for (key, e) in &raw.entries {
        if !["kind", "x", "y", "title", "fit", "output"].contains(&key.as_str()) {
            errors.push(ConfigError::Validation {
                field: key.clone(),
                message: format!("line {}: unknown key", e.line),
            });
        }
    }
    let mut r = Reader::new(&raw);
    let kind = match r.string("kind").as_deref() {
        None | Some("line") => Some(PlotKind::Line),
        Some("scatter") => Some(PlotKind::Scatter),
        Some("loglog") => Some(PlotKind::LogLog),
        Some("histogram") => Some(PlotKind::Histogram),
        Some(other) => {
            r.check("kind", false, &format!("unknown plot kind '{other}' (expected line, scatter, loglog or histogram)"));
            None
        }
    };
    let x = r.required_string("x");
    let y = r.required_string("y");
    let title = r.string("title").unwrap_or_default();
    let fit = r.bool("fit");
    let output = r.string("output").unwrap_or_else(|| "plot.svg".into());
    errors.extend(r.errors);
    if !errors.is_empty() {
        return Err(ConfigErrors(errors));
    }
    let kind = kind.expect("checked");
    Ok(PlotSpec {
        kind,
        x: x.expect("checked"),
        y: y.expect("checked").split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
        title,
        fit: fit.unwrap_or(kind == PlotKind::LogLog),
        output,
    })
}

/// Numeric CSV table with a header row.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn parse(name: &str, text: &str) -> Result<Table, PlotError> {
        let csv_err = |message: String| PlotError::Csv {
            source_name: name.into(),
            message,
        };
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| csv_err(e.to_string()))?
            .iter()
            .map(String::from)
            .collect();
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| csv_err(e.to_string()))?;
            let row = record
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| csv_err(format!("row {}: non-numeric field", i + 2)))?;
            rows.push(row);
        }
        Ok(Table {
            name: name.into(),
            headers,
            rows,
        })
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>, PlotError> {
        let idx = self.headers.iter().position(|h| h == name).ok_or_else(|| PlotError::MissingColumn {
            column: name.into(),
            source_name: self.name.clone(),
            available: self.headers.join(", "),
        })?;
        Ok(self.rows.iter().map(|r| r.get(idx).copied().unwrap_or(f64::NAN)).collect())
    }
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

/// Renders the y columns of every table against its x column.
pub fn emit_plot(tables: &[Table], spec: &PlotSpec) -> Result<String, PlotError> {
    let log = spec.kind == PlotKind::LogLog;
    let mut series = Vec::new();
    for table in tables {
        let xs = table.column(&spec.x)?;
        for y in &spec.y {
            let ys = table.column(y)?;
            let points = xs
                .iter()
                .zip(&ys)
                .map(|(&a, &b)| (a, b))
                .filter(|(a, b)| a.is_finite() && b.is_finite() && (!log || (*a > 0.0 && *b > 0.0)))
                .map(|(a, b)| if log { (a.log10(), b.log10()) } else { (a, b) })
                .collect();
            let label = if tables.len() > 1 { format!("{} {y}", table.name) } else { y.clone() };
            series.push(Series { label, points });
        }
    }

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    if !spec.title.is_empty() {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            escape(&spec.title)
        );
    }
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let x_label = if log { format!("log10 {}", spec.x) } else { spec.x.clone() };
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 10.0,
        escape(&x_label)
    );

    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    if all.is_empty() {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" fill="gray">no data</text>"#,
            LEFT + pw / 2.0,
            TOP + ph / 2.0
        );
        svg.push_str("</svg>\n");
        return Ok(svg);
    }

    let histogram = spec.kind == PlotKind::Histogram;
    let (mut x0, mut x1) = bounds(all.iter().map(|p| p.0));
    let (mut y0, mut y1) = bounds(all.iter().map(|p| p.1));
    let bar_width = if histogram { min_gap(&series[0].points) } else { 0.0 };
    if histogram {
        x0 -= bar_width / 2.0;
        x1 += bar_width / 2.0;
        y0 = y0.min(0.0);
    }
    if x1 == x0 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 == y0 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.05 * (y1 - y0);
    if !(histogram && y0 == 0.0) {
        y0 -= pad;
    }
    y1 += pad;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            sx(xv),
            TOP + ph,
            sx(xv),
            TOP + ph + 5.0,
            sx(xv),
            TOP + ph + 20.0,
            tick(xv)
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            sy(yv),
            LEFT,
            sy(yv),
            LEFT - 8.0,
            sy(yv) + 4.0,
            tick(yv)
        );
    }

    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        if histogram && k == 0 {
            for &(x, y) in &s.points {
                let top = sy(y.max(y0));
                let base = sy(0.0_f64.max(y0));
                let _ = writeln!(
                    svg,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="0.5"/>"#,
                    sx(x - bar_width / 2.0),
                    top,
                    (sx(x + bar_width / 2.0) - sx(x - bar_width / 2.0)).max(0.0),
                    (base - top).max(0.0)
                );
            }
        } else if spec.kind == PlotKind::Scatter {
            for &(x, y) in &s.points {
                let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, sx(x), sy(y));
            }
        } else {
            let path: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                path.join(" ")
            );
            if log {
                for &(x, y) in &s.points {
                    let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(x), sy(y));
                }
            }
        }
    }

    if log && spec.fit && series[0].points.len() >= 2 {
        let xs: Vec<f64> = series[0].points.iter().map(|p| 10f64.powf(p.0)).collect();
        let ys: Vec<f64> = series[0].points.iter().map(|p| 10f64.powf(p.1)).collect();
        if let Ok(fit) = fit_log_log(&xs, &ys) {
            let (a, b) = bounds(series[0].points.iter().map(|p| p.0));
            let line = |x: f64| fit.intercept + fit.slope * x;
            let _ = writeln!(
                svg,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-dasharray="6,4"/>"#,
                sx(a),
                sy(line(a)),
                sx(b),
                sy(line(b))
            );
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">slope={:.2}</text>"#,
                LEFT + pw - 10.0,
                TOP + 20.0,
                fit.slope
            );
        }
    }

    if series.len() > 1 {
        let _ = writeln!(svg, r#"<g class="legend">"#);
        for (k, s) in series.iter().enumerate() {
            let y = TOP + 16.0 + 16.0 * k as f64;
            let _ = writeln!(
                svg,
                r#"<rect x="{:.2}" y="{:.2}" width="12" height="8" fill="{}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
                LEFT + 10.0,
                y - 8.0,
                COLORS[k % COLORS.len()],
                LEFT + 28.0,
                y,
                escape(&s.label)
            );
        }
        let _ = writeln!(svg, "</g>");
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn min_gap(points: &[(f64, f64)]) -> f64 {
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    let gap = xs.windows(2).map(|w| w[1] - w[0]).filter(|g| *g > 0.0).fold(f64::INFINITY, f64::min);
    if gap.is_finite() {
        gap
    } else {
        1.0
    }
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-2..1e4).contains(&a) {
        format!("{v:.3}").trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
