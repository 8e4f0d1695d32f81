use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use fractal_paths_cli::{emit_plot, parse_config, parse_plot_spec, run_scenario, Table};

#[derive(Parser)]
#[command(name = "fracpaths", version, about = "Run path, deviation and fractal-ensemble scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its outputs plus manifest.json
    Run {
        config: PathBuf,
        /// Override the configured seed
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: the config's `output`, else `out`)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render an SVG from CSV files according to a plot spec
    Plot {
        spec: PathBuf,
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Check a configuration without running it
    Validate { config: PathBuf },
}

const EXIT_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, seed, out } => run(&config, seed, out),
        Command::Plot { spec, csv, out } => match plot(&spec, &csv, &out) {
            Ok(path) => {
                println!("wrote {}", path.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(EXIT_FAILED)
            }
        },
        Command::Validate { config } => match load(&config) {
            Ok(c) => {
                println!("ok: {} ({})", c.name, c.scenario.name());
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
    }
}

fn load(path: &Path) -> Result<fractal_paths_cli::ScenarioConfig, ExitCode> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: reading {}: {e}", path.display());
            return Err(ExitCode::from(EXIT_CONFIG));
        }
    };
    match parse_config(&text) {
        Ok(mut c) => {
            c.resolve_paths(path.parent().unwrap_or(Path::new(".")));
            Ok(c)
        }
        Err(errors) => {
            eprintln!("{}: {} error(s)", path.display(), errors.0.len());
            for e in &errors.0 {
                eprintln!("  {e}");
            }
            Err(ExitCode::from(EXIT_CONFIG))
        }
    }
}

fn run(path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> ExitCode {
    let mut config = match load(path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if let Some(seed) = seed {
        config = config.with_seed(seed);
    }
    let out = out
        .or_else(|| config.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    match run_scenario(&config, &out) {
        Ok(m) if m.ok() => {
            println!("{} ok: {} files in {} ({:.2} s)", m.name, m.files.len(), out.display(), m.wall_time_s);
            ExitCode::SUCCESS
        }
        Ok(m) => {
            eprintln!("{} failed: {}", m.name, m.error.as_deref().unwrap_or("unknown error"));
            ExitCode::from(EXIT_FAILED)
        }
        Err(e) => {
            eprintln!("error: writing outputs to {}: {e}", out.display());
            ExitCode::from(EXIT_FAILED)
        }
    }
}

fn plot(spec_path: &Path, csvs: &[PathBuf], out: &Path) -> anyhow::Result<PathBuf> {
    let text = fs::read_to_string(spec_path).with_context(|| format!("reading {}", spec_path.display()))?;
    let spec = parse_plot_spec(&text).map_err(|e| anyhow::anyhow!("{}:\n{e}", spec_path.display()))?;
    let tables = csvs
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            Ok(Table::parse(&name, &text)?)
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let svg = emit_plot(&tables, &spec)?;
    fs::create_dir_all(out)?;
    let path = out.join(&spec.output);
    fs::write(&path, svg)?;
    Ok(path)
}
