//! Batch scenario runner for the `fractal-paths` library.

pub mod config;
pub mod manifest;
pub mod plot;
pub mod scenario;

pub use config::{parse_config, ConfigError, ConfigErrors, Scenario, ScenarioConfig};
pub use manifest::{RunManifest, MANIFEST_NAME};
pub use plot::{emit_plot, parse_plot_spec, PlotError, PlotKind, PlotSpec, Table};
pub use scenario::run_scenario;
