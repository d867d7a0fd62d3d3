//! Reproduction scenarios for the multi-mode Rabi model: configuration,
//! execution, CSV/SVG output and run manifests.

pub mod config;
pub mod error;
pub mod manifest;
pub mod scenarios;
pub mod svg;

pub use config::{parse_args, resolve, Command, Scenario, ScenarioSpec};
pub use error::CliError;
pub use manifest::RunManifest;
pub use scenarios::run;
