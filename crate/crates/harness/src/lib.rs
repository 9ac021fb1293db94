//! Scenario files, orchestration and report emission for the `rhl` tool.

pub mod config;
pub mod output;
pub mod run;
pub mod suite;

pub use config::{load_config, parse_config, ConfigError, Scenario};
pub use output::{write_report, SCHEMAS};
pub use run::{run_scenario, RunReport};
