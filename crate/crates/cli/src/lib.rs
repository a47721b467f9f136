//! Configuration, orchestration and output formats for the `sdwave` tool.

pub mod config;
pub mod output;
pub mod run;

pub use config::{parse_config, ConfigError, RunConfig};
pub use run::{execute, run, RunManifest};
