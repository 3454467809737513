//! Scenario files, the run pipeline and report rendering behind the
//! `recutil` command.

pub mod config;
pub mod report;
pub mod run;

pub use config::{load_config, parse_config, ConfigError, ConfigErrors, ScenarioConfig};
pub use report::{CheckRecord, CheckStatus, RunReport, SCHEMA_VERSION};
pub use run::{run_scenario, RunError};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "RECUTIL_OUT_DIR";
