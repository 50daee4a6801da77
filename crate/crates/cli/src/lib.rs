//! Batch front end for `nhp-core`: scenario files in, CSV traces and JSON
//! verdicts out.

pub mod catalog;
pub mod config;
pub mod corpus;
pub mod run;

pub use catalog::list_catalog;
pub use config::{parse_config, Check, ScenarioConfig};
pub use corpus::run_corpus;
pub use run::{run_scenario, CliError, RunOptions, ScenarioReport, Status};
