//! Library side of the `orlicz-risk` command-line tool: scenario loading, the five
//! commands and report writing. The binary is a thin wrapper around [`commands::run`].

pub mod commands;
pub mod report;
pub mod scenario;

pub use commands::{run, Command, RunError, RunOutput, Settings};
pub use scenario::{Scenario, ScenarioError};
