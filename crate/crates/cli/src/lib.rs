//! Scenario runner for the harmonic map laboratory: TOML scenario files,
//! the check pipeline and report emission behind the `lab` binary.

pub mod error;
pub mod report;
pub mod run;
pub mod scenario;

pub use error::{CliError, ConfigIssue};
pub use report::emit_report;
pub use run::{compute_report, run_scenario, RunReport, RunResult, Summary};
pub use scenario::{parse_check_list, parse_scenario, parse_scenario_str, CheckKind, Scenario};
