//! JSON file formats, reports and the commands behind the `rel` binary.

pub mod assessment;
pub mod commands;
pub mod observations;
pub mod report;

pub use assessment::{parse_assessment, parse_assessment_str, Assessment};
pub use observations::{observations_to_json, parse_observations, parse_observations_str};
pub use report::{Report, Tolerances, ValidateKind, REPORT_FORMAT};
