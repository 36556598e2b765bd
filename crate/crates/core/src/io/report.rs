//! Versioned JSON reports written by every `rel` command.
//!
//! Each report is an envelope `{format, version, command, settings, input,
//! result}`. Field order is fixed by the struct definitions and floats are
//! written in shortest round-trip form, so identical inputs give
//! byte-identical output.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::belief::{FinalizeMode, Weighting};
use crate::eb::{FitResult, HyperParams, PredictiveQuery};
use crate::er::CombinationDiagnostics;
use crate::error::{Error, Result};
use crate::io::assessment::RawAssessment;
use crate::io::observations::{RawObservations, RawUnit};

/// Format tag carried by every report.
pub const REPORT_FORMAT: &str = "relfuse-report/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report<S, I, R> {
    pub format: String,
    pub version: String,
    pub command: String,
    pub settings: S,
    pub input: I,
    pub result: R,
}

impl<S: Serialize, I: Serialize, R: Serialize> Report<S, I, R> {
    pub fn new(command: &str, settings: S, input: I, result: R) -> Self {
        Self {
            format: REPORT_FORMAT.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            settings,
            input,
            result,
        }
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// File name of `path`, used to identify inputs without making reports
/// depend on the working directory.
pub fn source_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

// er assess

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErSettings {
    pub mode: FinalizeMode,
    pub weighting: Weighting,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErInput {
    pub source: String,
    pub assessment: RawAssessment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErNodeReport {
    pub id: String,
    pub path: String,
    pub beliefs: Vec<f64>,
    pub unassigned: f64,
    pub score_interval: [f64; 2],
    pub steps: Vec<CombinationDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErResult {
    pub grades: Vec<String>,
    pub utilities: Vec<f64>,
    pub root: String,
    pub beliefs: Vec<f64>,
    pub unassigned: f64,
    pub score_interval: [f64; 2],
    /// Internal nodes in pre-order, root first.
    pub nodes: Vec<ErNodeReport>,
}

pub type ErReport = Report<ErSettings, ErInput, ErResult>;

// eb fit

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub parameter_box: [f64; 2],
    pub gradient_tolerance: f64,
    pub value_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitInput {
    pub source: String,
    pub observations: RawObservations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub fit: FitResult,
    /// Prior mean of Θ at the estimate.
    pub prior_mean: f64,
}

pub type FitReport = Report<FitSettings, FitInput, FitSummary>;

// eb predict

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictSettings {
    pub query: PredictiveQuery,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictInput {
    pub source: String,
    pub unit: RawUnit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorReport {
    pub params: [f64; 2],
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResult {
    pub estimate: HyperParams,
    pub posterior: PosteriorReport,
    pub prior_reliability: f64,
    pub posterior_reliability: f64,
}

pub type PredictReport = Report<PredictSettings, PredictInput, PredictResult>;

// validate

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ValidateKind {
    Er,
    Eb,
}

/// Pass thresholds of `rel validate`, overridable from a JSON config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Max absolute deviation from the powerset oracle.
    pub er_max_deviation: f64,
    /// Max amount by which the grid best may exceed the optimizer.
    pub eb_grid_gap: f64,
    /// Max total-variation distance between EB and hierarchical posteriors.
    pub eb_total_variation: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            er_max_deviation: 1e-12,
            eb_grid_gap: 1e-3,
            eb_total_variation: 0.1,
        }
    }
}

impl Tolerances {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateSettings {
    pub kind: ValidateKind,
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateInput {
    pub source: String,
}

/// One oracle comparison. Checks without a tolerance are informational.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: Option<f64>,
    pub passed: bool,
}

impl Check {
    pub fn bounded(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            tolerance: Some(tolerance),
            passed: value <= tolerance,
        }
    }

    pub fn info(name: &str, value: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            tolerance: None,
            passed: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateResult {
    pub checks: Vec<Check>,
    pub passed: bool,
}

pub type ValidateReport = Report<ValidateSettings, ValidateInput, ValidateResult>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks_fail_on_nan_and_negative_tolerances() {
        assert!(Check::bounded("x", 0.0, 0.0).passed);
        assert!(!Check::bounded("x", 0.0, -1.0).passed);
        assert!(!Check::bounded("x", 0.0, f64::NAN).passed);
        assert!(!Check::bounded("x", f64::NAN, 1.0).passed);
    }

    #[test]
    fn partial_tolerance_files_keep_defaults() {
        let t: Tolerances = serde_json::from_str(r#"{"eb_grid_gap": 0.5}"#).unwrap();
        assert_eq!(t.eb_grid_gap, 0.5);
        assert_eq!(t.er_max_deviation, 1e-12);
        assert!(serde_json::from_str::<Tolerances>(r#"{"typo": 1}"#).is_err());
    }

    #[test]
    fn shortest_round_trip_floats() {
        let s = serde_json::to_string(&[0.1, 1.0 / 3.0, 1e-12]).unwrap();
        assert_eq!(s, "[0.1,0.3333333333333333,1e-12]");
    }
}
