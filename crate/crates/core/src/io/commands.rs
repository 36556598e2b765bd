//! The work behind each `rel` subcommand, returning reports rather than
//! printing so the binary stays a thin shell.

use std::path::Path;

use crate::belief::{
    expected_score_interval, AggregationConfig, AttributeNode, BeliefDistribution, FinalizeMode,
};
use crate::eb::{
    fit_hyperparams, posterior, prior_predictive_reliability, ObservationSet, PredictiveQuery,
    PriorFamily, BOX_HIGH, BOX_LOW, GRADIENT_TOLERANCE, VALUE_TOLERANCE,
};
use crate::er::aggregate_tree;
use crate::error::{Error, Result};
use crate::io::assessment::{parse_assessment, Assessment};
use crate::io::observations::{parse_observations, RawObservations, RawUnit};
use crate::io::report::*;
use crate::oracles::{
    aggregate_tree_powerset, discretize_conjugate, grid_marginal_argmax, HierarchicalMixture,
    HyperPrior, DEFAULT_RESOLUTION,
};

/// Coarse resolution used for the quadrature refinement check.
pub const COARSE_RESOLUTION: usize = 100;

fn preorder<'a>(node: &'a AttributeNode, path: String, out: &mut Vec<(&'a AttributeNode, String)>) {
    if node.is_leaf() {
        return;
    }
    out.push((node, path.clone()));
    for c in node.children() {
        preorder(c, format!("{path}/{}", c.id), out);
    }
}

/// Aggregates a parsed assessment into a report.
pub fn assess(assessment: &Assessment, source: &str, mode: FinalizeMode) -> Result<ErReport> {
    let config = AggregationConfig::with_mode(mode).weighting(assessment.weighting);
    let frame = &assessment.frame;
    let result = aggregate_tree(&assessment.root, frame, &config)?;
    let interval = |b: &BeliefDistribution| -> Result<[f64; 2]> {
        let (lo, hi) = expected_score_interval(frame, b)?;
        Ok([lo, hi])
    };

    let mut internal = Vec::new();
    preorder(&assessment.root, assessment.root.id.clone(), &mut internal);
    let nodes = internal
        .into_iter()
        .map(|(node, path)| {
            let r = &result.per_node[&node.id];
            Ok(ErNodeReport {
                id: node.id.clone(),
                path,
                beliefs: r.beliefs.beliefs().to_vec(),
                unassigned: r.unassigned,
                score_interval: interval(&r.beliefs)?,
                steps: r.diagnostics.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Report::new(
        "er assess",
        ErSettings {
            mode,
            weighting: assessment.weighting,
            tolerance: config.tolerance,
        },
        ErInput {
            source: source.to_string(),
            assessment: assessment.to_raw(),
        },
        ErResult {
            grades: frame.labels().to_vec(),
            utilities: frame.utilities().to_vec(),
            root: assessment.root.id.clone(),
            beliefs: result.combined_beliefs.beliefs().to_vec(),
            unassigned: result.unassigned,
            score_interval: interval(&result.combined_beliefs)?,
            nodes,
        },
    ))
}

pub fn cmd_er_assess(path: &Path, mode: FinalizeMode) -> Result<ErReport> {
    assess(&parse_assessment(path)?, &source_name(path), mode)
}

fn prior_mean(family: PriorFamily, a: f64, b: f64) -> f64 {
    match family {
        PriorFamily::BetaBinomial => a / (a + b),
        _ => a / b,
    }
}

pub fn fit_report(obs: &ObservationSet, source: &str) -> Result<FitReport> {
    let fit = fit_hyperparams(obs)?;
    let mean = prior_mean(fit.family, fit.estimate.a, fit.estimate.b);
    Ok(Report::new(
        "eb fit",
        FitSettings {
            parameter_box: [BOX_LOW, BOX_HIGH],
            gradient_tolerance: GRADIENT_TOLERANCE,
            value_tolerance: VALUE_TOLERANCE,
        },
        FitInput {
            source: source.to_string(),
            observations: RawObservations::from_set(obs),
        },
        FitSummary {
            fit,
            prior_mean: mean,
        },
    ))
}

pub fn cmd_eb_fit(path: &Path) -> Result<FitReport> {
    fit_report(&parse_observations(path)?, &source_name(path))
}

/// Reads a report written by `rel eb fit`.
pub fn read_fit_report(path: &Path) -> Result<FitReport> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
    let report: FitReport = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: not a fit report: {e}", path.display())))?;
    if report.format != REPORT_FORMAT || report.command != "eb fit" {
        return Err(Error::Parse(format!(
            "{}: expected a {REPORT_FORMAT} \"eb fit\" report",
            path.display()
        )));
    }
    report.result.fit.estimate.check_box()?;
    Ok(report)
}

pub fn predict(
    fit: &FitReport,
    source: &str,
    unit_id: &str,
    mission_time: Option<f64>,
) -> Result<PredictReport> {
    let obs = ObservationSet::try_from(&fit.input.observations)?;
    let unit = obs.unit(unit_id).ok_or_else(|| {
        Error::InvalidObservation(format!("unit {unit_id:?} not found in the fit"))
    })?;
    let family = obs.family();
    let query = match (family, mission_time) {
        (PriorFamily::BetaBinomial, None) => PredictiveQuery::NextDemand,
        (PriorFamily::BetaBinomial, Some(_)) => {
            return Err(Error::FamilyMismatch(
                "--mission-time applies to gamma families only".into(),
            ))
        }
        (_, Some(t)) => PredictiveQuery::MissionSurvival { mission_time: t },
        (_, None) => {
            return Err(Error::FamilyMismatch(format!(
                "{family} predictions need --mission-time"
            )))
        }
    };
    let estimate = fit.result.fit.estimate;
    let post = posterior(family, &estimate, unit)?;
    Ok(Report::new(
        "eb predict",
        PredictSettings { query },
        PredictInput {
            source: source.to_string(),
            unit: RawUnit::from_unit(unit),
        },
        PredictResult {
            estimate,
            posterior: PosteriorReport {
                params: post.params,
                mean: post.mean(),
                variance: post.variance(),
            },
            prior_reliability: prior_predictive_reliability(family, &estimate, &query)?,
            posterior_reliability: post.reliability(&query)?,
        },
    ))
}

pub fn cmd_eb_predict(
    fit_path: &Path,
    unit_id: &str,
    mission_time: Option<f64>,
) -> Result<PredictReport> {
    let fit = read_fit_report(fit_path)?;
    predict(&fit, &source_name(fit_path), unit_id, mission_time)
}

/// Largest deviation of the engine from the powerset oracle over every
/// internal node, in both finalization modes.
pub fn er_oracle_deviation(assessment: &Assessment) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for mode in [FinalizeMode::Raw, FinalizeMode::Proportional] {
        let config = AggregationConfig::with_mode(mode).weighting(assessment.weighting);
        let engine = aggregate_tree(&assessment.root, &assessment.frame, &config)?;
        let oracle = aggregate_tree_powerset(
            &assessment.root,
            &assessment.frame,
            mode,
            assessment.weighting,
        )?;
        for (id, node) in &engine.per_node {
            let reference = oracle
                .get(id)
                .ok_or_else(|| Error::Quadrature(format!("oracle is missing node {id:?}")))?;
            for (x, y) in node.beliefs.beliefs().iter().zip(&reference.beliefs) {
                worst = worst.max((x - y).abs());
            }
            worst = worst.max((node.unassigned - reference.unassigned).abs());
        }
    }
    Ok(worst)
}

/// Metrics of the EB oracle comparisons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EbOracleMetrics {
    /// Grid best log marginal minus the optimizer's value.
    pub grid_gap: f64,
    /// Max over units of the TV distance between EB and hierarchical posteriors.
    pub total_variation: f64,
    /// Max over units of the TV distance between hierarchical posteriors at
    /// the coarse and default hyperprior resolutions.
    pub refinement: f64,
}

pub fn eb_oracle_metrics(obs: &ObservationSet) -> Result<EbOracleMetrics> {
    let fit = fit_hyperparams(obs)?;
    let fine = HyperPrior::working_box(DEFAULT_RESOLUTION)?;
    let (_, grid_best) = grid_marginal_argmax(obs, &fine)?;
    let mixture = HierarchicalMixture::new(obs, &fine)?;
    let coarse = HierarchicalMixture::new(obs, &HyperPrior::working_box(COARSE_RESOLUTION)?)?;
    let mut total_variation: f64 = 0.0;
    let mut refinement: f64 = 0.0;
    let mut seen = Vec::new();
    for unit in obs.units() {
        // Units with equal counts have equal posteriors.
        if seen.contains(&unit.counts) {
            continue;
        }
        seen.push(unit.counts);
        let theta = mixture.theta_grid(unit);
        let hier = mixture.posterior_on(unit, &theta)?;
        let eb = discretize_conjugate(&posterior(obs.family(), &fit.estimate, unit)?, &theta);
        total_variation = total_variation.max(hier.total_variation(&eb));
        refinement = refinement.max(hier.total_variation(&coarse.posterior_on(unit, &theta)?));
    }
    Ok(EbOracleMetrics {
        grid_gap: grid_best - fit.log_marginal,
        total_variation,
        refinement,
    })
}

pub fn cmd_validate(
    path: &Path,
    kind: ValidateKind,
    tolerances: Tolerances,
) -> Result<ValidateReport> {
    let checks = match kind {
        ValidateKind::Er => {
            let deviation = er_oracle_deviation(&parse_assessment(path)?)?;
            vec![Check::bounded(
                "er_max_deviation",
                deviation,
                tolerances.er_max_deviation,
            )]
        }
        ValidateKind::Eb => {
            let m = eb_oracle_metrics(&parse_observations(path)?)?;
            vec![
                Check::bounded("eb_grid_gap", m.grid_gap, tolerances.eb_grid_gap),
                Check::bounded(
                    "eb_total_variation",
                    m.total_variation,
                    tolerances.eb_total_variation,
                ),
                Check::info("eb_grid_refinement", m.refinement),
            ]
        }
    };
    let passed = checks.iter().all(|c| c.passed);
    Ok(Report::new(
        "validate",
        ValidateSettings { kind, tolerances },
        ValidateInput {
            source: source_name(path),
        },
        ValidateResult { checks, passed },
    ))
}
