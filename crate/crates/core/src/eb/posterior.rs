use serde::{Deserialize, Serialize};

use super::{FitResult, HyperParams, PriorFamily, UnitCounts, UnitData};
use crate::error::{Error, Result};

/// Conjugate posterior over one unit's Θ: `Beta(a, b)` or `Gamma(shape, rate)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorParams {
    pub family: PriorFamily,
    pub unit_id: String,
    pub params: [f64; 2],
}

impl PosteriorParams {
    pub fn mean(&self) -> f64 {
        let [a, b] = self.params;
        match self.family {
            PriorFamily::BetaBinomial => a / (a + b),
            _ => a / b,
        }
    }

    pub fn variance(&self) -> f64 {
        let [a, b] = self.params;
        match self.family {
            PriorFamily::BetaBinomial => a * b / ((a + b).powi(2) * (a + b + 1.0)),
            _ => a / (b * b),
        }
    }

    /// Design reliability under this distribution for Θ.
    pub fn reliability(&self, query: &PredictiveQuery) -> Result<f64> {
        reliability(self.family, self.params, query)
    }
}

/// What "reliability" means for a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "target", rename_all = "kebab-case")]
pub enum PredictiveQuery {
    /// Probability the next demand succeeds (beta-binomial).
    NextDemand,
    /// Probability of surviving a mission of length `mission_time` (gamma families).
    MissionSurvival { mission_time: f64 },
}

fn reliability(family: PriorFamily, params: [f64; 2], query: &PredictiveQuery) -> Result<f64> {
    let [a, b] = params;
    match (family, *query) {
        (PriorFamily::BetaBinomial, PredictiveQuery::NextDemand) => Ok(a / (a + b)),
        (PriorFamily::BetaBinomial, PredictiveQuery::MissionSurvival { .. }) => Err(
            Error::FamilyMismatch("mission survival needs a gamma family".into()),
        ),
        (_, PredictiveQuery::NextDemand) => Err(Error::FamilyMismatch(format!(
            "next-demand success needs the beta-binomial family, not {family}"
        ))),
        (_, PredictiveQuery::MissionSurvival { mission_time }) => {
            if !(mission_time.is_finite() && mission_time >= 0.0) {
                return Err(Error::InvalidObservation(format!(
                    "mission time {mission_time} must be finite and non-negative"
                )));
            }
            // E[exp(-λt)] under Gamma(a, b) = (b / (b + t))^a.
            Ok((-a * (mission_time / b).ln_1p()).exp().clamp(0.0, 1.0))
        }
    }
}

/// Conjugate update of the prior `phi` with one unit's data.
pub fn posterior(
    family: PriorFamily,
    phi: &HyperParams,
    unit: &UnitData,
) -> Result<PosteriorParams> {
    if unit.family() != family {
        return Err(Error::FamilyMismatch(format!(
            "unit {:?} carries {} data, expected {family}",
            unit.id,
            unit.family()
        )));
    }
    let params = match unit.counts {
        UnitCounts::Demands { trials, successes } => [
            phi.a + successes as f64,
            phi.b + (trials - successes) as f64,
        ],
        UnitCounts::Exposure { exposure, events } => [phi.a + events as f64, phi.b + exposure],
        UnitCounts::Lifetimes {
            failures,
            total_time,
        } => [phi.a + failures as f64, phi.b + total_time],
    };
    Ok(PosteriorParams {
        family,
        unit_id: unit.id.clone(),
        params,
    })
}

/// Reliability under the prior alone.
pub fn prior_predictive_reliability(
    family: PriorFamily,
    phi: &HyperParams,
    query: &PredictiveQuery,
) -> Result<f64> {
    reliability(family, phi.as_array(), query)
}

/// Reliability under a unit's posterior at the fitted hyperparameters.
pub fn posterior_predictive_reliability(
    family: PriorFamily,
    fit: &FitResult,
    unit: &UnitData,
    query: &PredictiveQuery,
) -> Result<f64> {
    posterior(family, &fit.estimate, unit)?.reliability(query)
}
