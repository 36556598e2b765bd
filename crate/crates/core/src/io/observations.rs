//! Observation files: one prior family and a list of units.
//!
//! ```json
//! {
//!   "family": "beta-binomial",
//!   "units": [
//!     { "id": "P01", "trials": 50, "successes": 12 },
//!     { "id": "P02", "trials": 40, "successes": 9, "provenance": "expert-elicited" }
//!   ]
//! }
//! ```
//!
//! Unit fields by family: `trials`/`successes` (beta-binomial),
//! `exposure`/`events` (gamma-poisson), `failures`/`total_time`
//! (gamma-exponential).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::eb::{ObservationSet, PriorFamily, Provenance, UnitCounts, UnitData};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawObservations {
    pub family: PriorFamily,
    pub units: Vec<RawUnit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RawUnit {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub successes: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exposure: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub events: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failures: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_time: Option<f64>,
    #[serde(default)]
    pub provenance: Provenance,
}

impl RawUnit {
    fn counts(&self, family: PriorFamily) -> Result<UnitCounts> {
        let missing = |field: &str| {
            Error::InvalidObservation(format!(
                "unit {:?}: missing {field:?} for {family}",
                self.id
            ))
        };
        let foreign = |present: bool| -> Result<()> {
            if present {
                Err(Error::InvalidObservation(format!(
                    "unit {:?}: fields from another family in a {family} file",
                    self.id
                )))
            } else {
                Ok(())
            }
        };
        match family {
            PriorFamily::BetaBinomial => {
                foreign(
                    self.exposure.is_some()
                        || self.events.is_some()
                        || self.failures.is_some()
                        || self.total_time.is_some(),
                )?;
                Ok(UnitCounts::Demands {
                    trials: self.trials.ok_or_else(|| missing("trials"))?,
                    successes: self.successes.ok_or_else(|| missing("successes"))?,
                })
            }
            PriorFamily::GammaPoisson => {
                foreign(
                    self.trials.is_some()
                        || self.successes.is_some()
                        || self.failures.is_some()
                        || self.total_time.is_some(),
                )?;
                Ok(UnitCounts::Exposure {
                    exposure: self.exposure.ok_or_else(|| missing("exposure"))?,
                    events: self.events.ok_or_else(|| missing("events"))?,
                })
            }
            PriorFamily::GammaExponential => {
                foreign(
                    self.trials.is_some()
                        || self.successes.is_some()
                        || self.exposure.is_some()
                        || self.events.is_some(),
                )?;
                Ok(UnitCounts::Lifetimes {
                    failures: self.failures.ok_or_else(|| missing("failures"))?,
                    total_time: self.total_time.ok_or_else(|| missing("total_time"))?,
                })
            }
        }
    }

    pub fn from_unit(unit: &UnitData) -> Self {
        let mut raw = RawUnit {
            id: unit.id.clone(),
            provenance: unit.provenance,
            ..Default::default()
        };
        match unit.counts {
            UnitCounts::Demands { trials, successes } => {
                raw.trials = Some(trials);
                raw.successes = Some(successes);
            }
            UnitCounts::Exposure { exposure, events } => {
                raw.exposure = Some(exposure);
                raw.events = Some(events);
            }
            UnitCounts::Lifetimes {
                failures,
                total_time,
            } => {
                raw.failures = Some(failures);
                raw.total_time = Some(total_time);
            }
        }
        raw
    }

    pub fn to_unit(&self, family: PriorFamily) -> Result<UnitData> {
        UnitData::new(self.id.clone(), self.counts(family)?, self.provenance)
    }
}

impl RawObservations {
    pub fn from_set(set: &ObservationSet) -> Self {
        Self {
            family: set.family(),
            units: set.units().iter().map(RawUnit::from_unit).collect(),
        }
    }
}

impl TryFrom<&RawObservations> for ObservationSet {
    type Error = Error;

    fn try_from(raw: &RawObservations) -> Result<Self> {
        let units = raw
            .units
            .iter()
            .map(|u| u.to_unit(raw.family))
            .collect::<Result<Vec<_>>>()?;
        ObservationSet::new(raw.family, units)
    }
}

pub fn observations_to_json(set: &ObservationSet) -> String {
    serde_json::to_string_pretty(&RawObservations::from_set(set)).expect("observations serialize")
}

pub fn parse_observations_str(text: &str) -> Result<ObservationSet> {
    let raw: RawObservations =
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    ObservationSet::try_from(&raw)
}

pub fn parse_observations(path: impl AsRef<Path>) -> Result<ObservationSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
    parse_observations_str(&text).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}
