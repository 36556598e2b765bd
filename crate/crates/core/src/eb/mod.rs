//! Empirical Bayes inference of unit reliability.
//!
//! Each unit `j` has an unknown parameter (success probability `p_j` or
//! failure rate `λ_j`) drawn from a conjugate prior indexed by two
//! hyperparameters. The hyperparameters are fitted by maximizing the
//! marginal likelihood of all units, and per-unit inference then proceeds
//! with the fitted prior.
//!
//! | family              | unit data                       | prior on Θ          |
//! |---------------------|---------------------------------|---------------------|
//! | `beta-binomial`     | trials `n`, successes `s`       | `Beta(a, b)`        |
//! | `gamma-poisson`     | exposure `t`, events `k`        | `Gamma(α, β)` rate  |
//! | `gamma-exponential` | failures `n`, total time `T`    | `Gamma(α, β)` rate  |

mod fit;
mod marginal;
mod posterior;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fit::{
    fit_hyperparams, moments_init, FitResult, MomentsInit, GRADIENT_TOLERANCE, VALUE_TOLERANCE,
};
pub(crate) use marginal::unit_log_marginal;
pub use marginal::{log_marginal, log_marginal_grad};
pub use posterior::{
    posterior, posterior_predictive_reliability, prior_predictive_reliability, PosteriorParams,
    PredictiveQuery,
};

/// Lower edge of the hyperparameter working box.
pub const BOX_LOW: f64 = 1e-3;
/// Upper edge of the hyperparameter working box.
pub const BOX_HIGH: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorFamily {
    BetaBinomial,
    GammaPoisson,
    GammaExponential,
}

impl std::fmt::Display for PriorFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PriorFamily::BetaBinomial => "beta-binomial",
            PriorFamily::GammaPoisson => "gamma-poisson",
            PriorFamily::GammaExponential => "gamma-exponential",
        })
    }
}

impl PriorFamily {
    /// Names of the two hyperparameters, for messages and reports.
    pub fn param_names(self) -> [&'static str; 2] {
        match self {
            PriorFamily::BetaBinomial => ["a", "b"],
            _ => ["shape", "rate"],
        }
    }
}

/// Prior hyperparameters. `(a, b)` are Beta shapes for the beta-binomial
/// family and `(shape, rate)` of a Gamma for the other two.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub a: f64,
    pub b: f64,
}

impl HyperParams {
    /// Both entries must lie in the working box.
    pub fn new(a: f64, b: f64) -> Result<Self> {
        let p = Self { a, b };
        p.check_box()?;
        Ok(p)
    }

    pub fn check_box(&self) -> Result<()> {
        for (name, value) in [("a", self.a), ("b", self.b)] {
            if !(BOX_LOW..=BOX_HIGH).contains(&value) {
                return Err(Error::OutOfBox {
                    name,
                    value,
                    low: BOX_LOW,
                    high: BOX_HIGH,
                });
            }
        }
        Ok(())
    }

    pub(crate) fn clamped(a: f64, b: f64) -> Self {
        Self {
            a: a.clamp(BOX_LOW, BOX_HIGH),
            b: b.clamp(BOX_LOW, BOX_HIGH),
        }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.a, self.b]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    #[default]
    Observed,
    /// Pseudo-observations elicited from an expert. Treated exactly like
    /// observed data.
    ExpertElicited,
}

/// Family-specific sufficient statistics of one unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UnitCounts {
    Demands { trials: u64, successes: u64 },
    Exposure { exposure: f64, events: u64 },
    Lifetimes { failures: u64, total_time: f64 },
}

impl UnitCounts {
    pub fn family(&self) -> PriorFamily {
        match self {
            UnitCounts::Demands { .. } => PriorFamily::BetaBinomial,
            UnitCounts::Exposure { .. } => PriorFamily::GammaPoisson,
            UnitCounts::Lifetimes { .. } => PriorFamily::GammaExponential,
        }
    }

    /// Crude per-unit estimate of Θ, `None` when the unit carries no information.
    pub(crate) fn empirical_rate(&self) -> Option<f64> {
        match *self {
            UnitCounts::Demands { trials, successes } => {
                (trials > 0).then(|| successes as f64 / trials as f64)
            }
            UnitCounts::Exposure { exposure, events } => Some(events as f64 / exposure),
            UnitCounts::Lifetimes {
                failures,
                total_time,
            } => Some(failures as f64 / total_time),
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        match *self {
            UnitCounts::Demands { trials, successes } if successes > trials => {
                Err(format!("successes {successes} exceed trials {trials}"))
            }
            UnitCounts::Exposure { exposure, .. } if !(exposure.is_finite() && exposure > 0.0) => {
                Err(format!("exposure {exposure} must be positive"))
            }
            UnitCounts::Lifetimes { total_time, .. }
                if !(total_time.is_finite() && total_time > 0.0) =>
            {
                Err(format!("total time {total_time} must be positive"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitData {
    pub id: String,
    pub counts: UnitCounts,
    pub provenance: Provenance,
}

impl UnitData {
    pub fn new(id: impl Into<String>, counts: UnitCounts, provenance: Provenance) -> Result<Self> {
        let id = id.into();
        if id.trim().is_empty() {
            return Err(Error::InvalidObservation("empty unit id".into()));
        }
        counts
            .validate()
            .map_err(|m| Error::InvalidObservation(format!("unit {id:?}: {m}")))?;
        Ok(Self {
            id,
            counts,
            provenance,
        })
    }

    pub fn demands(id: impl Into<String>, trials: u64, successes: u64) -> Result<Self> {
        Self::new(
            id,
            UnitCounts::Demands { trials, successes },
            Provenance::Observed,
        )
    }

    pub fn exposure(id: impl Into<String>, exposure: f64, events: u64) -> Result<Self> {
        Self::new(
            id,
            UnitCounts::Exposure { exposure, events },
            Provenance::Observed,
        )
    }

    pub fn lifetimes(id: impl Into<String>, failures: u64, total_time: f64) -> Result<Self> {
        Self::new(
            id,
            UnitCounts::Lifetimes {
                failures,
                total_time,
            },
            Provenance::Observed,
        )
    }

    pub fn family(&self) -> PriorFamily {
        self.counts.family()
    }
}

/// Units of one family, held in id order so every reduction over units runs
/// in the same order regardless of input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    family: PriorFamily,
    units: Vec<UnitData>,
}

impl ObservationSet {
    pub fn new(family: PriorFamily, mut units: Vec<UnitData>) -> Result<Self> {
        if units.is_empty() {
            return Err(Error::InvalidObservation("no units".into()));
        }
        for u in &units {
            if u.family() != family {
                return Err(Error::FamilyMismatch(format!(
                    "unit {:?} carries {} data in a {} set",
                    u.id,
                    u.family(),
                    family
                )));
            }
        }
        units.sort_by(|x, y| x.id.cmp(&y.id));
        if let Some(w) = units.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::InvalidObservation(format!(
                "duplicate unit id {:?}",
                w[0].id
            )));
        }
        Ok(Self { family, units })
    }

    pub fn family(&self) -> PriorFamily {
        self.family
    }

    pub fn units(&self) -> &[UnitData] {
        &self.units
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn unit(&self, id: &str) -> Option<&UnitData> {
        self.units
            .binary_search_by(|u| u.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.units[i])
    }
}
