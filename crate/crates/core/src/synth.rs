//! Seeded synthetic observation sets.
//!
//! Used for the shipped example data and for Monte Carlo tests. Streams come
//! from ChaCha8 so a seed reproduces the same data on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Binomial, Distribution, Gamma, Poisson};

use crate::eb::{ObservationSet, PriorFamily, Provenance, UnitCounts, UnitData};
use crate::error::{Error, Result};

/// Seed of the default scenario.
pub const DEFAULT_SEED: u64 = 2006;
/// Units in the default scenario.
pub const DEFAULT_UNITS: usize = 200;
/// Demands per unit in the default scenario.
pub const DEFAULT_TRIALS: u64 = 50;
/// True prior of the default scenario.
pub const DEFAULT_PRIOR: (f64, f64) = (2.0, 5.0);
/// The last this-many units of the default scenario are tagged as elicited.
pub const DEFAULT_ELICITED: usize = 10;

fn bad(e: impl std::fmt::Display) -> Error {
    Error::InvalidObservation(e.to_string())
}

fn unit_id(i: usize) -> String {
    format!("U{i:04}")
}

/// `units` units with `p_j ~ Beta(a, b)` and `s_j ~ Binomial(trials, p_j)`.
pub fn beta_binomial(
    seed: u64,
    units: usize,
    trials: u64,
    a: f64,
    b: f64,
) -> Result<ObservationSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prior = Beta::new(a, b).map_err(bad)?;
    let data = (0..units)
        .map(|i| {
            let p: f64 = prior.sample(&mut rng);
            let s = Binomial::new(trials, p).map_err(bad)?.sample(&mut rng);
            UnitData::demands(unit_id(i), trials, s)
        })
        .collect::<Result<Vec<_>>>()?;
    ObservationSet::new(PriorFamily::BetaBinomial, data)
}

/// `units` units with `λ_j ~ Gamma(shape, rate)` observed over `exposure`
/// with Poisson event counts.
pub fn gamma_poisson(
    seed: u64,
    units: usize,
    exposure: f64,
    shape: f64,
    rate: f64,
) -> Result<ObservationSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prior = Gamma::new(shape, 1.0 / rate).map_err(bad)?;
    let data = (0..units)
        .map(|i| {
            let lambda: f64 = prior.sample(&mut rng);
            let k: f64 = if lambda * exposure > 0.0 {
                Poisson::new(lambda * exposure)
                    .map_err(bad)?
                    .sample(&mut rng)
            } else {
                0.0
            };
            UnitData::exposure(unit_id(i), exposure, k as u64)
        })
        .collect::<Result<Vec<_>>>()?;
    ObservationSet::new(PriorFamily::GammaPoisson, data)
}

/// The reference beta-binomial scenario: 200 units of 50 demands each drawn
/// from `Beta(2, 5)`, with the last ten units tagged as expert-elicited.
pub fn default_scenario() -> Result<ObservationSet> {
    let base = beta_binomial(
        DEFAULT_SEED,
        DEFAULT_UNITS,
        DEFAULT_TRIALS,
        DEFAULT_PRIOR.0,
        DEFAULT_PRIOR.1,
    )?;
    let units = base
        .units()
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let provenance = if i >= DEFAULT_UNITS - DEFAULT_ELICITED {
                Provenance::ExpertElicited
            } else {
                Provenance::Observed
            };
            UnitData::new(u.id.clone(), u.counts, provenance)
        })
        .collect::<Result<Vec<_>>>()?;
    ObservationSet::new(PriorFamily::BetaBinomial, units)
}

/// Units whose counts match `counts` except for the id.
pub fn replicate(counts: UnitCounts, units: usize) -> Result<Vec<UnitData>> {
    (0..units)
        .map(|i| UnitData::new(unit_id(i), counts, Provenance::Observed))
        .collect()
}
