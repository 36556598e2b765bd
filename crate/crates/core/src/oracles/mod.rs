//! Independent reference implementations.
//!
//! These are slow and straightforward on purpose: Dempster's rule over the
//! full powerset of grades, exhaustive grid search of the marginal
//! likelihood, and quadrature for posteriors, including the hierarchical
//! posterior that integrates over the hyperparameters instead of plugging in
//! a point estimate. Tests and `rel validate` compare the engines against them.

mod grid;
mod powerset;
mod quadrature;

pub use grid::{grid_marginal_argmax, HyperPrior, DEFAULT_RESOLUTION};
pub use powerset::{
    aggregate_tree_powerset, dempster_combine_powerset, OracleNode, PowersetMass, MAX_GRADES,
};
pub use quadrature::{
    discretize_conjugate, hierarchical_posterior_quadrature, mission_survival_quadrature,
    posterior_moments_quadrature, DiscretePosterior, HierarchicalMixture, QUADRATURE_POINTS,
    THETA_POINTS,
};

use std::collections::BTreeMap;

use crate::eb::{unit_log_marginal, HyperParams, ObservationSet, UnitCounts};

/// Distinct unit counts with their multiplicities, in a fixed order.
/// Units sharing counts contribute identical marginal terms, so the oracles
/// evaluate each distinct term once.
pub(crate) fn grouped_counts(obs: &ObservationSet) -> Vec<(UnitCounts, f64)> {
    let mut groups: BTreeMap<(u64, u64), (UnitCounts, usize)> = BTreeMap::new();
    for u in obs.units() {
        let key = match u.counts {
            UnitCounts::Demands { trials, successes } => (trials, successes),
            UnitCounts::Exposure { exposure, events } => (events, exposure.to_bits()),
            UnitCounts::Lifetimes {
                failures,
                total_time,
            } => (failures, total_time.to_bits()),
        };
        groups.entry(key).or_insert((u.counts, 0)).1 += 1;
    }
    groups.into_values().map(|(c, n)| (c, n as f64)).collect()
}

/// Log marginal likelihood of the grouped data at `phi`.
pub(crate) fn grouped_log_marginal(groups: &[(UnitCounts, f64)], phi: &HyperParams) -> f64 {
    groups
        .iter()
        .map(|(c, n)| n * unit_log_marginal(c, phi.a, phi.b))
        .sum()
}
