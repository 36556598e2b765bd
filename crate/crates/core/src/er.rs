//! Evidential reasoning aggregation.
//!
//! Each attribute's belief distribution is discounted by its weight into a
//! mass function whose focal elements are the singleton grades and the whole
//! frame. The part of the mass not committed to any grade (from the weight
//! discount or from an incomplete assessment) sits on the frame as ignorance.
//! Attributes are then combined pairwise with Dempster's rule and the
//! combined singleton masses are read off as the aggregated beliefs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::belief::{
    AggregationConfig, AttributeNode, BeliefDistribution, FinalizeMode, GradeFrame, MassFunction,
    NodePayload, Weighting,
};
use crate::error::{Error, Result};

/// Conflict removed by one pairwise combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombinationDiagnostics {
    /// Mass the product assigns to pairs of distinct grades.
    pub conflict_mass: f64,
    /// `1 / (1 - conflict_mass)`.
    pub normalizer: f64,
}

/// Scales sibling weights to sum to one.
pub fn normalize_weights(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.is_empty() {
        return Err(Error::InvalidWeight("no weights".into()));
    }
    if let Some(bad) = raw.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::InvalidWeight(format!(
            "weight {bad} must be finite and non-negative"
        )));
    }
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidWeight("all weights are zero".into()));
    }
    Ok(raw.iter().map(|w| w / total).collect())
}

/// Discounts a belief distribution by `weight`: `m_n = ω β_n` and the
/// remainder `1 - ω Σβ` goes to the frame.
pub fn assign_masses(weight: f64, belief: &BeliefDistribution) -> Result<MassFunction> {
    if !(0.0..=1.0).contains(&weight) {
        return Err(Error::InvalidWeight(format!(
            "weight {weight} outside [0, 1]"
        )));
    }
    let singletons: Vec<f64> = belief.beliefs().iter().map(|b| weight * b).collect();
    let committed: f64 = singletons.iter().sum();
    let frame = (1.0 - committed).max(0.0);
    MassFunction::new(singletons, frame)
}

/// Dempster's rule restricted to singleton and frame focal elements.
///
/// The arithmetic is arranged so that swapping `a` and `b` gives bitwise
/// identical output.
pub fn combine_pair(
    a: &MassFunction,
    b: &MassFunction,
) -> Result<(MassFunction, CombinationDiagnostics)> {
    if a.len() != b.len() {
        return Err(Error::InvalidMass(format!(
            "frames differ: {} vs {} grades",
            a.len(),
            b.len()
        )));
    }
    let (am, bm) = (a.singletons(), b.singletons());
    let (ah, bh) = (a.frame(), b.frame());

    let unnormalized: Vec<f64> = am
        .iter()
        .zip(bm)
        .map(|(x, y)| x * y + (x * bh + ah * y))
        .collect();
    let frame_product = ah * bh;
    let agreement = unnormalized.iter().sum::<f64>() + frame_product;

    let mut conflict = 0.0;
    for t in 0..am.len() {
        for j in (t + 1)..am.len() {
            conflict += am[t] * bm[j] + am[j] * bm[t];
        }
    }

    if agreement <= 0.0 {
        return Err(Error::TotalConflict {
            path: String::new(),
            step: 0,
        });
    }
    let singletons: Vec<f64> = unnormalized.iter().map(|m| m / agreement).collect();
    let combined = MassFunction::from_parts(singletons, frame_product / agreement);
    Ok((
        combined,
        CombinationDiagnostics {
            conflict_mass: conflict,
            normalizer: 1.0 / agreement,
        },
    ))
}

/// Left fold of [`combine_pair`] in input order. A total conflict reports the
/// index of the mass that triggered it.
pub fn fold_attributes(
    masses: &[MassFunction],
) -> Result<(MassFunction, Vec<CombinationDiagnostics>)> {
    let (first, rest) = masses
        .split_first()
        .ok_or_else(|| Error::InvalidMass("nothing to combine".into()))?;
    let mut acc = first.clone();
    let mut diagnostics = Vec::with_capacity(rest.len());
    for (i, m) in rest.iter().enumerate() {
        let (next, diag) = combine_pair(&acc, m).map_err(|e| match e {
            Error::TotalConflict { path, .. } => Error::TotalConflict { path, step: i + 1 },
            other => other,
        })?;
        acc = next;
        diagnostics.push(diag);
    }
    Ok((acc, diagnostics))
}

/// Combined beliefs read off a mass function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finalized {
    pub beliefs: BeliefDistribution,
    pub unassigned: f64,
}

pub fn finalize(combined: &MassFunction, config: &AggregationConfig) -> Result<Finalized> {
    match config.mode {
        FinalizeMode::Raw => Ok(Finalized {
            beliefs: clamp_belief(combined.singletons().to_vec(), config.tolerance)?,
            unassigned: combined.frame(),
        }),
        FinalizeMode::Proportional => {
            let total: f64 = combined.singletons().iter().sum();
            if total <= 0.0 {
                return Err(Error::VacuousFinalization);
            }
            let beliefs = combined.singletons().iter().map(|m| m / total).collect();
            Ok(Finalized {
                beliefs: clamp_belief(beliefs, config.tolerance)?,
                unassigned: 0.0,
            })
        }
    }
}

fn clamp_belief(beliefs: Vec<f64>, tolerance: f64) -> Result<BeliefDistribution> {
    let total: f64 = beliefs.iter().sum();
    if total > 1.0 + tolerance {
        return Err(Error::InvalidBelief(format!(
            "combined beliefs sum to {total}"
        )));
    }
    let beliefs = beliefs.into_iter().map(|b| b.min(1.0)).collect();
    BeliefDistribution::from_vec(beliefs)
}

/// Aggregate at one internal node of the tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeResult {
    pub path: String,
    pub beliefs: BeliefDistribution,
    pub unassigned: f64,
    pub diagnostics: Vec<CombinationDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationResult {
    pub combined_beliefs: BeliefDistribution,
    pub unassigned: f64,
    /// Every internal node (and the root), keyed by node id.
    pub per_node: BTreeMap<String, NodeResult>,
    /// Fold diagnostics at the root.
    pub diagnostics: Vec<CombinationDiagnostics>,
}

/// Bottom-up aggregation. Intermediate nodes are finalized in raw mode so
/// their unassigned mass carries up as ignorance; `config.mode` applies at the
/// root only.
pub fn aggregate_tree(
    root: &AttributeNode,
    frame: &GradeFrame,
    config: &AggregationConfig,
) -> Result<AggregationResult> {
    root.validate(frame)?;
    let mut per_node = BTreeMap::new();
    let root_result = match &root.payload {
        NodePayload::Leaf(belief) => {
            let (combined, diagnostics) =
                fold_attributes(&[assign_masses(1.0, belief)?]).map_err(|e| at(e, &root.id))?;
            let fin = finalize(&combined, config).map_err(|e| at(e, &root.id))?;
            NodeResult {
                path: root.id.clone(),
                beliefs: fin.beliefs,
                unassigned: fin.unassigned,
                diagnostics,
            }
        }
        NodePayload::Children(children) => {
            aggregate_children(children, &root.id, config, &mut per_node)?
        }
    };
    per_node.insert(root.id.clone(), root_result.clone());
    Ok(AggregationResult {
        combined_beliefs: root_result.beliefs,
        unassigned: root_result.unassigned,
        per_node,
        diagnostics: root_result.diagnostics,
    })
}

fn aggregate_children(
    children: &[AttributeNode],
    path: &str,
    config: &AggregationConfig,
    per_node: &mut BTreeMap<String, NodeResult>,
) -> Result<NodeResult> {
    let raw_config = AggregationConfig {
        mode: FinalizeMode::Raw,
        ..*config
    };
    let mut beliefs = Vec::with_capacity(children.len());
    for child in children {
        match &child.payload {
            NodePayload::Leaf(b) => beliefs.push(b.clone()),
            NodePayload::Children(grandchildren) => {
                let child_path = format!("{path}/{}", child.id);
                let sub = aggregate_children(grandchildren, &child_path, &raw_config, per_node)?;
                beliefs.push(sub.beliefs.clone());
                per_node.insert(child.id.clone(), sub);
            }
        }
    }
    let raw_weights: Vec<f64> = children.iter().map(|c| c.weight).collect();
    let weights = match config.weighting {
        Weighting::Normalized => normalize_weights(&raw_weights).map_err(|e| at(e, path))?,
        Weighting::Absolute => raw_weights,
    };
    let masses = weights
        .iter()
        .zip(&beliefs)
        .map(|(w, b)| assign_masses(*w, b))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| at(e, path))?;
    let (combined, diagnostics) = fold_attributes(&masses).map_err(|e| at(e, path))?;
    let fin = finalize(&combined, config).map_err(|e| at(e, path))?;
    Ok(NodeResult {
        path: path.to_string(),
        beliefs: fin.beliefs,
        unassigned: fin.unassigned,
        diagnostics,
    })
}

fn at(err: Error, path: &str) -> Error {
    match err {
        Error::TotalConflict { step, .. } => Error::TotalConflict {
            path: path.to_string(),
            step,
        },
        Error::InvalidTree { .. } => err,
        other => Error::tree(path, other.to_string()),
    }
}
