//! Grades, belief distributions, mass functions and attribute hierarchies.
//!
//! Everything here is immutable after construction. Constructors validate
//! their inputs, so a value that exists is a valid one.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on belief and mass sums.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Ordered set of evaluation grades, worst first, with a utility per grade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradeFrame {
    labels: Vec<String>,
    utilities: Vec<f64>,
}

impl GradeFrame {
    /// Builds a frame. Without utilities the grades are spaced evenly on `[0, 1]`.
    pub fn new(labels: Vec<String>, utilities: Option<Vec<f64>>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::InvalidFrame(format!(
                "need at least 2 grades, got {}",
                labels.len()
            )));
        }
        let mut seen = HashSet::new();
        for label in &labels {
            if label.trim().is_empty() {
                return Err(Error::InvalidFrame("empty grade label".into()));
            }
            if !seen.insert(label.as_str()) {
                return Err(Error::InvalidFrame(format!(
                    "duplicate grade label {label:?}"
                )));
            }
        }
        let n = labels.len();
        let utilities = match utilities {
            None => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
            Some(u) => {
                if u.len() != n {
                    return Err(Error::InvalidFrame(format!(
                        "{} utilities for {} grades",
                        u.len(),
                        n
                    )));
                }
                if let Some(bad) = u.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                    return Err(Error::InvalidFrame(format!("utility {bad} outside [0, 1]")));
                }
                if u.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::InvalidFrame(
                        "utilities must be non-decreasing in grade order".into(),
                    ));
                }
                u
            }
        };
        Ok(Self { labels, utilities })
    }

    pub fn from_labels<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        Self::new(
            labels.iter().map(|s| s.as_ref().to_string()).collect(),
            None,
        )
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn utilities(&self) -> &[f64] {
        &self.utilities
    }
}

/// Degrees of belief over the grades of a frame. May be incomplete: the
/// unassigned part is kept as `residual`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefDistribution {
    beliefs: Vec<f64>,
    residual: f64,
}

impl BeliefDistribution {
    /// Validates `beliefs` against a frame size.
    pub fn new(grades: usize, beliefs: Vec<f64>) -> Result<Self> {
        if beliefs.len() != grades {
            return Err(Error::InvalidBelief(format!(
                "{} beliefs for {} grades",
                beliefs.len(),
                grades
            )));
        }
        Self::from_vec(beliefs)
    }

    pub(crate) fn from_vec(beliefs: Vec<f64>) -> Result<Self> {
        if let Some(bad) = beliefs.iter().find(|b| !(0.0..=1.0).contains(*b)) {
            return Err(Error::InvalidBelief(format!("belief {bad} outside [0, 1]")));
        }
        let total: f64 = beliefs.iter().sum();
        if total > 1.0 + SUM_TOLERANCE {
            return Err(Error::InvalidBelief(format!("beliefs sum to {total} > 1")));
        }
        // Within tolerance the residual is clamped; the elicited values are kept.
        let residual = (1.0 - total).clamp(0.0, 1.0);
        Ok(Self { beliefs, residual })
    }

    pub fn beliefs(&self) -> &[f64] {
        &self.beliefs
    }

    /// `1 - Σβ`, clamped to `[0, 1]`.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn len(&self) -> usize {
        self.beliefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beliefs.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.beliefs.iter().sum()
    }
}

/// `make_belief`: a belief distribution validated against `frame`.
pub fn make_belief(frame: &GradeFrame, beliefs: Vec<f64>) -> Result<BeliefDistribution> {
    BeliefDistribution::new(frame.len(), beliefs)
}

/// Expected utility bounds `[s_min, s_max]`: the residual is assigned to the
/// worst grade for the lower bound and to the best grade for the upper one.
pub fn expected_score_interval(
    frame: &GradeFrame,
    belief: &BeliefDistribution,
) -> Result<(f64, f64)> {
    if belief.len() != frame.len() {
        return Err(Error::InvalidBelief(format!(
            "{} beliefs for {} grades",
            belief.len(),
            frame.len()
        )));
    }
    let u = frame.utilities();
    let base: f64 = belief.beliefs().iter().zip(u).map(|(b, u)| b * u).sum();
    let r = belief.residual();
    let lo = (base + r * u[0]).clamp(0.0, 1.0);
    let hi = (base + r * u[u.len() - 1]).clamp(0.0, 1.0);
    Ok((lo, hi.max(lo)))
}

/// Basic probability masses on the singleton grades plus the whole frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassFunction {
    singletons: Vec<f64>,
    frame: f64,
}

impl MassFunction {
    pub fn new(singletons: Vec<f64>, frame: f64) -> Result<Self> {
        if singletons.is_empty() {
            return Err(Error::InvalidMass("no grades".into()));
        }
        if singletons
            .iter()
            .chain(std::iter::once(&frame))
            .any(|m| !m.is_finite() || *m < 0.0)
        {
            return Err(Error::InvalidMass(
                "masses must be finite and non-negative".into(),
            ));
        }
        let total = singletons.iter().sum::<f64>() + frame;
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidMass(format!(
                "masses sum to {total}, expected 1"
            )));
        }
        Ok(Self { singletons, frame })
    }

    /// All mass on the frame: total ignorance.
    pub fn vacuous(grades: usize) -> Self {
        Self {
            singletons: vec![0.0; grades],
            frame: 1.0,
        }
    }

    pub(crate) fn from_parts(singletons: Vec<f64>, frame: f64) -> Self {
        debug_assert!(
            (singletons.iter().sum::<f64>() + frame - 1.0).abs() <= SUM_TOLERANCE,
            "mass not conserved"
        );
        Self { singletons, frame }
    }

    pub fn singletons(&self) -> &[f64] {
        &self.singletons
    }

    /// Mass on the whole frame.
    pub fn frame(&self) -> f64 {
        self.frame
    }

    pub fn len(&self) -> usize {
        self.singletons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.singletons.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.singletons.iter().sum::<f64>() + self.frame
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NodePayload {
    Leaf(BeliefDistribution),
    Children(Vec<AttributeNode>),
}

/// A node in a weighted attribute hierarchy. `weight` is relative to the
/// node's siblings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeNode {
    pub id: String,
    pub weight: f64,
    pub payload: NodePayload,
}

impl AttributeNode {
    pub fn leaf(id: impl Into<String>, weight: f64, belief: BeliefDistribution) -> Self {
        Self {
            id: id.into(),
            weight,
            payload: NodePayload::Leaf(belief),
        }
    }

    pub fn internal(id: impl Into<String>, weight: f64, children: Vec<AttributeNode>) -> Self {
        Self {
            id: id.into(),
            weight,
            payload: NodePayload::Children(children),
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.payload, NodePayload::Leaf(_))
    }

    pub fn children(&self) -> &[AttributeNode] {
        match &self.payload {
            NodePayload::Children(c) => c,
            NodePayload::Leaf(_) => &[],
        }
    }

    /// Checks the whole tree against `frame`. Errors name the node path,
    /// e.g. `root/brakes/feel`.
    pub fn validate(&self, frame: &GradeFrame) -> Result<()> {
        let mut ids = HashSet::new();
        if !(self.weight.is_finite() && self.weight > 0.0) {
            return Err(Error::tree(&self.id, "root weight must be positive"));
        }
        self.validate_inner(frame, &self.id, &mut ids)
    }

    fn validate_inner<'a>(
        &'a self,
        frame: &GradeFrame,
        path: &str,
        ids: &mut HashSet<&'a str>,
    ) -> Result<()> {
        if self.id.trim().is_empty() {
            return Err(Error::tree(path, "empty node id"));
        }
        if !ids.insert(self.id.as_str()) {
            return Err(Error::tree(
                path,
                format!("duplicate node id {:?}", self.id),
            ));
        }
        match &self.payload {
            NodePayload::Leaf(b) => {
                if b.len() != frame.len() {
                    return Err(Error::tree(
                        path,
                        format!("{} beliefs for {} grades", b.len(), frame.len()),
                    ));
                }
            }
            NodePayload::Children(children) => {
                if children.is_empty() {
                    return Err(Error::tree(path, "internal node without children"));
                }
                for c in children {
                    if !c.weight.is_finite() || c.weight < 0.0 {
                        return Err(Error::tree(
                            format!("{path}/{}", c.id),
                            format!("weight {} must be finite and non-negative", c.weight),
                        ));
                    }
                }
                if children.iter().all(|c| c.weight == 0.0) {
                    return Err(Error::tree(path, "all child weights are zero"));
                }
                for c in children {
                    c.validate_inner(frame, &format!("{path}/{}", c.id), ids)?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FinalizeMode {
    /// Combined singleton masses are the beliefs; frame mass stays unassigned.
    #[default]
    Raw,
    /// Singleton masses rescaled to sum to one.
    Proportional,
}

impl std::str::FromStr for FinalizeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(FinalizeMode::Raw),
            "proportional" => Ok(FinalizeMode::Proportional),
            other => Err(Error::Parse(format!("unknown mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for FinalizeMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FinalizeMode::Raw => f.write_str("raw"),
            FinalizeMode::Proportional => f.write_str("proportional"),
        }
    }
}

/// How sibling weights become discount factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// Weights are rescaled to sum to one within each sibling group.
    #[default]
    Normalized,
    /// Weights are used as given and must each lie in `[0, 1]`.
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregationConfig {
    pub mode: FinalizeMode,
    pub tolerance: f64,
    #[serde(default)]
    pub weighting: Weighting,
}

impl AggregationConfig {
    pub fn new(mode: FinalizeMode, tolerance: f64) -> Result<Self> {
        if !(tolerance.is_finite() && tolerance > 0.0) {
            return Err(Error::Parse(format!(
                "tolerance {tolerance} must be positive"
            )));
        }
        Ok(Self {
            mode,
            tolerance,
            weighting: Weighting::Normalized,
        })
    }

    pub fn with_mode(mode: FinalizeMode) -> Self {
        Self {
            mode,
            tolerance: SUM_TOLERANCE,
            weighting: Weighting::Normalized,
        }
    }

    pub fn weighting(self, weighting: Weighting) -> Self {
        Self { weighting, ..self }
    }
}

impl Default for AggregationConfig {
    fn default() -> Self {
        Self::with_mode(FinalizeMode::Raw)
    }
}
