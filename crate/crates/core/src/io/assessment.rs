//! Assessment files: a grade frame and a weighted attribute tree.
//!
//! ```json
//! {
//!   "grades": ["poor", "indifferent", "average", "good", "excellent"],
//!   "utilities": [0.0, 0.25, 0.5, 0.75, 1.0],
//!   "weighting": "normalized",
//!   "root": {
//!     "id": "motorcycle",
//!     "children": [
//!       { "id": "engine", "weight": 0.4, "beliefs": [0, 0.1, 0.3, 0.5, 0.1] }
//!     ]
//!   }
//! }
//! ```
//!
//! `utilities` and `weighting` are optional; `weight` defaults to 1. Every
//! node carries exactly one of `beliefs` (leaf) or `children` (internal).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::belief::{AttributeNode, BeliefDistribution, GradeFrame, NodePayload, Weighting};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawAssessment {
    pub grades: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utilities: Option<Vec<f64>>,
    #[serde(default)]
    pub weighting: Weighting,
    pub root: RawNode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawNode {
    pub id: String,
    #[serde(default = "unit_weight")]
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beliefs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub children: Option<Vec<RawNode>>,
}

fn unit_weight() -> f64 {
    1.0
}

/// A parsed and validated assessment.
#[derive(Debug, Clone, PartialEq)]
pub struct Assessment {
    pub frame: GradeFrame,
    pub root: AttributeNode,
    pub weighting: Weighting,
}

impl Assessment {
    pub fn to_raw(&self) -> RawAssessment {
        RawAssessment {
            grades: self.frame.labels().to_vec(),
            utilities: Some(self.frame.utilities().to_vec()),
            weighting: self.weighting,
            root: node_to_raw(&self.root),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_raw()).expect("assessment serializes")
    }
}

fn node_to_raw(node: &AttributeNode) -> RawNode {
    match &node.payload {
        NodePayload::Leaf(b) => RawNode {
            id: node.id.clone(),
            weight: node.weight,
            beliefs: Some(b.beliefs().to_vec()),
            children: None,
        },
        NodePayload::Children(c) => RawNode {
            id: node.id.clone(),
            weight: node.weight,
            beliefs: None,
            children: Some(c.iter().map(node_to_raw).collect()),
        },
    }
}

fn build_node(raw: &RawNode, path: &str, grades: usize) -> Result<AttributeNode> {
    match (&raw.beliefs, &raw.children) {
        (Some(_), Some(_)) => Err(Error::tree(path, "node has both beliefs and children")),
        (None, None) => Err(Error::tree(path, "node has neither beliefs nor children")),
        (Some(beliefs), None) => {
            let belief = BeliefDistribution::new(grades, beliefs.clone())
                .map_err(|e| Error::tree(path, e.to_string()))?;
            Ok(AttributeNode::leaf(raw.id.clone(), raw.weight, belief))
        }
        (None, Some(children)) => {
            let built = children
                .iter()
                .map(|c| build_node(c, &format!("{path}/{}", c.id), grades))
                .collect::<Result<Vec<_>>>()?;
            Ok(AttributeNode::internal(raw.id.clone(), raw.weight, built))
        }
    }
}

impl TryFrom<RawAssessment> for Assessment {
    type Error = Error;

    fn try_from(raw: RawAssessment) -> Result<Self> {
        let frame = GradeFrame::new(raw.grades, raw.utilities)?;
        let root = build_node(&raw.root, &raw.root.id, frame.len())?;
        root.validate(&frame)?;
        if raw.weighting == Weighting::Absolute {
            check_absolute(&root, &root.id)?;
        }
        Ok(Self {
            frame,
            root,
            weighting: raw.weighting,
        })
    }
}

fn check_absolute(node: &AttributeNode, path: &str) -> Result<()> {
    for c in node.children() {
        let child_path = format!("{path}/{}", c.id);
        if c.weight > 1.0 {
            return Err(Error::tree(
                &child_path,
                format!("absolute weight {} exceeds 1", c.weight),
            ));
        }
        check_absolute(c, &child_path)?;
    }
    Ok(())
}

pub fn parse_assessment_str(text: &str) -> Result<Assessment> {
    let raw: RawAssessment = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    Assessment::try_from(raw)
}

/// Reads and validates an assessment file. Syntax errors carry line and
/// column, semantic errors the node path.
pub fn parse_assessment(path: impl AsRef<Path>) -> Result<Assessment> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
    parse_assessment_str(&text).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}
