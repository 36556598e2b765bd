use std::collections::BTreeMap;

use crate::belief::{
    AttributeNode, FinalizeMode, GradeFrame, MassFunction, NodePayload, Weighting,
};
use crate::error::{Error, Result};

/// Largest frame the powerset oracle accepts.
pub const MAX_GRADES: usize = 16;

/// A mass function over arbitrary subsets of the grades, keyed by bitmask
/// (bit `i` set means grade `i` is in the subset).
#[derive(Debug, Clone, PartialEq)]
pub struct PowersetMass {
    grades: usize,
    masses: BTreeMap<u32, f64>,
}

impl PowersetMass {
    pub fn new(grades: usize, entries: impl IntoIterator<Item = (u32, f64)>) -> Result<Self> {
        if grades == 0 || grades > MAX_GRADES {
            return Err(Error::InvalidMass(format!(
                "powerset frames need 1..={MAX_GRADES} grades, got {grades}"
            )));
        }
        let full = full_mask(grades);
        let mut masses = BTreeMap::new();
        for (set, m) in entries {
            if set == 0 {
                if m != 0.0 {
                    return Err(Error::InvalidMass("mass on the empty set".into()));
                }
                continue;
            }
            if set & !full != 0 {
                return Err(Error::InvalidMass(format!(
                    "subset {set:#b} outside the frame"
                )));
            }
            if !(m.is_finite() && m >= 0.0) {
                return Err(Error::InvalidMass(format!("mass {m} must be non-negative")));
            }
            *masses.entry(set).or_insert(0.0) += m;
        }
        let total: f64 = masses.values().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMass(format!("masses sum to {total}")));
        }
        Ok(Self { grades, masses })
    }

    /// Embeds a singleton-plus-frame mass function.
    pub fn from_mass_function(m: &MassFunction) -> Result<Self> {
        let full = full_mask(m.len());
        let entries = m
            .singletons()
            .iter()
            .enumerate()
            .map(|(i, &v)| (1u32 << i, v))
            .chain(std::iter::once((full, m.frame())));
        Self::new(m.len(), entries)
    }

    pub fn grades(&self) -> usize {
        self.grades
    }

    pub fn mass(&self, set: u32) -> f64 {
        self.masses.get(&set).copied().unwrap_or(0.0)
    }

    pub fn focal_elements(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.masses.iter().map(|(&k, &v)| (k, v))
    }

    /// Singleton masses and frame mass, if no other subset carries mass.
    pub fn to_singletons_and_frame(&self) -> Option<(Vec<f64>, f64)> {
        let full = full_mask(self.grades);
        let mut singletons = vec![0.0; self.grades];
        let mut frame = 0.0;
        for (&set, &m) in &self.masses {
            if set == full {
                frame = m;
            } else if set.count_ones() == 1 {
                singletons[set.trailing_zeros() as usize] = m;
            } else if m != 0.0 {
                return None;
            }
        }
        Some((singletons, frame))
    }
}

fn full_mask(grades: usize) -> u32 {
    if grades == 32 {
        u32::MAX
    } else {
        (1u32 << grades) - 1
    }
}

/// Sums in ascending order so the result does not depend on the order the
/// terms were produced in.
fn ordered_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.into_iter().sum()
}

/// Dempster's rule over the full powerset:
/// `m(C) = Σ_{A∩B=C} a(A) b(B) / (1 - Σ_{A∩B=∅} a(A) b(B))`.
pub fn dempster_combine_powerset(a: &PowersetMass, b: &PowersetMass) -> Result<PowersetMass> {
    if a.grades != b.grades {
        return Err(Error::InvalidMass("frames differ".into()));
    }
    let mut products: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    let mut conflict_terms = Vec::new();
    for (&sa, &ma) in &a.masses {
        for (&sb, &mb) in &b.masses {
            let c = sa & sb;
            if c == 0 {
                conflict_terms.push(ma * mb);
            } else {
                products.entry(c).or_default().push(ma * mb);
            }
        }
    }
    let supported: Vec<(u32, f64)> = products
        .into_iter()
        .map(|(set, terms)| (set, ordered_sum(terms)))
        .collect();
    if supported.iter().all(|(_, m)| *m == 0.0) {
        return Err(Error::TotalConflict {
            path: String::new(),
            step: 0,
        });
    }
    let conflict = ordered_sum(conflict_terms);
    let k = 1.0 / (1.0 - conflict);
    Ok(PowersetMass {
        grades: a.grades,
        masses: supported.into_iter().map(|(s, m)| (s, m * k)).collect(),
    })
}

/// Combined singleton masses and frame mass of each internal node.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleNode {
    pub beliefs: Vec<f64>,
    pub unassigned: f64,
}

/// Recomputes a tree aggregation from scratch with the powerset rule:
/// normalized sibling weights, discounting, combination, raw read-off at
/// intermediate nodes and `mode` at the root. Keyed by node id.
pub fn aggregate_tree_powerset(
    root: &AttributeNode,
    frame: &GradeFrame,
    mode: FinalizeMode,
    weighting: Weighting,
) -> Result<BTreeMap<String, OracleNode>> {
    let n = frame.len();
    let mut out = BTreeMap::new();
    let raw = match &root.payload {
        NodePayload::Leaf(b) => OracleNode {
            beliefs: b.beliefs().to_vec(),
            unassigned: 1.0 - b.beliefs().iter().sum::<f64>(),
        },
        NodePayload::Children(children) => oracle_node(children, n, weighting, &mut out)?,
    };
    let root_result = match mode {
        FinalizeMode::Raw => raw,
        FinalizeMode::Proportional => {
            let total: f64 = raw.beliefs.iter().sum();
            if total == 0.0 {
                return Err(Error::VacuousFinalization);
            }
            OracleNode {
                beliefs: raw.beliefs.iter().map(|b| b / total).collect(),
                unassigned: 0.0,
            }
        }
    };
    out.insert(root.id.clone(), root_result);
    Ok(out)
}

fn oracle_node(
    children: &[AttributeNode],
    n: usize,
    weighting: Weighting,
    out: &mut BTreeMap<String, OracleNode>,
) -> Result<OracleNode> {
    let total_weight: f64 = match weighting {
        Weighting::Normalized => children.iter().map(|c| c.weight).sum(),
        Weighting::Absolute => 1.0,
    };
    let mut acc: Option<PowersetMass> = None;
    for child in children {
        let beliefs = match &child.payload {
            NodePayload::Leaf(b) => b.beliefs().to_vec(),
            NodePayload::Children(cs) => {
                let sub = oracle_node(cs, n, weighting, out)?;
                let beliefs = sub.beliefs.clone();
                out.insert(child.id.clone(), sub);
                beliefs
            }
        };
        let w = child.weight / total_weight;
        let mut entries: Vec<(u32, f64)> = beliefs
            .iter()
            .enumerate()
            .map(|(i, b)| (1u32 << i, w * b))
            .collect();
        let committed: f64 = entries.iter().map(|e| e.1).sum();
        entries.push((full_mask(n), (1.0 - committed).max(0.0)));
        let m = PowersetMass::new(n, entries)?;
        acc = Some(match acc {
            None => m,
            Some(prev) => dempster_combine_powerset(&prev, &m)?,
        });
    }
    let combined = acc.ok_or_else(|| Error::InvalidMass("no children".into()))?;
    let (beliefs, unassigned) = combined
        .to_singletons_and_frame()
        .ok_or_else(|| Error::InvalidMass("non-singleton focal element".into()))?;
    Ok(OracleNode {
        beliefs,
        unassigned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two(a: f64, b: f64, frame: f64) -> PowersetMass {
        PowersetMass::new(2, [(0b01, a), (0b10, b), (0b11, frame)]).unwrap()
    }

    #[test]
    fn worked_two_grade_cases() {
        // Hand enumeration over {H1}, {H2}, {H1,H2}.
        let a = two(0.5, 0.0, 0.5);
        let m = dempster_combine_powerset(&a, &a).unwrap();
        assert!((m.mass(0b01) - 0.75).abs() < 1e-15);
        assert_eq!(m.mass(0b10), 0.0);
        assert!((m.mass(0b11) - 0.25).abs() < 1e-15);

        let b = two(0.0, 0.5, 0.5);
        let m = dempster_combine_powerset(&a, &b).unwrap();
        for set in [0b01, 0b10, 0b11] {
            assert!((m.mass(set) - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn vacuous_identity() {
        let a = PowersetMass::new(3, [(0b001, 0.2), (0b110, 0.5), (0b111, 0.3)]).unwrap();
        let v = PowersetMass::new(3, [(0b111, 1.0)]).unwrap();
        let m = dempster_combine_powerset(&a, &v).unwrap();
        for (set, mass) in a.focal_elements() {
            assert!((m.mass(set) - mass).abs() < 1e-15);
        }
    }

    #[test]
    fn disjoint_certainties_conflict() {
        let a = two(1.0, 0.0, 0.0);
        let b = two(0.0, 1.0, 0.0);
        assert!(matches!(
            dempster_combine_powerset(&a, &b),
            Err(Error::TotalConflict { .. })
        ));
    }

    #[test]
    fn general_subsets() {
        // {A,B} with {B,C}: the only intersections are {B} and full-frame terms.
        let a = PowersetMass::new(3, [(0b011, 0.6), (0b111, 0.4)]).unwrap();
        let b = PowersetMass::new(3, [(0b110, 0.7), (0b111, 0.3)]).unwrap();
        let m = dempster_combine_powerset(&a, &b).unwrap();
        assert!((m.mass(0b010) - 0.42).abs() < 1e-15);
        assert!((m.mass(0b011) - 0.18).abs() < 1e-15);
        assert!((m.mass(0b110) - 0.28).abs() < 1e-15);
        assert!((m.mass(0b111) - 0.12).abs() < 1e-15);
        assert!(m.to_singletons_and_frame().is_none());
    }

    #[test]
    fn commutative_bitwise() {
        let a = PowersetMass::new(
            3,
            [(0b001, 0.13), (0b011, 0.29), (0b100, 0.21), (0b111, 0.37)],
        )
        .unwrap();
        let b = PowersetMass::new(
            3,
            [(0b010, 0.31), (0b101, 0.17), (0b110, 0.19), (0b111, 0.33)],
        )
        .unwrap();
        assert_eq!(
            dempster_combine_powerset(&a, &b).unwrap(),
            dempster_combine_powerset(&b, &a).unwrap()
        );
    }

    #[test]
    fn rejects_bad_input() {
        assert!(PowersetMass::new(2, [(0b100, 1.0)]).is_err());
        assert!(PowersetMass::new(2, [(0b01, 0.5)]).is_err());
        assert!(PowersetMass::new(17, [(1, 1.0)]).is_err());
        assert!(PowersetMass::new(2, [(0, 0.5), (0b11, 0.5)]).is_err());
    }

    #[test]
    fn tree_oracle_matches_the_engine() {
        use crate::belief::{AggregationConfig, BeliefDistribution, GradeFrame};
        use crate::er::aggregate_tree;

        let frame = GradeFrame::from_labels(&["low", "mid", "high"]).unwrap();
        let leaf = |id: &str, w: f64, b: [f64; 3]| {
            AttributeNode::leaf(id, w, BeliefDistribution::new(3, b.to_vec()).unwrap())
        };
        let root = AttributeNode::internal(
            "root",
            1.0,
            vec![
                leaf("x", 0.6, [0.1, 0.5, 0.3]),
                AttributeNode::internal(
                    "sub",
                    0.4,
                    vec![
                        leaf("y", 0.7, [0.0, 0.2, 0.8]),
                        leaf("z", 0.2, [0.6, 0.0, 0.0]),
                    ],
                ),
            ],
        );
        for weighting in [Weighting::Normalized, Weighting::Absolute] {
            for mode in [FinalizeMode::Raw, FinalizeMode::Proportional] {
                let config = AggregationConfig::with_mode(mode).weighting(weighting);
                let engine = aggregate_tree(&root, &frame, &config).unwrap();
                let oracle = aggregate_tree_powerset(&root, &frame, mode, weighting).unwrap();
                assert_eq!(oracle.len(), engine.per_node.len());
                for (id, node) in &engine.per_node {
                    let o = &oracle[id];
                    for (x, y) in node.beliefs.beliefs().iter().zip(&o.beliefs) {
                        assert!((x - y).abs() < 1e-12, "{id} {weighting:?} {mode:?}");
                    }
                    assert!((node.unassigned - o.unassigned).abs() < 1e-12);
                }
            }
        }
    }
}
