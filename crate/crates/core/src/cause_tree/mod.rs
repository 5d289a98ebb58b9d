//! Cause tree analysis: AND/OR decomposition of a hazard into leaf
//! triggering conditions, minimal cut sets, and allocation of a global
//! acceptance criterion into per-scenario-class validation targets.

mod tree_file;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{unit_sum_tolerance, Scalar};

pub use tree_file::{parse_tree, write_tree, TreeParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Gate {
    And,
    Or,
    Leaf,
}

impl Gate {
    pub fn token(self) -> &'static str {
        match self {
            Gate::And => "AND",
            Gate::Or => "OR",
            Gate::Leaf => "LEAF",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>"))]
pub struct CtaNode<T> {
    pub id: String,
    pub label: String,
    pub gate: Gate,
    #[serde(default)]
    pub children: Vec<String>,
    #[serde(default)]
    pub scenario_class: Option<String>,
    #[serde(default)]
    pub exposure_share: Option<T>,
}

impl<T> CtaNode<T> {
    pub fn leaf(id: &str, label: &str, class: &str, share: Option<T>) -> Self {
        CtaNode {
            id: id.to_string(),
            label: label.to_string(),
            gate: Gate::Leaf,
            children: Vec::new(),
            scenario_class: Some(class.to_string()),
            exposure_share: share,
        }
    }

    pub fn gate(id: &str, label: &str, gate: Gate, children: &[&str]) -> Self {
        CtaNode {
            id: id.to_string(),
            label: label.to_string(),
            gate,
            children: children.iter().map(|c| c.to_string()).collect(),
            scenario_class: None,
            exposure_share: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>"))]
pub struct CauseTree<T> {
    pub root: String,
    pub nodes: BTreeMap<String, CtaNode<T>>,
}

/// A structural invariant violation, naming the offending node.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum StructuralFinding {
    MissingRoot { root: String },
    DanglingChild { parent: String, child: String },
    MultipleParents { node: String, parents: Vec<String> },
    Cycle { node: String },
    Unreachable { node: String },
    LeafWithChildren { node: String },
    GateWithoutChildren { node: String },
    LeafWithoutClass { node: String },
    AnnotatedGate { node: String },
    ShareOutOfRange { node: String },
    KeyMismatch { key: String, id: String },
}

impl fmt::Display for StructuralFinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use StructuralFinding::*;
        match self {
            MissingRoot { root } => write!(f, "root '{root}' is not a node of the tree"),
            DanglingChild { parent, child } => {
                write!(
                    f,
                    "dangling child: '{parent}' references missing node '{child}'"
                )
            }
            MultipleParents { node, parents } => {
                write!(
                    f,
                    "multiple parents: '{node}' is a child of {}",
                    parents.join(", ")
                )
            }
            Cycle { node } => write!(f, "cycle through '{node}'"),
            Unreachable { node } => write!(f, "'{node}' is not reachable from the root"),
            LeafWithChildren { node } => write!(f, "leaf '{node}' has children"),
            GateWithoutChildren { node } => write!(f, "gate '{node}' has no children"),
            LeafWithoutClass { node } => write!(f, "leaf '{node}' has no scenario class"),
            AnnotatedGate { node } => {
                write!(
                    f,
                    "gate '{node}' carries a scenario class or exposure share"
                )
            }
            ShareOutOfRange { node } => write!(f, "exposure share of '{node}' outside [0, 1]"),
            KeyMismatch { key, id } => write!(f, "node stored under '{key}' has id '{id}'"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TreeError {
    #[error("invalid cause tree: {}", join_findings(.0))]
    Invalid(Vec<StructuralFinding>),
    #[error("leaf '{0}' has no exposure share")]
    MissingShare(String),
    #[error("exposure shares sum to {0}, expected 1")]
    ShareSum(f64),
    #[error("confidence level {0} outside (0, 1)")]
    Confidence(f64),
    #[error("acceptance criterion {0} must be a finite non-negative rate")]
    Criterion(f64),
}

fn join_findings(findings: &[StructuralFinding]) -> String {
    findings
        .iter()
        .map(|f| f.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Per-scenario-class share of the global acceptance criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationTarget<T> {
    pub scenario_class: String,
    /// Events per kilometer.
    pub max_event_rate: T,
    pub confidence_level: T,
}

/// Leaf scenario classes missing from a scenario library, and library
/// classes that no leaf needs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub uncovered: BTreeSet<String>,
    pub unused: BTreeSet<String>,
}

impl CoverageReport {
    pub fn is_empty(&self) -> bool {
        self.uncovered.is_empty() && self.unused.is_empty()
    }
}

pub type CutSet = BTreeSet<String>;

impl<T: Scalar> CauseTree<T> {
    pub fn new(root: &str, nodes: impl IntoIterator<Item = CtaNode<T>>) -> Self {
        CauseTree {
            root: root.to_string(),
            nodes: nodes.into_iter().map(|n| (n.id.clone(), n)).collect(),
        }
    }

    /// Leaves in depth-first order from the root. Assumes a valid tree.
    pub fn leaves(&self) -> Vec<&CtaNode<T>> {
        let mut out = Vec::new();
        let mut stack = vec![self.root.as_str()];
        while let Some(id) = stack.pop() {
            let Some(node) = self.nodes.get(id) else {
                continue;
            };
            if node.gate == Gate::Leaf {
                out.push(node);
            }
            stack.extend(node.children.iter().rev().map(String::as_str));
        }
        out
    }

    pub fn validate(&self) -> Vec<StructuralFinding> {
        use StructuralFinding::*;
        let mut findings = Vec::new();

        for (key, node) in &self.nodes {
            if key != &node.id {
                findings.push(KeyMismatch {
                    key: key.clone(),
                    id: node.id.clone(),
                });
            }
            match node.gate {
                Gate::Leaf => {
                    if !node.children.is_empty() {
                        findings.push(LeafWithChildren { node: key.clone() });
                    }
                    if node.scenario_class.is_none() {
                        findings.push(LeafWithoutClass { node: key.clone() });
                    }
                    if let Some(share) = node.exposure_share {
                        if !(share >= T::zero() && share <= T::one()) {
                            findings.push(ShareOutOfRange { node: key.clone() });
                        }
                    }
                }
                Gate::And | Gate::Or => {
                    if node.children.is_empty() {
                        findings.push(GateWithoutChildren { node: key.clone() });
                    }
                    if node.scenario_class.is_some() || node.exposure_share.is_some() {
                        findings.push(AnnotatedGate { node: key.clone() });
                    }
                }
            }
        }

        let mut parents: BTreeMap<&str, Vec<String>> = BTreeMap::new();
        for (key, node) in &self.nodes {
            for child in &node.children {
                if self.nodes.contains_key(child) {
                    parents.entry(child.as_str()).or_default().push(key.clone());
                } else {
                    findings.push(DanglingChild {
                        parent: key.clone(),
                        child: child.clone(),
                    });
                }
            }
        }
        for (node, ps) in &parents {
            if ps.len() > 1 {
                findings.push(MultipleParents {
                    node: node.to_string(),
                    parents: ps.clone(),
                });
            }
        }

        if !self.nodes.contains_key(&self.root) {
            findings.push(MissingRoot {
                root: self.root.clone(),
            });
            return findings;
        }

        // Iterative DFS with colouring; a grey hit is a back edge.
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Grey,
            Black,
        }
        let mut marks: HashMap<&str, Mark> = HashMap::new();
        let mut stack: Vec<(&str, usize)> = vec![(self.root.as_str(), 0)];
        marks.insert(self.root.as_str(), Mark::Grey);
        while let Some((id, next)) = stack.pop() {
            let children = &self.nodes[id].children;
            if next < children.len() {
                stack.push((id, next + 1));
                let child = children[next].as_str();
                if !self.nodes.contains_key(child) {
                    continue;
                }
                match marks.get(child) {
                    Some(Mark::Grey) => findings.push(Cycle {
                        node: child.to_string(),
                    }),
                    Some(Mark::Black) => {}
                    None => {
                        marks.insert(child, Mark::Grey);
                        stack.push((child, 0));
                    }
                }
            } else {
                marks.insert(id, Mark::Black);
            }
        }
        for key in self.nodes.keys() {
            if !marks.contains_key(key.as_str()) {
                findings.push(Unreachable { node: key.clone() });
            }
        }
        findings
    }

    fn require_valid(&self) -> Result<(), TreeError> {
        let findings = self.validate();
        if findings.is_empty() {
            Ok(())
        } else {
            Err(TreeError::Invalid(findings))
        }
    }

    /// Minimal cut sets by top-down gate expansion.
    ///
    /// Starts from the single row `{root}` and repeatedly replaces the first
    /// gate in a row: an AND gate by all of its children in the same row, an
    /// OR gate by one new row per child. Rows made only of leaves are cut
    /// sets; supersets are then absorbed.
    pub fn minimal_cut_sets(&self) -> Result<BTreeSet<CutSet>, TreeError> {
        self.require_valid()?;
        let mut pending: Vec<BTreeSet<&str>> = vec![BTreeSet::from([self.root.as_str()])];
        let mut complete: Vec<CutSet> = Vec::new();

        while let Some(row) = pending.pop() {
            let gate = row
                .iter()
                .copied()
                .find(|id| self.nodes[*id].gate != Gate::Leaf);
            let Some(gate_id) = gate else {
                complete.push(row.into_iter().map(str::to_string).collect());
                continue;
            };
            let node = &self.nodes[gate_id];
            let mut rest = row;
            rest.remove(gate_id);
            match node.gate {
                Gate::And => {
                    rest.extend(node.children.iter().map(String::as_str));
                    pending.push(rest);
                }
                Gate::Or => {
                    for child in &node.children {
                        let mut expanded = rest.clone();
                        expanded.insert(child.as_str());
                        pending.push(expanded);
                    }
                }
                Gate::Leaf => unreachable!(),
            }
        }
        Ok(minimize(complete))
    }

    /// Splits `criterion` (events per km) across scenario classes in
    /// proportion to the exposure shares of each class's leaves.
    pub fn allocate_targets(
        &self,
        criterion: T,
        confidence: T,
    ) -> Result<Vec<ValidationTarget<T>>, TreeError> {
        self.require_valid()?;
        if !(confidence > T::zero() && confidence < T::one()) {
            return Err(TreeError::Confidence(confidence.as_f64()));
        }
        if !(criterion.is_finite() && criterion >= T::zero()) {
            return Err(TreeError::Criterion(criterion.as_f64()));
        }
        let mut per_class: BTreeMap<&str, T> = BTreeMap::new();
        let mut total = T::zero();
        for leaf in self.leaves() {
            let share = leaf
                .exposure_share
                .ok_or_else(|| TreeError::MissingShare(leaf.id.clone()))?;
            let class = leaf.scenario_class.as_deref().unwrap_or_default();
            *per_class.entry(class).or_insert_with(T::zero) += share;
            total += share;
        }
        if (total - T::one()).abs() > unit_sum_tolerance::<T>() {
            return Err(TreeError::ShareSum(total.as_f64()));
        }
        Ok(per_class
            .into_iter()
            .map(|(class, share)| ValidationTarget {
                scenario_class: class.to_string(),
                max_event_rate: criterion * share,
                confidence_level: confidence,
            })
            .collect())
    }

    pub fn scenario_classes(&self) -> BTreeSet<String> {
        self.nodes
            .values()
            .filter(|n| n.gate == Gate::Leaf)
            .filter_map(|n| n.scenario_class.clone())
            .collect()
    }

    pub fn coverage_report(&self, library: &BTreeSet<String>) -> CoverageReport {
        let needed = self.scenario_classes();
        CoverageReport {
            uncovered: needed.difference(library).cloned().collect(),
            unused: library.difference(&needed).cloned().collect(),
        }
    }
}

/// Drops every set that is a superset of another.
pub fn minimize(mut sets: Vec<CutSet>) -> BTreeSet<CutSet> {
    sets.sort_by_key(|s| s.len());
    let mut kept: Vec<CutSet> = Vec::new();
    for s in sets {
        if !kept.iter().any(|k| k.is_subset(&s)) {
            kept.push(s);
        }
    }
    kept.into_iter().collect()
}
