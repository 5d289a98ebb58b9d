//! Traceability graph and closure checking.
//!
//! Links are typed by the pair of registries they join, so the graph is a
//! DAG by construction: hazard → requirement → {check, target}, and
//! check → evidence.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{RequirementRegistry, SafetyRequirement};
use crate::cause_tree::ValidationTarget;
use crate::risk_model::{rra_required, GateMode, HazardRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LinkKind {
    HazardToReq,
    ReqToCheck,
    ReqToTarget,
    CheckToEvidence,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceLink {
    pub kind: LinkKind,
    pub from: String,
    pub to: String,
}

impl TraceLink {
    pub fn new(kind: LinkKind, from: &str, to: &str) -> Self {
        TraceLink {
            kind,
            from: from.into(),
            to: to.into(),
        }
    }
}

/// A runtime check the monitor (or the metrics pipeline) performs on
/// behalf of a hazard.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorCheck {
    pub id: String,
    pub hazard: String,
    #[serde(default)]
    pub description: String,
    /// Monitor rule id or metric name that implements the check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub implemented_by: Option<String>,
}

/// A simulator run backing a check, pinned by the digest of its run record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvidenceRecord {
    pub id: String,
    pub run_id: String,
    pub digest: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceGraph {
    pub hazards: BTreeMap<String, HazardRecord>,
    pub requirements: RequirementRegistry,
    pub checks: BTreeMap<String, MonitorCheck>,
    /// Keyed by scenario class.
    pub targets: BTreeMap<String, ValidationTarget<f64>>,
    pub evidence: BTreeMap<String, EvidenceRecord>,
    pub links: BTreeSet<TraceLink>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    #[serde(default)]
    hazard: Vec<HazardRecord>,
    #[serde(default)]
    requirement: Vec<SafetyRequirement>,
    #[serde(default)]
    check: Vec<MonitorCheck>,
    #[serde(default)]
    target: Vec<ValidationTarget<f64>>,
    #[serde(default)]
    evidence: Vec<EvidenceRecord>,
    #[serde(default)]
    link: Vec<TraceLink>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    #[error("trace graph integrity: {0}")]
    Integrity(String),
    #[error("trace graph file: {0}")]
    Format(String),
}

fn keyed<V>(
    what: &str,
    items: Vec<V>,
    key: impl Fn(&V) -> &str,
) -> Result<BTreeMap<String, V>, TraceError> {
    let mut out = BTreeMap::new();
    for item in items {
        let k = key(&item).to_string();
        if out.contains_key(&k) {
            return Err(TraceError::Integrity(format!("duplicate {what} id '{k}'")));
        }
        out.insert(k, item);
    }
    Ok(out)
}

impl TraceGraph {
    pub fn from_toml(text: &str) -> Result<Self, TraceError> {
        let g = Self::from_toml_unchecked(text)?;
        g.integrity()?;
        Ok(g)
    }

    /// Parses without checking link endpoints, for partial graphs that are
    /// completed in code.
    pub fn from_toml_unchecked(text: &str) -> Result<Self, TraceError> {
        let f: GraphFile = toml::from_str(text).map_err(|e| TraceError::Format(e.to_string()))?;
        let requirements = keyed("requirement", f.requirement, |r| &r.id)?;
        for r in requirements.values() {
            r.check()
                .map_err(|e| TraceError::Integrity(e.to_string()))?;
        }
        let g = TraceGraph {
            hazards: keyed("hazard", f.hazard, |h| &h.id)?,
            requirements: RequirementRegistry { requirements },
            checks: keyed("check", f.check, |c| &c.id)?,
            targets: keyed("target", f.target, |t| &t.scenario_class)?,
            evidence: keyed("evidence", f.evidence, |e| &e.id)?,
            links: f.link.into_iter().collect(),
        };
        Ok(g)
    }

    /// Stable text form: every section sorted by id, links by (kind, from, to).
    pub fn to_toml(&self) -> String {
        let f = GraphFile {
            hazard: self.hazards.values().cloned().collect(),
            requirement: self.requirements.iter().cloned().collect(),
            check: self.checks.values().cloned().collect(),
            target: self.targets.values().cloned().collect(),
            evidence: self.evidence.values().cloned().collect(),
            link: self.links.iter().cloned().collect(),
        };
        toml::to_string(&f).expect("trace graph serializes")
    }

    /// Checks every link endpoint and every check's hazard reference.
    pub fn integrity(&self) -> Result<(), TraceError> {
        for c in self.checks.values() {
            if !self.hazards.contains_key(&c.hazard) {
                return Err(TraceError::Integrity(format!(
                    "check '{}' names unknown hazard '{}'",
                    c.id, c.hazard
                )));
            }
        }
        for l in &self.links {
            if l.from == l.to {
                return Err(TraceError::Integrity(format!(
                    "self-link {:?} on '{}'",
                    l.kind, l.from
                )));
            }
            let (from_ok, from_kind, to_ok, to_kind) = match l.kind {
                LinkKind::HazardToReq => (
                    self.hazards.contains_key(&l.from),
                    "hazard",
                    self.requirements.get(&l.to).is_some(),
                    "requirement",
                ),
                LinkKind::ReqToCheck => (
                    self.requirements.get(&l.from).is_some(),
                    "requirement",
                    self.checks.contains_key(&l.to),
                    "check",
                ),
                LinkKind::ReqToTarget => (
                    self.requirements.get(&l.from).is_some(),
                    "requirement",
                    self.targets.contains_key(&l.to),
                    "target",
                ),
                LinkKind::CheckToEvidence => (
                    self.checks.contains_key(&l.from),
                    "check",
                    self.evidence.contains_key(&l.to),
                    "evidence",
                ),
            };
            if !from_ok {
                return Err(TraceError::Integrity(format!(
                    "dangling link: {from_kind} '{}' does not exist",
                    l.from
                )));
            }
            if !to_ok {
                return Err(TraceError::Integrity(format!(
                    "dangling link: {to_kind} '{}' does not exist",
                    l.to
                )));
            }
        }
        Ok(())
    }

    /// The graph with one requirement and all of its links removed.
    pub fn without_requirement(&self, id: &str) -> TraceGraph {
        let mut g = self.clone();
        g.requirements = g.requirements.without(id);
        g.links.retain(|l| match l.kind {
            LinkKind::HazardToReq => l.to != id,
            LinkKind::ReqToCheck | LinkKind::ReqToTarget => l.from != id,
            LinkKind::CheckToEvidence => true,
        });
        g
    }

    fn targets_of<'a, 'b>(
        &'a self,
        kind: LinkKind,
        from: &'b str,
    ) -> impl Iterator<Item = &'a str> + use<'a, 'b> {
        self.links
            .iter()
            .filter(move |l| l.kind == kind && l.from == from)
            .map(|l| l.to.as_str())
    }

    /// Requirements reached from `hazard` that link to `check`.
    pub fn covering_requirements(&self, hazard: &str, check: &str) -> Vec<&str> {
        self.targets_of(LinkKind::HazardToReq, hazard)
            .filter(|r| {
                self.links
                    .contains(&TraceLink::new(LinkKind::ReqToCheck, r, check))
            })
            .collect()
    }

    /// Evidence whose run digest no longer matches `current` (run id →
    /// digest), including runs that are missing altogether.
    pub fn stale_evidence<'a>(
        &'a self,
        current: &BTreeMap<String, String>,
    ) -> Vec<&'a EvidenceRecord> {
        self.evidence
            .values()
            .filter(|e| current.get(&e.run_id) != Some(&e.digest))
            .collect()
    }
}

/// One broken closure obligation, naming the orphan.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "obligation", rename_all = "snake_case")]
pub enum ClosureFinding {
    HazardWithoutRequirement { hazard: String },
    RequirementWithoutCheck { requirement: String },
    RequirementWithoutTarget { requirement: String },
    CheckWithoutEvidence { check: String },
    UncoveredCheck { hazard: String, check: String },
}

impl fmt::Display for ClosureFinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClosureFinding::HazardWithoutRequirement { hazard } => {
                write!(f, "hazard {hazard} has no linked requirement")
            }
            ClosureFinding::RequirementWithoutCheck { requirement } => {
                write!(f, "requirement {requirement} has no monitor check")
            }
            ClosureFinding::RequirementWithoutTarget { requirement } => {
                write!(f, "requirement {requirement} has no validation target")
            }
            ClosureFinding::CheckWithoutEvidence { check } => {
                write!(f, "check {check} has no evidence record")
            }
            ClosureFinding::UncoveredCheck { hazard, check } => {
                write!(
                    f,
                    "hazard {hazard} has no requirement covering check {check}"
                )
            }
        }
    }
}

/// Closure obligations over a well-formed graph.
///
/// Hazards that need a residual risk assessment under `mode` must link to a
/// requirement, and each of their checks must be covered by one of those
/// requirements. Every requirement needs a check and a validation target,
/// and every check needs evidence. The requirement and check obligations
/// hold regardless of hazard links, which keeps the finding count
/// monotone: adding a link can only discharge obligations.
pub fn trace_check(graph: &TraceGraph, mode: GateMode) -> Result<Vec<ClosureFinding>, TraceError> {
    graph.integrity()?;
    let gated: Vec<&HazardRecord> = graph
        .hazards
        .values()
        .filter(|h| rra_required(h.severity, h.controllability, mode))
        .collect();
    let mut findings = Vec::new();
    for h in &gated {
        if graph
            .targets_of(LinkKind::HazardToReq, &h.id)
            .next()
            .is_none()
        {
            findings.push(ClosureFinding::HazardWithoutRequirement {
                hazard: h.id.clone(),
            });
        }
    }
    for r in graph.requirements.iter() {
        if graph
            .targets_of(LinkKind::ReqToCheck, &r.id)
            .next()
            .is_none()
        {
            findings.push(ClosureFinding::RequirementWithoutCheck {
                requirement: r.id.clone(),
            });
        }
        if graph
            .targets_of(LinkKind::ReqToTarget, &r.id)
            .next()
            .is_none()
        {
            findings.push(ClosureFinding::RequirementWithoutTarget {
                requirement: r.id.clone(),
            });
        }
    }
    for c in graph.checks.values() {
        if graph
            .targets_of(LinkKind::CheckToEvidence, &c.id)
            .next()
            .is_none()
        {
            findings.push(ClosureFinding::CheckWithoutEvidence {
                check: c.id.clone(),
            });
        }
    }
    for h in &gated {
        for c in graph.checks.values().filter(|c| c.hazard == h.id) {
            if graph.covering_requirements(&h.id, &c.id).is_empty() {
                findings.push(ClosureFinding::UncoveredCheck {
                    hazard: h.id.clone(),
                    check: c.id.clone(),
                });
            }
        }
    }
    Ok(findings)
}

/// One JSON object per finding, newline terminated.
pub fn findings_jsonl(findings: &[ClosureFinding]) -> String {
    findings
        .iter()
        .map(|f| serde_json::to_string(f).expect("finding serializes") + "\n")
        .collect()
}

pub fn closure_summary(graph: &TraceGraph, mode: GateMode, findings: &[ClosureFinding]) -> String {
    let mut s = format!(
        "trace closure (gate {mode}): {} hazards, {} requirements, {} checks, {} targets, {} evidence, {} links\n",
        graph.hazards.len(),
        graph.requirements.len(),
        graph.checks.len(),
        graph.targets.len(),
        graph.evidence.len(),
        graph.links.len()
    );
    if findings.is_empty() {
        s.push_str("closed: no findings\n");
    } else {
        s.push_str(&format!("OPEN: {} finding(s)\n", findings.len()));
        for f in findings {
            s.push_str(&format!("  - {f}\n"));
        }
    }
    s
}
