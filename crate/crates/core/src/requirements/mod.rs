//! Derived safety requirements and the traceability graph.
//!
//! Requirements come from a baseline SOTIF requirement refined by property,
//! analysis and measure steps. Prose for bundled requirements is stored as
//! written; [`derive_from_property`] fills a fixed template for new ones.
//! [`trace`] holds the hazard → requirement → check/target → evidence graph
//! and its closure check.

pub mod trace;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use trace::{
    trace_check, ClosureFinding, EvidenceRecord, LinkKind, MonitorCheck, TraceError, TraceGraph,
    TraceLink,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Source {
    BaselineSotif,
    SafetyProperty,
    SafetyAnalysis,
    FunctionalInsufficiency,
    OnboardMeasure,
    OffboardMeasure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Property {
    Robustness,
    Reliability,
    BiasFairness,
}

impl Property {
    pub const ALL: [Property; 3] = [
        Property::Robustness,
        Property::Reliability,
        Property::BiasFairness,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Property::Robustness => "ROBUSTNESS",
            Property::Reliability => "RELIABILITY",
            Property::BiasFairness => "BIAS_FAIRNESS",
        }
    }

    /// Template parameters a derivation for this property must supply.
    pub fn required_params(self) -> &'static [&'static str] {
        match self {
            Property::Robustness => &["degradation", "gps_err"],
            Property::Reliability => &["accuracy", "max_false_per_10h"],
            Property::BiasFairness => &["max_deviation"],
        }
    }

    fn id_suffix(self) -> &'static str {
        match self {
            Property::Robustness => "ROB",
            Property::Reliability => "REL",
            Property::BiasFairness => "BIAS",
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Property {
    type Err = RequirementError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Property::ALL
            .into_iter()
            .find(|p| p.token().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| RequirementError::UnknownProperty(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Ge,
    Le,
    Gt,
    Lt,
    Eq,
    PlusMinus,
}

impl Relation {
    fn token(self) -> &'static str {
        match self {
            Relation::Ge => ">=",
            Relation::Le => "<=",
            Relation::Gt => ">",
            Relation::Lt => "<",
            Relation::Eq => "=",
            Relation::PlusMinus => "+-",
        }
    }

    fn phrase(self) -> &'static str {
        match self {
            Relation::Ge => "at least",
            Relation::Le => "at most",
            Relation::Gt => "more than",
            Relation::Lt => "less than",
            Relation::Eq => "exactly",
            Relation::PlusMinus => "up to ±",
        }
    }
}

/// A bound with its unit, written `">= 5 Hz"`, `"+- 5 m"` or `"< 0.8 fraction"`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantity {
    pub relation: Relation,
    pub value: f64,
    pub unit: String,
}

impl Quantity {
    pub fn new(relation: Relation, value: f64, unit: &str) -> Self {
        Quantity {
            relation,
            value,
            unit: unit.to_string(),
        }
    }

    /// Human wording used by the derivation templates.
    pub fn phrase(&self) -> String {
        let sep = if self.relation == Relation::PlusMinus {
            ""
        } else {
            " "
        };
        format!(
            "{}{sep}{} {}",
            self.relation.phrase(),
            self.value,
            self.unit
        )
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.relation.token(), self.value, self.unit)
    }
}

impl FromStr for Quantity {
    type Err = RequirementError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |why: &str| RequirementError::Quantity(format!("'{s}': {why}"));
        let t = s.trim();
        // longest tokens first so ">=" is not read as ">"
        const TOKENS: [(&str, Relation); 9] = [
            (">=", Relation::Ge),
            ("<=", Relation::Le),
            ("+-", Relation::PlusMinus),
            ("≥", Relation::Ge),
            ("≤", Relation::Le),
            ("±", Relation::PlusMinus),
            (">", Relation::Gt),
            ("<", Relation::Lt),
            ("=", Relation::Eq),
        ];
        let (relation, rest) = TOKENS
            .iter()
            .find_map(|(tok, rel)| t.strip_prefix(tok).map(|r| (*rel, r.trim_start())))
            .ok_or_else(|| bad("missing relation (one of >= <= > < = +-)"))?;
        let split = rest.find(char::is_whitespace).unwrap_or(rest.len());
        let (num, unit) = rest.split_at(split);
        let value: f64 = num.parse().map_err(|_| bad("bad number"))?;
        if !value.is_finite() {
            return Err(bad("value must be finite"));
        }
        let unit = unit.trim();
        if unit.is_empty() {
            return Err(bad("missing unit"));
        }
        Ok(Quantity::new(relation, value, unit))
    }
}

impl Serialize for Quantity {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Quantity {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        String::deserialize(de)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SafetyRequirement {
    pub id: String,
    pub text: String,
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub property: Option<Property>,
    #[serde(default)]
    pub parameters: BTreeMap<String, Quantity>,
}

impl SafetyRequirement {
    pub fn check(&self) -> Result<(), RequirementError> {
        if self.id.trim().is_empty() {
            return Err(RequirementError::EmptyId);
        }
        if self.source == Source::SafetyProperty && self.property.is_none() {
            return Err(RequirementError::MissingProperty(self.id.clone()));
        }
        if let Some((name, _)) = self
            .parameters
            .iter()
            .find(|(_, q)| q.unit.trim().is_empty())
        {
            return Err(RequirementError::MissingUnit {
                id: self.id.clone(),
                param: name.clone(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RequirementError {
    #[error("requirement id must not be empty")]
    EmptyId,
    #[error("baseline '{0}' must have source BASELINE_SOTIF")]
    NotBaseline(String),
    #[error("requirement '{0}' has source SAFETY_PROPERTY but no property tag")]
    MissingProperty(String),
    #[error("parameter '{param}' of requirement '{id}' has no unit")]
    MissingUnit { id: String, param: String },
    #[error("consolidation conflict: requirement '{0}' appears with different content")]
    Conflict(String),
    #[error("{property} derivation is missing template parameters: {}", missing.join(", "))]
    MissingParams {
        property: Property,
        missing: Vec<String>,
    },
    #[error("unknown property '{0}' (ROBUSTNESS, RELIABILITY or BIAS_FAIRNESS)")]
    UnknownProperty(String),
    #[error("bad quantity {0}")]
    Quantity(String),
    #[error("expected exactly one BASELINE_SOTIF requirement, found {0}")]
    BaselineCount(usize),
    #[error("requirement file: {0}")]
    Format(String),
}

/// Requirements keyed and ordered by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RequirementRegistry {
    pub requirements: BTreeMap<String, SafetyRequirement>,
}

#[derive(Serialize, Deserialize)]
struct RegistryFile {
    #[serde(default)]
    requirement: Vec<SafetyRequirement>,
}

impl RequirementRegistry {
    pub fn len(&self) -> usize {
        self.requirements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requirements.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&SafetyRequirement> {
        self.requirements.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &SafetyRequirement> {
        self.requirements.values()
    }

    pub fn baseline(&self) -> Option<&SafetyRequirement> {
        self.iter().find(|r| r.source == Source::BaselineSotif)
    }

    /// Consolidates a flat list holding exactly one baseline.
    pub fn from_records(records: Vec<SafetyRequirement>) -> Result<Self, RequirementError> {
        let (base, derived): (Vec<_>, Vec<_>) = records
            .into_iter()
            .partition(|r| r.source == Source::BaselineSotif);
        match <[SafetyRequirement; 1]>::try_from(base) {
            Ok([baseline]) => consolidate(&baseline, &derived),
            Err(v) => Err(RequirementError::BaselineCount(v.len())),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, RequirementError> {
        let file: RegistryFile =
            toml::from_str(text).map_err(|e| RequirementError::Format(e.to_string()))?;
        Self::from_records(file.requirement)
    }

    pub fn to_toml(&self) -> String {
        let file = RegistryFile {
            requirement: self.iter().cloned().collect(),
        };
        toml::to_string(&file).expect("requirement registry serializes")
    }

    /// Same registry without `id`; the baseline cannot be removed this way.
    pub fn without(&self, id: &str) -> Self {
        let mut out = self.clone();
        out.requirements.remove(id);
        out
    }
}

/// Baseline plus derived records, deduplicated by id and ordered by id.
///
/// Exact duplicates collapse; the same id with different content is a
/// conflict. Feeding a registry's own records back in yields the same
/// registry.
pub fn consolidate(
    baseline: &SafetyRequirement,
    derived: &[SafetyRequirement],
) -> Result<RequirementRegistry, RequirementError> {
    if baseline.source != Source::BaselineSotif {
        return Err(RequirementError::NotBaseline(baseline.id.clone()));
    }
    let mut requirements = BTreeMap::new();
    for r in std::iter::once(baseline).chain(derived) {
        r.check()?;
        match requirements.get(&r.id) {
            Some(prev) if prev != r => return Err(RequirementError::Conflict(r.id.clone())),
            Some(_) => {}
            None => {
                requirements.insert(r.id.clone(), r.clone());
            }
        }
    }
    Ok(RequirementRegistry { requirements })
}

/// Instantiates the normative template for `property` against `baseline`.
///
/// Parameters beyond the template's own are carried over unchanged.
pub fn derive_from_property(
    baseline: &SafetyRequirement,
    property: Property,
    params: &BTreeMap<String, Quantity>,
) -> Result<SafetyRequirement, RequirementError> {
    let missing: Vec<String> = property
        .required_params()
        .iter()
        .filter(|p| !params.contains_key(**p))
        .map(|p| p.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(RequirementError::MissingParams { property, missing });
    }
    let p = |name: &str| params[name].phrase();
    let body = match property {
        Property::Robustness => format!(
            "the perception function shall keep its accuracy degradation to {} \
             under GPS position error of {}, camera noise and light to moderate \
             weather",
            p("degradation"),
            p("gps_err")
        ),
        Property::Reliability => format!(
            "the ODD detector shall achieve {} in-ODD versus out-of-ODD \
             classification accuracy with {} false classifications per 10 h of \
             continuous operation",
            p("accuracy"),
            p("max_false_per_10h")
        ),
        Property::BiasFairness => format!(
            "the perception function shall show an accuracy deviation of {} \
             across all ODD sub-regions and environmental contexts",
            p("max_deviation")
        ),
    };
    let req = SafetyRequirement {
        id: format!("{}-{}", baseline.id, property.id_suffix()),
        text: format!("[{}] Refining {}: {}.", property, baseline.id, body),
        source: Source::SafetyProperty,
        property: Some(property),
        parameters: params.clone(),
    };
    req.check()?;
    Ok(req)
}
