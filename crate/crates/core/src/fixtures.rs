//! The bundled hands-off driving case study: hazard worksheet rows, the
//! consolidated requirement list, an illustrative cause tree and the trace
//! graph tying them to monitor checks and evidence.
//!
//! Everything here is parsed from the text files under `fixtures/`, which
//! are embedded at compile time and are also readable by the CLI.

use crate::cause_tree::{parse_tree, CauseTree};
use crate::requirements::{RequirementRegistry, TraceGraph};
use crate::risk_model::{parse_registry, HazardRecord};
use crate::scenario_sim::ScenarioSpec;

pub const HAZARDS: &str = include_str!("../fixtures/hazards.txt");
pub const REQUIREMENTS: &str = include_str!("../fixtures/requirements.toml");
pub const CAUSE_TREE: &str = include_str!("../fixtures/cause_tree.txt");
pub const TRACE_LINKS: &str = include_str!("../fixtures/trace_links.toml");
pub const TRACE_GRAPH: &str = include_str!("../fixtures/trace_graph.toml");

/// Scenario library as `(id, spec text)`, sorted by id.
pub const SCENARIOS: &[(&str, &str)] = &[
    (
        "adverse-weather",
        include_str!("../fixtures/scenarios/adverse-weather.toml"),
    ),
    (
        "boundary-skim",
        include_str!("../fixtures/scenarios/boundary-skim.toml"),
    ),
    (
        "calibration-drift",
        include_str!("../fixtures/scenarios/calibration-drift.toml"),
    ),
    (
        "gps-drift-ramp",
        include_str!("../fixtures/scenarios/gps-drift-ramp.toml"),
    ),
    (
        "latent-skim",
        include_str!("../fixtures/scenarios/latent-skim.toml"),
    ),
    (
        "nominal-mixed",
        include_str!("../fixtures/scenarios/nominal-mixed.toml"),
    ),
    (
        "sensor-dropout",
        include_str!("../fixtures/scenarios/sensor-dropout.toml"),
    ),
    (
        "stale-map",
        include_str!("../fixtures/scenarios/stale-map.toml"),
    ),
];

/// Global acceptance criterion the case-study targets are allocated from,
/// in events per km. An example value, not a normative constant.
pub const ACCEPTANCE_CRITERION: f64 = 1e-6;
pub const TARGET_CONFIDENCE: f64 = 0.95;

pub fn hazards() -> Vec<HazardRecord> {
    parse_registry(HAZARDS).expect("bundled hazard registry parses")
}

pub fn requirements() -> RequirementRegistry {
    RequirementRegistry::from_toml(REQUIREMENTS).expect("bundled requirements parse")
}

pub fn cause_tree() -> CauseTree<f64> {
    parse_tree(CAUSE_TREE).expect("bundled cause tree parses")
}

pub fn scenarios() -> Vec<ScenarioSpec> {
    SCENARIOS
        .iter()
        .map(|(id, text)| {
            let spec = ScenarioSpec::from_toml(text).expect("bundled scenario parses");
            assert_eq!(spec.id, *id);
            spec
        })
        .collect()
}

/// Assembles the trace graph from the individual fixture files; targets
/// are allocated on the cause tree.
pub fn assemble_trace_graph() -> TraceGraph {
    let mut g = TraceGraph::from_toml_unchecked(TRACE_LINKS).expect("bundled trace links parse");
    g.hazards = hazards().into_iter().map(|h| (h.id.clone(), h)).collect();
    g.requirements = requirements();
    g.targets = cause_tree()
        .allocate_targets(ACCEPTANCE_CRITERION, TARGET_CONFIDENCE)
        .expect("bundled cause tree allocates")
        .into_iter()
        .map(|t| (t.scenario_class.clone(), t))
        .collect();
    g.integrity().expect("bundled trace graph is consistent");
    g
}

/// The self-contained graph file shipped for the CLI.
pub fn trace_graph() -> TraceGraph {
    TraceGraph::from_toml(TRACE_GRAPH).expect("bundled trace graph parses")
}
