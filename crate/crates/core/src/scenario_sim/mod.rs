//! Seeded scenario generation, replay through the monitor, requirement
//! metrics and residual-risk verdicts.
//!
//! `generate` → [`Trace`] (CSV on disk) → `replay` → [`RunRecord`] (JSON
//! lines) → `metrics` → [`MetricsReport`]. Every artifact carries the seed
//! and the digests of what produced it.

mod generate;
mod metrics;
mod run;
mod spec;
mod trace_file;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::odd_monitor::{ConfigError, MonitorConfig, MonitorError, SensorFrame};

pub use generate::generate;
pub use metrics::{
    compare_pair, evaluate_targets, metrics, req3_verdict, req4_verdict, ClassVerdict,
    DegradationReport, GroupAccuracy, MetricsReport, ResidualRiskVerdict, Thresholds, Verdict,
};
pub use run::{replay, ModeEvent, RunHeader, RunRecord};
pub use spec::{Coefficients, Injection, InjectionKind, LlpModel, ScenarioSpec, Segment};
pub use trace_file::{parse_trace, trace_digest, write_trace};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub scenario_id: String,
    pub scenario_class: String,
    pub seed: u64,
    pub spec_digest: String,
    pub tick_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub meta: TraceMeta,
    pub frames: Vec<SensorFrame<f64>>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("scenario spec: {0}")]
    Spec(String),
    #[error("trace file: {0}")]
    TraceFormat(String),
    #[error("run record: {0}")]
    RunFormat(String),
    #[error("trace tick {trace} ms does not match config tick {config} ms")]
    TickMismatch { trace: u64, config: u64 },
    #[error(transparent)]
    Monitor(#[from] MonitorError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("metrics: {0}")]
    Metrics(String),
    #[error("comparison: {0}")]
    Comparison(String),
    #[error("allocation: {0}")]
    Allocation(String),
}

/// Generates, replays and scores every spec in parallel. Reports come back
/// sorted by scenario id whatever the scheduling.
pub fn run_batch(
    specs: &[ScenarioSpec],
    cfg: &MonitorConfig<f64>,
    confidence: f64,
    th: &Thresholds,
) -> Result<Vec<MetricsReport>, SimError> {
    let mut reports = specs
        .par_iter()
        .map(|spec| {
            let trace = generate(spec)?;
            let run = replay(&trace, cfg)?;
            metrics(&run, &trace, confidence, th)
        })
        .collect::<Result<Vec<_>, _>>()?;
    reports.sort_by(|a, b| a.scenario_id.cmp(&b.scenario_id));
    Ok(reports)
}

#[cfg(test)]
mod tests;
