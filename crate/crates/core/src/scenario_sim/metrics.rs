//! Requirement metrics over a replayed run, pairwise degradation, and the
//! residual-risk comparison against allocated validation targets.
//!
//! A tick is classified in-ODD when the fused confidence reaches the
//! monitor's confidence floor; it is correct when that matches ground truth.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::run::RunRecord;
use super::trace_file::trace_digest;
use super::{SimError, Trace};
use crate::cause_tree::ValidationTarget;
use crate::odd_monitor::{Mode, Region, Surface};
use crate::requirements::RequirementRegistry;
use crate::stats::rate_upper_bound;

const MS_PER_HOUR: f64 = 3_600_000.0;
/// Absorbs rounding when a measured value sits exactly on a threshold.
const EDGE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    InsufficientEvidence,
    Fail,
}

impl Verdict {
    pub fn token(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::InsufficientEvidence => "INSUFFICIENT_EVIDENCE",
            Verdict::Fail => "FAIL",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.token())
    }
}

/// Metric thresholds, as fractions and counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Req 2: degradation must stay strictly below this.
    pub max_degradation: f64,
    /// Req 3.
    pub min_accuracy: f64,
    pub max_false_per_10h: f64,
    /// Hours of operation needed before a clean reliability record counts.
    pub min_hours: f64,
    /// Req 4: largest allowed accuracy spread.
    pub max_deviation: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            max_degradation: 0.01,
            min_accuracy: 0.99,
            max_false_per_10h: 1.0,
            min_hours: 10.0,
            max_deviation: 0.02,
        }
    }
}

impl Thresholds {
    /// Reads the bounds from REQ-2..REQ-4 of a registry, keeping defaults
    /// for anything absent. Percentages are converted to fractions.
    pub fn from_requirements(reg: &RequirementRegistry) -> Self {
        let mut t = Thresholds::default();
        let param = |id: &str, name: &str| {
            reg.get(id).and_then(|r| r.parameters.get(name)).map(|q| {
                if q.unit == "%" {
                    q.value / 100.0
                } else {
                    q.value
                }
            })
        };
        if let Some(v) = param("REQ-2", "degradation") {
            t.max_degradation = v;
        }
        if let Some(v) = param("REQ-3", "accuracy") {
            t.min_accuracy = v;
        }
        if let Some(v) = param("REQ-3", "max_false_per_10h") {
            t.max_false_per_10h = v;
        }
        if let Some(v) = param("REQ-4", "max_deviation") {
            t.max_deviation = v;
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupAccuracy {
    pub ticks: u64,
    pub correct: u64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario_id: String,
    pub scenario_class: String,
    pub seed: u64,
    pub config_digest: String,
    pub trace_digest: String,
    pub ticks: u64,
    pub hours: f64,
    pub km: f64,
    pub accuracy: f64,
    /// Maximal runs of misclassified ticks.
    pub false_classifications: u64,
    pub false_per_10h: f64,
    pub by_region: BTreeMap<Region, GroupAccuracy>,
    pub by_surface: BTreeMap<Surface, GroupAccuracy>,
    pub region_deviation: Option<f64>,
    pub surface_deviation: Option<f64>,
    pub max_deviation: Option<f64>,
    /// Maximal runs of FULL_AUTONOMY ticks spent outside the ODD.
    pub unsafe_events: u64,
    pub unsafe_km: f64,
    pub bound_confidence: f64,
    /// Upper bound on unsafe events per km; absent when no distance was driven.
    pub event_rate_upper_bound: Option<f64>,
    pub verdicts: BTreeMap<String, Verdict>,
}

fn spread<K>(groups: &BTreeMap<K, GroupAccuracy>) -> Option<f64> {
    if groups.len() < 2 {
        return None;
    }
    let acc = groups.values().map(|g| g.accuracy);
    let hi = acc.clone().fold(f64::NEG_INFINITY, f64::max);
    let lo = acc.fold(f64::INFINITY, f64::min);
    Some(hi - lo)
}

fn tally<K: Ord>(groups: &mut BTreeMap<K, GroupAccuracy>, key: K, correct: bool) {
    let g = groups.entry(key).or_insert(GroupAccuracy {
        ticks: 0,
        correct: 0,
        accuracy: 0.0,
    });
    g.ticks += 1;
    g.correct += u64::from(correct);
}

fn finish<K>(groups: &mut BTreeMap<K, GroupAccuracy>) {
    for g in groups.values_mut() {
        g.accuracy = g.correct as f64 / g.ticks as f64;
    }
}

/// Counts maximal runs of `true`.
fn episodes(flags: impl Iterator<Item = bool>) -> u64 {
    let mut n = 0;
    let mut prev = false;
    for f in flags {
        if f && !prev {
            n += 1;
        }
        prev = f;
    }
    n
}

pub fn req3_verdict(r: &MetricsReport, th: &Thresholds) -> Verdict {
    if r.accuracy + EDGE < th.min_accuracy || r.false_per_10h > th.max_false_per_10h + EDGE {
        Verdict::Fail
    } else if r.hours + EDGE < th.min_hours {
        Verdict::InsufficientEvidence
    } else {
        Verdict::Pass
    }
}

pub fn req4_verdict(r: &MetricsReport, th: &Thresholds) -> Verdict {
    match r.max_deviation {
        None => Verdict::InsufficientEvidence,
        Some(d) if d > th.max_deviation + EDGE => Verdict::Fail,
        Some(_) => Verdict::Pass,
    }
}

/// Metrics of `run` against the ground truth in `trace`.
pub fn metrics(
    run: &RunRecord,
    trace: &Trace,
    confidence: f64,
    th: &Thresholds,
) -> Result<MetricsReport, SimError> {
    if run.outputs.is_empty() {
        return Err(SimError::Metrics("run has zero duration".into()));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(SimError::Metrics(format!(
            "confidence {confidence} outside (0, 1)"
        )));
    }
    let digest = trace_digest(trace);
    if run.header.trace_digest != digest {
        return Err(SimError::Metrics(format!(
            "run {} was not produced from this trace (digest mismatch)",
            run.scenario_id()
        )));
    }
    let floor = run.header.config.confidence_floor;
    let pairs = || run.outputs.iter().zip(&trace.frames);
    let correct: Vec<bool> = pairs()
        .map(|(o, f)| (o.fused_confidence >= floor) == f.true_in_odd)
        .collect();

    let mut by_region = BTreeMap::new();
    let mut by_surface = BTreeMap::new();
    for ((_, f), ok) in pairs().zip(&correct) {
        tally(&mut by_region, f.region, *ok);
        tally(&mut by_surface, f.surface, *ok);
    }
    finish(&mut by_region);
    finish(&mut by_surface);
    let region_deviation = spread(&by_region);
    let surface_deviation = spread(&by_surface);
    let max_deviation = match (region_deviation, surface_deviation) {
        (Some(a), Some(b)) => Some(a.max(b)),
        (a, b) => a.or(b),
    };

    let ticks = correct.len() as u64;
    let hours = ticks as f64 * run.header.tick_ms as f64 / MS_PER_HOUR;
    let false_classifications = episodes(correct.iter().map(|c| !c));
    let unsafe_tick = |(o, f): (
        &crate::odd_monitor::MonitorOutput<f64>,
        &crate::odd_monitor::SensorFrame<f64>,
    )| { o.mode == Mode::FullAutonomy && !f.true_in_odd };
    let unsafe_events = episodes(pairs().map(unsafe_tick));
    let unsafe_km = pairs()
        .filter(|p| unsafe_tick(*p))
        .fold(0.0, |acc, (_, f)| acc + f.distance_delta_km);
    let km = trace
        .frames
        .iter()
        .fold(0.0, |acc, f| acc + f.distance_delta_km);

    let mut report = MetricsReport {
        scenario_id: run.header.scenario_id.clone(),
        scenario_class: run.header.scenario_class.clone(),
        seed: run.header.seed,
        config_digest: run.header.config_digest.clone(),
        trace_digest: digest,
        ticks,
        hours,
        km,
        accuracy: correct.iter().filter(|c| **c).count() as f64 / ticks as f64,
        false_classifications,
        false_per_10h: false_classifications as f64 * 10.0 / hours,
        by_region,
        by_surface,
        region_deviation,
        surface_deviation,
        max_deviation,
        unsafe_events,
        unsafe_km,
        bound_confidence: confidence,
        event_rate_upper_bound: (km > 0.0).then(|| rate_upper_bound(unsafe_events, km, confidence)),
        verdicts: BTreeMap::new(),
    };
    report
        .verdicts
        .insert("REQ-3".into(), req3_verdict(&report, th));
    report
        .verdicts
        .insert("REQ-4".into(), req4_verdict(&report, th));
    Ok(report)
}

impl MetricsReport {
    pub fn summary(&self) -> String {
        let pct = |v: f64| format!("{:.3} %", v * 100.0);
        let opt = |v: Option<f64>| v.map_or("n/a".to_string(), pct);
        let mut s = String::new();
        let _ = writeln!(
            s,
            "scenario {} ({}) seed {} config {}",
            self.scenario_id,
            self.scenario_class,
            self.seed,
            &self.config_digest[..12.min(self.config_digest.len())]
        );
        let _ = writeln!(
            s,
            "  {:<24} {:>10} ticks  {:.4} h  {:.4} km",
            "exposure", self.ticks, self.hours, self.km
        );
        let _ = writeln!(s, "  {:<24} {}", "accuracy", pct(self.accuracy));
        let _ = writeln!(
            s,
            "  {:<24} {} ({:.3} per 10 h)",
            "false classifications", self.false_classifications, self.false_per_10h
        );
        for (r, g) in &self.by_region {
            let _ = writeln!(s, "  {:<24} {}", format!("accuracy {r:?}"), pct(g.accuracy));
        }
        for (r, g) in &self.by_surface {
            let _ = writeln!(s, "  {:<24} {}", format!("accuracy {r:?}"), pct(g.accuracy));
        }
        let _ = writeln!(s, "  {:<24} {}", "max deviation", opt(self.max_deviation));
        let _ = writeln!(
            s,
            "  {:<24} {} over {:.4} km",
            "unsafe exposure", self.unsafe_events, self.unsafe_km
        );
        let _ = writeln!(
            s,
            "  {:<24} {} per km at {}",
            "event rate bound",
            self.event_rate_upper_bound
                .map_or("n/a".to_string(), |b| format!("{b:.3e}")),
            self.bound_confidence
        );
        for (req, v) in &self.verdicts {
            let _ = writeln!(s, "  {req:<24} {v}");
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationReport {
    pub baseline: String,
    pub perturbed: String,
    pub baseline_accuracy: f64,
    pub perturbed_accuracy: f64,
    /// Accuracy lost, as a fraction.
    pub degradation: f64,
    pub degradation_pp: f64,
    pub verdict: Verdict,
}

/// Req 2: perturbed accuracy may drop strictly less than the allowed
/// degradation below the baseline.
pub fn compare_pair(
    baseline: &MetricsReport,
    perturbed: &MetricsReport,
    th: &Thresholds,
) -> Result<DegradationReport, SimError> {
    if baseline.config_digest != perturbed.config_digest {
        return Err(SimError::Comparison(format!(
            "config digests differ: {} vs {}",
            baseline.config_digest, perturbed.config_digest
        )));
    }
    let degradation = baseline.accuracy - perturbed.accuracy;
    Ok(DegradationReport {
        baseline: baseline.scenario_id.clone(),
        perturbed: perturbed.scenario_id.clone(),
        baseline_accuracy: baseline.accuracy,
        perturbed_accuracy: perturbed.accuracy,
        degradation,
        degradation_pp: degradation * 100.0,
        verdict: if degradation < th.max_degradation - EDGE {
            Verdict::Pass
        } else {
            Verdict::Fail
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassVerdict {
    pub scenario_class: String,
    pub events: u64,
    pub km: f64,
    pub point_estimate: Option<f64>,
    pub upper_bound: Option<f64>,
    pub target: f64,
    pub confidence: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRiskVerdict {
    pub classes: Vec<ClassVerdict>,
    pub aggregate: Verdict,
}

/// Per-class verdicts from pooled unsafe events and km.
///
/// FAIL when the point estimate exceeds the target, PASS when the upper
/// bound is within it, INSUFFICIENT_EVIDENCE otherwise, including target
/// classes with no driven km. The aggregate is the worst class verdict.
pub fn evaluate_targets(
    reports: &[MetricsReport],
    targets: &[ValidationTarget<f64>],
) -> Result<ResidualRiskVerdict, SimError> {
    let mut pooled: BTreeMap<&str, (u64, f64)> = targets
        .iter()
        .map(|t| (t.scenario_class.as_str(), (0, 0.0)))
        .collect();
    for r in reports {
        let slot = pooled.get_mut(r.scenario_class.as_str()).ok_or_else(|| {
            SimError::Allocation(format!(
                "report {} has class '{}' with no validation target",
                r.scenario_id, r.scenario_class
            ))
        })?;
        slot.0 += r.unsafe_events;
        slot.1 += r.km;
    }
    let mut classes = Vec::new();
    for t in targets {
        let (events, km) = pooled[t.scenario_class.as_str()];
        let (point, bound) = if km > 0.0 {
            (
                Some(events as f64 / km),
                Some(rate_upper_bound(events, km, t.confidence_level)),
            )
        } else {
            (None, None)
        };
        let verdict = match (point, bound) {
            (Some(p), _) if p > t.max_event_rate => Verdict::Fail,
            (_, Some(b)) if b <= t.max_event_rate => Verdict::Pass,
            _ => Verdict::InsufficientEvidence,
        };
        classes.push(ClassVerdict {
            scenario_class: t.scenario_class.clone(),
            events,
            km,
            point_estimate: point,
            upper_bound: bound,
            target: t.max_event_rate,
            confidence: t.confidence_level,
            verdict,
        });
    }
    classes.sort_by(|a, b| a.scenario_class.cmp(&b.scenario_class));
    let aggregate = classes
        .iter()
        .map(|c| c.verdict)
        .max()
        .unwrap_or(Verdict::InsufficientEvidence);
    Ok(ResidualRiskVerdict { classes, aggregate })
}

impl ResidualRiskVerdict {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<30} {:>7} {:>12} {:>11} {:>11} {:>11}  verdict",
            "class", "events", "km", "point", "bound", "target"
        );
        let e = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.3e}"));
        for c in &self.classes {
            let _ = writeln!(
                s,
                "{:<30} {:>7} {:>12.3} {:>11} {:>11} {:>11.3e}  {}",
                c.scenario_class,
                c.events,
                c.km,
                e(c.point_estimate),
                e(c.upper_bound),
                c.target,
                c.verdict
            );
        }
        let _ = writeln!(s, "aggregate: {}", self.aggregate);
        s
    }
}

#[cfg(test)]
pub(super) fn spread_for_tests<K>(groups: &BTreeMap<K, GroupAccuracy>) -> Option<f64> {
    spread(groups)
}
