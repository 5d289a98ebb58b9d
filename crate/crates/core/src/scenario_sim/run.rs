use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::trace_file::trace_digest;
use super::{SimError, Trace};
use crate::odd_monitor::{Mode, MonitorConfig, MonitorOutput, OddMonitor, RuleId};

/// Entry into a mode, with the rules that fired on that tick.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeEvent {
    pub t: u64,
    pub mode: Mode,
    pub rules: Vec<RuleId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub scenario_id: String,
    pub scenario_class: String,
    pub seed: u64,
    pub tick_ms: u64,
    pub ticks: usize,
    pub trace_digest: String,
    pub config_digest: String,
    pub config: MonitorConfig<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub header: RunHeader,
    pub outputs: Vec<MonitorOutput<f64>>,
    pub events: Vec<ModeEvent>,
}

/// One line of the run-record file.
#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Line {
    Header(RunHeader),
    Event(ModeEvent),
    Tick(MonitorOutput<f64>),
}

impl RunRecord {
    pub fn scenario_id(&self) -> &str {
        &self.header.scenario_id
    }

    pub fn config_digest(&self) -> &str {
        &self.header.config_digest
    }

    pub fn terminal_mode(&self) -> Option<Mode> {
        self.outputs.last().map(|o| o.mode)
    }

    /// Maximal runs of one mode as `(mode, first t, last t)`.
    pub fn segments(&self) -> Vec<(Mode, u64, u64)> {
        let mut out: Vec<(Mode, u64, u64)> = Vec::new();
        for o in &self.outputs {
            match out.last_mut() {
                Some((m, _, end)) if *m == o.mode => *end = o.t,
                _ => out.push((o.mode, o.t, o.t)),
            }
        }
        out
    }

    /// Header line, the event log, then one line per tick.
    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        let mut push = |line: &Line| {
            s.push_str(&serde_json::to_string(line).expect("run record serializes"));
            s.push('\n');
        };
        push(&Line::Header(self.header.clone()));
        for e in &self.events {
            push(&Line::Event(e.clone()));
        }
        for o in &self.outputs {
            push(&Line::Tick(o.clone()));
        }
        s
    }

    pub fn from_jsonl(text: &str) -> Result<Self, SimError> {
        let bad = |n: usize, e: String| SimError::RunFormat(format!("line {n}: {e}"));
        let mut header = None;
        let mut outputs = Vec::new();
        let mut events = Vec::new();
        for (i, raw) in text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
        {
            let line: Line = serde_json::from_str(raw).map_err(|e| bad(i + 1, e.to_string()))?;
            match line {
                Line::Header(h) if header.is_none() && i == 0 => header = Some(h),
                Line::Header(_) => return Err(bad(i + 1, "unexpected header".into())),
                Line::Event(e) => events.push(e),
                Line::Tick(o) => outputs.push(o),
            }
        }
        let header = header.ok_or_else(|| bad(1, "missing header".into()))?;
        if header.config.digest() != header.config_digest {
            return Err(bad(
                1,
                "config digest does not match the embedded config".into(),
            ));
        }
        if header.ticks != outputs.len() {
            return Err(bad(
                1,
                format!(
                    "header announces {} ticks, found {}",
                    header.ticks,
                    outputs.len()
                ),
            ));
        }
        Ok(RunRecord {
            header,
            outputs,
            events,
        })
    }

    /// SHA-256 of the serialized record; evidence records pin this value.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_jsonl().as_bytes()))
    }
}

/// Drives the monitor over every frame of `trace`.
pub fn replay(trace: &Trace, cfg: &MonitorConfig<f64>) -> Result<RunRecord, SimError> {
    if trace.meta.tick_ms != cfg.tick_ms {
        return Err(SimError::TickMismatch {
            trace: trace.meta.tick_ms,
            config: cfg.tick_ms,
        });
    }
    let mut monitor = OddMonitor::new(cfg.clone())?;
    let outputs = monitor.run(&trace.frames)?;
    let mut events = Vec::new();
    let mut prev = None;
    for o in &outputs {
        if prev != Some(o.mode) {
            events.push(ModeEvent {
                t: o.t,
                mode: o.mode,
                rules: o.rules.clone(),
            });
            prev = Some(o.mode);
        }
    }
    Ok(RunRecord {
        header: RunHeader {
            scenario_id: trace.meta.scenario_id.clone(),
            scenario_class: trace.meta.scenario_class.clone(),
            seed: trace.meta.seed,
            tick_ms: cfg.tick_ms,
            ticks: outputs.len(),
            trace_digest: trace_digest(trace),
            config_digest: cfg.digest(),
            config: cfg.clone(),
        },
        outputs,
        events,
    })
}
