//! Deterministic discrete-time ODD safety monitor.
//!
//! Every tick the monitor fuses the per-modality confidences, then evaluates
//! five rules in fixed order: confidence floor, drift window, degraded-mode
//! clock, calibration schedule, map staleness. Each rule drives an
//! independent latch; the reported mode is the highest-precedence latch that
//! is set:
//!
//! `SAFE_STATE_REQUESTED > DRIFT_HOLD > DEGRADED_SAFE_MODE > RECAL_MODE`.
//!
//! Before engagement a stale map keeps the monitor in `AUTONOMY_INHIBITED`.
//! After engagement map staleness escalates to a safe-state request, which is
//! terminal for the run.

mod config;
mod types;

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

pub use config::{ConfigError, MonitorConfig};
pub use types::{
    Action, Modality, ModalityReading, Mode, MonitorOutput, Region, RuleId, SensorFrame, Surface,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MonitorError {
    #[error("trace integrity: expected frame at t={expected} ms, got t={got} ms")]
    NonContiguous { expected: u64, got: u64 },
    #[error("frame at t={t} ms is malformed: {reason}")]
    InvalidFrame { t: u64, reason: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Sliding-window max/min of the position deviation using monotonic queues.
///
/// The window at time `t` holds samples with timestamps in `(t - W, t]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DriftWindow<T> {
    maxima: VecDeque<(u64, T)>,
    minima: VecDeque<(u64, T)>,
}

impl<T: Scalar> DriftWindow<T> {
    pub fn push(&mut self, t: u64, deviation: T, window_ms: u64) {
        while self.maxima.back().is_some_and(|&(_, v)| v <= deviation) {
            self.maxima.pop_back();
        }
        self.maxima.push_back((t, deviation));
        while self.minima.back().is_some_and(|&(_, v)| v >= deviation) {
            self.minima.pop_back();
        }
        self.minima.push_back((t, deviation));
        for q in [&mut self.maxima, &mut self.minima] {
            while q.front().is_some_and(|&(ts, _)| ts + window_ms <= t) {
                q.pop_front();
            }
        }
    }

    /// Max minus min deviation over the current window.
    pub fn growth(&self) -> T {
        match (self.maxima.front(), self.minima.front()) {
            (Some(&(_, hi)), Some(&(_, lo))) => hi - lo,
            _ => T::zero(),
        }
    }
}

/// Which calibration limits were exceeded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalibrationFault {
    pub camera: bool,
    pub gps: bool,
}

impl CalibrationFault {
    fn any(self) -> bool {
        self.camera || self.gps
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorState<T> {
    pub mode: Mode,
    pub engaged: bool,
    pub weights: [T; 3],
    pub gap_clock_ms: [u64; 3],
    pub below_degraded_ms: u64,
    pub above_degraded_ms: u64,
    pub below_floor_since: Option<u64>,
    pub drift: DriftWindow<T>,
    pub next_calibration_ms: Option<u64>,
    pub last_t: Option<u64>,
    pub safe_state: bool,
    pub drift_hold: bool,
    pub drift_quiet_ms: u64,
    pub degraded: bool,
    pub recal: Option<CalibrationFault>,
    pub recal_quiet_ms: u64,
}

/// Fresh state for `cfg`: full autonomy pending the engagement gate.
pub fn reset<T: Scalar>(cfg: &MonitorConfig<T>) -> Result<MonitorState<T>, ConfigError> {
    cfg.validate()?;
    Ok(MonitorState {
        mode: Mode::FullAutonomy,
        engaged: false,
        weights: cfg.weights(),
        gap_clock_ms: [0; 3],
        below_degraded_ms: 0,
        above_degraded_ms: 0,
        below_floor_since: None,
        drift: DriftWindow::default(),
        next_calibration_ms: None,
        last_t: None,
        safe_state: false,
        drift_hold: false,
        drift_quiet_ms: 0,
        degraded: false,
        recal: None,
        recal_quiet_ms: 0,
    })
}

fn advanced_gap_clocks<T: Scalar>(
    frame: &SensorFrame<T>,
    state: &MonitorState<T>,
    cfg: &MonitorConfig<T>,
) -> [u64; 3] {
    Modality::ALL.map(|m| {
        if frame.reading(m).valid {
            0
        } else {
            state.gap_clock_ms[m.index()].saturating_add(cfg.tick_ms)
        }
    })
}

/// Fused inside-ODD confidence and the weights used to compute it.
///
/// A modality is dropped when it is invalid this tick or its gap clock
/// exceeds `gap_ms`; the remaining base weights are renormalized to sum to
/// one. With nothing active the fused confidence is zero.
pub fn fuse<T: Scalar>(
    frame: &SensorFrame<T>,
    state: &MonitorState<T>,
    cfg: &MonitorConfig<T>,
) -> (T, [T; 3]) {
    let gaps = advanced_gap_clocks(frame, state, cfg);
    let base = cfg.weights();
    let active = Modality::ALL.map(|m| frame.reading(m).valid && gaps[m.index()] <= cfg.gap_ms);
    let total = Modality::ALL
        .iter()
        .filter(|m| active[m.index()])
        .fold(T::zero(), |acc, m| acc + base[m.index()]);
    if total <= T::zero() {
        return (T::zero(), [T::zero(); 3]);
    }
    let weights = Modality::ALL.map(|m| {
        if active[m.index()] {
            base[m.index()] / total
        } else {
            T::zero()
        }
    });
    let fused = Modality::ALL.iter().fold(T::zero(), |acc, m| {
        acc + weights[m.index()] * frame.reading(*m).confidence
    });
    (fused, weights)
}

fn check_frame<T: Scalar>(frame: &SensorFrame<T>) -> Result<(), MonitorError> {
    let bad = |reason: String| MonitorError::InvalidFrame { t: frame.t, reason };
    for m in Modality::ALL {
        let c = frame.reading(m).confidence;
        if !(c >= T::zero() && c <= T::one()) {
            return Err(bad(format!("{m:?} confidence {c} outside [0, 1]")));
        }
    }
    if frame.distance_delta_km.is_nan() || frame.distance_delta_km < T::zero() {
        return Err(bad("negative distance increment".into()));
    }
    Ok(())
}

fn actions_for(mode: Mode, recal: Option<CalibrationFault>) -> BTreeSet<Action> {
    use Action::*;
    match mode {
        Mode::FullAutonomy => BTreeSet::new(),
        Mode::AutonomyInhibited => BTreeSet::from([InhibitEngagement]),
        Mode::RecalMode => {
            let fault = recal.unwrap_or_default();
            let mut set = BTreeSet::new();
            if fault.camera {
                set.insert(Recalibrate);
            }
            if fault.gps {
                set.insert(SwitchRedundant);
            }
            set
        }
        Mode::DegradedSafeMode => BTreeSet::from([DriverAlert, ControlledDecel]),
        Mode::DriftHold => BTreeSet::from([DriverAlert, SpeedCap10Kmh]),
        Mode::SafeStateRequested => BTreeSet::from([DriverAlert, ControlledDecel]),
    }
}

impl<T: Scalar> MonitorState<T> {
    /// Advances the state by one frame in place.
    pub fn advance(
        &mut self,
        frame: &SensorFrame<T>,
        cfg: &MonitorConfig<T>,
    ) -> Result<MonitorOutput<T>, MonitorError> {
        if let Some(last) = self.last_t {
            let expected = last + cfg.tick_ms;
            if frame.t != expected {
                return Err(MonitorError::NonContiguous {
                    expected,
                    got: frame.t,
                });
            }
        }
        check_frame(frame)?;

        let (fused, weights) = fuse(frame, self, cfg);
        self.gap_clock_ms = advanced_gap_clocks(frame, self, cfg);
        self.weights = weights;
        self.last_t = Some(frame.t);

        let tick = cfg.tick_ms;
        let mut rules = Vec::new();

        // (1) confidence floor
        if fused < cfg.confidence_floor {
            self.below_floor_since.get_or_insert(frame.t);
            rules.push(RuleId::ConfidenceFloor);
        } else {
            self.below_floor_since = None;
        }

        // (2) drift window
        self.drift
            .push(frame.t, frame.position_deviation(), cfg.drift_window_ms);
        let drift_fired = self.drift.growth() > cfg.drift_limit_m;
        if drift_fired {
            rules.push(RuleId::Drift);
        }

        // (3) degraded-mode clock
        if fused < cfg.degraded_floor {
            self.below_degraded_ms += tick;
            self.above_degraded_ms = 0;
        } else {
            self.below_degraded_ms = 0;
            self.above_degraded_ms += tick;
        }
        let degraded_fired = self.below_degraded_ms > cfg.degraded_window_ms;
        if degraded_fired {
            rules.push(RuleId::Degraded);
        }

        // (4) calibration schedule
        let period = cfg.calib_period_ms;
        let next = *self
            .next_calibration_ms
            .get_or_insert((frame.t / period + 1) * period);
        let current_fault = CalibrationFault {
            camera: frame.cam_reproj_err_px > cfg.reproj_limit_px,
            gps: frame.gps_err_m > cfg.gps_drift_limit_m,
        };
        let mut calibration_fault = None;
        if frame.t >= next {
            self.next_calibration_ms = Some((frame.t / period + 1) * period);
            if current_fault.any() {
                calibration_fault = Some(current_fault);
                rules.push(RuleId::Calibration);
            }
        }

        // (5) map staleness
        let stale = frame.map_age_h > cfg.map_staleness_limit_h;
        if stale {
            rules.push(RuleId::MapStale);
        }

        if weights
            .iter()
            .zip(cfg.weights())
            .any(|(w, b)| *w == T::zero() && b > T::zero())
        {
            rules.push(RuleId::Reweight);
        }

        if !self.engaged {
            if stale {
                self.mode = Mode::AutonomyInhibited;
                return Ok(self.output(frame.t, fused, rules));
            }
            self.engaged = true;
        }

        if self.below_floor_since.is_some() || stale {
            self.safe_state = true;
        }

        if drift_fired {
            self.drift_hold = true;
            self.drift_quiet_ms = 0;
        } else if self.drift_hold {
            self.drift_quiet_ms += tick;
            if self.drift_quiet_ms >= cfg.drift_window_ms {
                self.drift_hold = false;
            }
        }

        if degraded_fired {
            self.degraded = true;
        } else if self.degraded && self.above_degraded_ms > cfg.degraded_window_ms {
            self.degraded = false;
        }

        if let Some(fault) = calibration_fault {
            self.recal = Some(fault);
            self.recal_quiet_ms = 0;
        } else if let Some(fault) = self.recal {
            if current_fault.any() {
                self.recal_quiet_ms = 0;
                self.recal = Some(CalibrationFault {
                    camera: fault.camera || current_fault.camera,
                    gps: fault.gps || current_fault.gps,
                });
            } else {
                self.recal_quiet_ms += tick;
                if self.recal_quiet_ms >= period {
                    self.recal = None;
                }
            }
        }

        self.mode = if self.safe_state {
            Mode::SafeStateRequested
        } else if self.drift_hold {
            Mode::DriftHold
        } else if self.degraded {
            Mode::DegradedSafeMode
        } else if self.recal.is_some() {
            Mode::RecalMode
        } else {
            Mode::FullAutonomy
        };
        Ok(self.output(frame.t, fused, rules))
    }

    fn output(&self, t: u64, fused: T, rules: Vec<RuleId>) -> MonitorOutput<T> {
        MonitorOutput {
            t,
            mode: self.mode,
            fused_confidence: fused,
            weights: self.weights,
            actions: actions_for(self.mode, self.recal),
            rules,
        }
    }
}

/// Pure single-step transition. Clones the state; prefer [`OddMonitor`] in loops.
pub fn step<T: Scalar>(
    frame: &SensorFrame<T>,
    state: &MonitorState<T>,
    cfg: &MonitorConfig<T>,
) -> Result<(MonitorState<T>, MonitorOutput<T>), MonitorError> {
    let mut next = state.clone();
    let out = next.advance(frame, cfg)?;
    Ok((next, out))
}

/// A monitor instance owning its config and mutable state.
#[derive(Debug, Clone)]
pub struct OddMonitor<T> {
    cfg: MonitorConfig<T>,
    state: MonitorState<T>,
}

impl<T: Scalar> OddMonitor<T> {
    pub fn new(cfg: MonitorConfig<T>) -> Result<Self, ConfigError> {
        let state = reset(&cfg)?;
        Ok(OddMonitor { cfg, state })
    }

    pub fn step(&mut self, frame: &SensorFrame<T>) -> Result<MonitorOutput<T>, MonitorError> {
        self.state.advance(frame, &self.cfg)
    }

    pub fn run<'a>(
        &mut self,
        frames: impl IntoIterator<Item = &'a SensorFrame<T>>,
    ) -> Result<Vec<MonitorOutput<T>>, MonitorError> {
        frames.into_iter().map(|f| self.step(f)).collect()
    }

    pub fn state(&self) -> &MonitorState<T> {
        &self.state
    }

    pub fn config(&self) -> &MonitorConfig<T> {
        &self.cfg
    }
}

#[cfg(test)]
mod tests;
