use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Modality {
    Gps,
    Camera,
    Radar,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Gps, Modality::Camera, Modality::Radar];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Region {
    Urban,
    Suburban,
    Rural,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::Urban, Region::Suburban, Region::Rural];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Surface {
    Dry,
    Wet,
}

impl Surface {
    pub const ALL: [Surface; 2] = [Surface::Dry, Surface::Wet];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModalityReading<T> {
    pub valid: bool,
    pub confidence: T,
}

impl<T: Scalar> ModalityReading<T> {
    pub fn ok(confidence: T) -> Self {
        ModalityReading {
            valid: true,
            confidence,
        }
    }

    pub fn missing() -> Self {
        ModalityReading {
            valid: false,
            confidence: T::zero(),
        }
    }
}

/// One tick of multi-modal observation plus ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorFrame<T> {
    /// Simulated time, ms.
    pub t: u64,
    pub gps: ModalityReading<T>,
    pub camera: ModalityReading<T>,
    pub radar: ModalityReading<T>,
    pub gps_err_m: T,
    pub cam_reproj_err_px: T,
    pub est_pos: [T; 2],
    pub true_pos: [T; 2],
    pub map_age_h: T,
    pub speed_kmh: T,
    pub distance_delta_km: T,
    pub region: Region,
    pub surface: Surface,
    pub true_in_odd: bool,
}

impl<T: Scalar> SensorFrame<T> {
    /// All modalities valid at `confidence`, zero position error, fresh map.
    pub fn nominal(t: u64, confidence: T) -> Self {
        SensorFrame {
            t,
            gps: ModalityReading::ok(confidence),
            camera: ModalityReading::ok(confidence),
            radar: ModalityReading::ok(confidence),
            gps_err_m: T::zero(),
            cam_reproj_err_px: T::lit(0.5),
            est_pos: [T::zero(); 2],
            true_pos: [T::zero(); 2],
            map_age_h: T::one(),
            speed_kmh: T::lit(80.0),
            distance_delta_km: T::zero(),
            region: Region::Suburban,
            surface: Surface::Dry,
            true_in_odd: true,
        }
    }

    pub fn reading(&self, m: Modality) -> &ModalityReading<T> {
        match m {
            Modality::Gps => &self.gps,
            Modality::Camera => &self.camera,
            Modality::Radar => &self.radar,
        }
    }

    pub fn reading_mut(&mut self, m: Modality) -> &mut ModalityReading<T> {
        match m {
            Modality::Gps => &mut self.gps,
            Modality::Camera => &mut self.camera,
            Modality::Radar => &mut self.radar,
        }
    }

    /// Euclidean distance between estimated and true position, meters.
    pub fn position_deviation(&self) -> T {
        let dx = self.est_pos[0] - self.true_pos[0];
        let dy = self.est_pos[1] - self.true_pos[1];
        dx.hypot(dy)
    }

    /// Sets every modality's confidence, keeping validity.
    pub fn with_confidence(mut self, confidence: T) -> Self {
        for m in Modality::ALL {
            self.reading_mut(m).confidence = confidence;
        }
        self
    }
}

/// Monitor modes, declared in increasing precedence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    FullAutonomy,
    AutonomyInhibited,
    RecalMode,
    DegradedSafeMode,
    DriftHold,
    SafeStateRequested,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mode::FullAutonomy => "FULL_AUTONOMY",
            Mode::AutonomyInhibited => "AUTONOMY_INHIBITED",
            Mode::RecalMode => "RECAL_MODE",
            Mode::DegradedSafeMode => "DEGRADED_SAFE_MODE",
            Mode::DriftHold => "DRIFT_HOLD",
            Mode::SafeStateRequested => "SAFE_STATE_REQUESTED",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Action {
    #[serde(rename = "DRIVER_ALERT")]
    DriverAlert,
    #[serde(rename = "CONTROLLED_DECEL")]
    ControlledDecel,
    #[serde(rename = "SPEED_CAP_10KMH")]
    SpeedCap10Kmh,
    #[serde(rename = "RECALIBRATE")]
    Recalibrate,
    #[serde(rename = "SWITCH_REDUNDANT")]
    SwitchRedundant,
    #[serde(rename = "INHIBIT_ENGAGEMENT")]
    InhibitEngagement,
}

/// Rules that can fire on a tick, named after the requirement they enforce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RuleId {
    #[serde(rename = "R5_CONFIDENCE_FLOOR")]
    ConfidenceFloor,
    #[serde(rename = "R7_DRIFT")]
    Drift,
    #[serde(rename = "R8_DEGRADED")]
    Degraded,
    #[serde(rename = "R6_CALIBRATION")]
    Calibration,
    #[serde(rename = "R9_MAP_STALE")]
    MapStale,
    #[serde(rename = "R8_REWEIGHT")]
    Reweight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorOutput<T> {
    pub t: u64,
    pub mode: Mode,
    pub fused_confidence: T,
    pub weights: [T; 3],
    pub actions: BTreeSet<Action>,
    /// Rules whose condition held this tick, in evaluation order.
    pub rules: Vec<RuleId>,
}

impl<T> MonitorOutput<T> {
    pub fn fired(&self, rule: RuleId) -> bool {
        self.rules.contains(&rule)
    }
}
