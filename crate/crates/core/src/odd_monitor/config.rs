use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::scalar::{unit_sum_tolerance, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid monitor config field '{field}': {reason}")]
pub struct ConfigError {
    pub field: &'static str,
    pub reason: String,
}

/// Thresholds and timing of the runtime monitor. All times are integer
/// milliseconds and must be positive multiples of `tick_ms`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonitorConfig<T> {
    pub tick_ms: u64,
    pub weight_gps: T,
    pub weight_camera: T,
    pub weight_radar: T,
    pub confidence_floor: T,
    pub safe_state_latency_ms: u64,
    pub gap_ms: u64,
    pub degraded_floor: T,
    pub degraded_window_ms: u64,
    pub calib_period_ms: u64,
    pub reproj_limit_px: T,
    pub gps_drift_limit_m: T,
    pub drift_window_ms: u64,
    pub drift_limit_m: T,
    pub drift_speed_cap_kmh: T,
    pub map_staleness_limit_h: T,
}

impl<T: Scalar> Default for MonitorConfig<T> {
    fn default() -> Self {
        MonitorConfig {
            tick_ms: 10,
            weight_gps: T::lit(0.40),
            weight_camera: T::lit(0.35),
            weight_radar: T::lit(0.25),
            confidence_floor: T::lit(0.80),
            safe_state_latency_ms: 100,
            gap_ms: 200,
            degraded_floor: T::lit(0.75),
            degraded_window_ms: 100,
            calib_period_ms: 600_000,
            reproj_limit_px: T::lit(2.0),
            gps_drift_limit_m: T::lit(10.0),
            drift_window_ms: 30_000,
            drift_limit_m: T::lit(3.0),
            drift_speed_cap_kmh: T::lit(10.0),
            map_staleness_limit_h: T::lit(24.0),
        }
    }
}

impl<T: Scalar> MonitorConfig<T> {
    /// Base fusion weights in `Modality::ALL` order.
    pub fn weights(&self) -> [T; 3] {
        [self.weight_gps, self.weight_camera, self.weight_radar]
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |field, reason: &str| {
            Err(ConfigError {
                field,
                reason: reason.to_string(),
            })
        };
        if self.tick_ms == 0 {
            return bad("tick_ms", "must be positive");
        }
        for (field, value) in [
            ("safe_state_latency_ms", self.safe_state_latency_ms),
            ("gap_ms", self.gap_ms),
            ("degraded_window_ms", self.degraded_window_ms),
            ("calib_period_ms", self.calib_period_ms),
            ("drift_window_ms", self.drift_window_ms),
        ] {
            if value == 0 || value % self.tick_ms != 0 {
                return Err(ConfigError {
                    field,
                    reason: format!(
                        "{value} ms is not a positive multiple of the {} ms tick",
                        self.tick_ms
                    ),
                });
            }
        }
        for (field, w) in [
            ("weight_gps", self.weight_gps),
            ("weight_camera", self.weight_camera),
            ("weight_radar", self.weight_radar),
        ] {
            if !(w >= T::zero() && w <= T::one()) {
                return bad(field, "must lie in [0, 1]");
            }
        }
        let sum = self.weight_gps + self.weight_camera + self.weight_radar;
        if (sum - T::one()).abs() > unit_sum_tolerance::<T>() {
            return Err(ConfigError {
                field: "weight_gps",
                reason: format!("fusion weights sum to {sum}, expected 1"),
            });
        }
        for (field, v) in [
            ("confidence_floor", self.confidence_floor),
            ("degraded_floor", self.degraded_floor),
        ] {
            if !(v > T::zero() && v < T::one()) {
                return bad(field, "must lie in (0, 1)");
            }
        }
        for (field, v) in [
            ("reproj_limit_px", self.reproj_limit_px),
            ("gps_drift_limit_m", self.gps_drift_limit_m),
            ("drift_limit_m", self.drift_limit_m),
            ("drift_speed_cap_kmh", self.drift_speed_cap_kmh),
            ("map_staleness_limit_h", self.map_staleness_limit_h),
        ] {
            if !(v.is_finite() && v > T::zero()) {
                return bad(field, "must be positive and finite");
            }
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON encoding, hex encoded.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}
