use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::SimError;
use crate::odd_monitor::{Modality, Region, Surface};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum InjectionKind {
    /// GPS error and lateral position offset ramp linearly from 0 to the
    /// magnitude (m) over the injection.
    GpsDriftRamp,
    /// Camera reprojection error raised by the magnitude (px).
    CameraNoise,
    /// One modality delivers no valid data.
    DataGap,
    /// Rain or fog of intensity `magnitude` in [0, 1].
    Weather,
    /// Map age raised by the magnitude (h).
    MapStale,
    /// The vehicle is outside the ODD while the LLP is fooled to the
    /// degree `magnitude` in [0, 1] (1 = in-ODD confidence).
    BoundarySkim,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Injection {
    pub kind: InjectionKind,
    pub start_ms: u64,
    pub duration_ms: u64,
    pub magnitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modality: Option<Modality>,
}

impl Injection {
    /// Active on `[start_ms, start_ms + duration_ms)`.
    pub fn active(&self, t: u64) -> bool {
        t >= self.start_ms && t < self.start_ms + self.duration_ms
    }

    fn end_ms(&self) -> u64 {
        self.start_ms + self.duration_ms
    }

    fn channel(&self) -> (InjectionKind, Option<Modality>) {
        (self.kind, self.modality)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub region: Region,
    pub surface: Surface,
    pub length_km: f64,
    pub speed_kmh: f64,
    #[serde(default = "yes")]
    pub in_odd: bool,
}

fn yes() -> bool {
    true
}

/// Linear-response coefficients of the virtual LLP, confidence lost per
/// unit of perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Coefficients {
    /// GPS confidence per meter of GPS error.
    pub gps_drift: f64,
    /// Camera confidence per pixel of added reprojection error.
    pub camera_noise: f64,
    /// Camera confidence per unit weather intensity.
    pub weather_camera: f64,
    /// Radar confidence per unit weather intensity.
    pub weather_radar: f64,
}

impl Default for Coefficients {
    fn default() -> Self {
        Coefficients {
            gps_drift: 0.01,
            camera_noise: 0.02,
            weather_camera: 0.10,
            weather_radar: 0.03,
        }
    }
}

/// Virtual LLP error model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LlpModel {
    /// In-ODD confidence per region on a dry surface.
    pub base: BTreeMap<Region, f64>,
    pub wet_penalty: f64,
    /// Confidence when the vehicle is outside the ODD and the LLP notices.
    pub out_of_odd: f64,
    pub noise_sigma: f64,
    pub coefficients: Coefficients,
    pub base_gps_err_m: f64,
    pub base_reproj_px: f64,
    pub initial_map_age_h: f64,
}

impl Default for LlpModel {
    fn default() -> Self {
        LlpModel {
            base: BTreeMap::from([
                (Region::Urban, 0.93),
                (Region::Suburban, 0.95),
                (Region::Rural, 0.94),
            ]),
            wet_penalty: 0.02,
            out_of_odd: 0.40,
            noise_sigma: 0.01,
            coefficients: Coefficients::default(),
            base_gps_err_m: 1.0,
            base_reproj_px: 0.5,
            initial_map_age_h: 1.0,
        }
    }
}

impl LlpModel {
    pub fn base_confidence(&self, region: Region, surface: Surface) -> f64 {
        let wet = if surface == Surface::Wet {
            self.wet_penalty
        } else {
            0.0
        };
        self.base.get(&region).copied().unwrap_or(0.0) - wet
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub id: String,
    pub seed: u64,
    pub duration_ms: u64,
    #[serde(default = "default_tick")]
    pub tick_ms: u64,
    pub scenario_class: String,
    #[serde(rename = "segment")]
    pub segments: Vec<Segment>,
    #[serde(rename = "injection", default)]
    pub injections: Vec<Injection>,
    #[serde(default)]
    pub llp: LlpModel,
}

fn default_tick() -> u64 {
    10
}

fn bad(msg: impl Into<String>) -> Result<(), SimError> {
    Err(SimError::Spec(msg.into()))
}

impl ScenarioSpec {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let spec: ScenarioSpec = toml::from_str(text).map_err(|e| SimError::Spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario spec serializes")
    }

    /// SHA-256 of the canonical JSON encoding, hex encoded.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("scenario spec serializes");
        hex::encode(Sha256::digest(&canonical))
    }

    pub fn ticks(&self) -> u64 {
        self.duration_ms / self.tick_ms
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.id.trim().is_empty() {
            return bad("id must not be empty");
        }
        if self.tick_ms == 0 {
            return bad("tick_ms must be positive");
        }
        if self.duration_ms == 0 || !self.duration_ms.is_multiple_of(self.tick_ms) {
            return bad("duration_ms must be a positive multiple of tick_ms");
        }
        if self.segments.is_empty() {
            return bad("route needs at least one segment");
        }
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.length_km > 0.0 && s.length_km.is_finite()) {
                return bad(format!("segment {i}: length_km must be positive"));
            }
            if !(s.speed_kmh > 0.0 && s.speed_kmh.is_finite()) {
                return bad(format!("segment {i}: speed_kmh must be positive"));
            }
        }
        let llp = &self.llp;
        for r in Region::ALL {
            match llp.base.get(&r) {
                Some(b) if (0.0..=1.0).contains(b) => {}
                _ => return bad(format!("llp.base needs a value in [0, 1] for {r:?}")),
            }
        }
        for (name, v) in [
            ("wet_penalty", llp.wet_penalty),
            ("out_of_odd", llp.out_of_odd),
            ("noise_sigma", llp.noise_sigma),
            ("base_gps_err_m", llp.base_gps_err_m),
            ("base_reproj_px", llp.base_reproj_px),
            ("initial_map_age_h", llp.initial_map_age_h),
            ("coefficients.gps_drift", llp.coefficients.gps_drift),
            ("coefficients.camera_noise", llp.coefficients.camera_noise),
            (
                "coefficients.weather_camera",
                llp.coefficients.weather_camera,
            ),
            ("coefficients.weather_radar", llp.coefficients.weather_radar),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("llp.{name} must be finite and non-negative"));
            }
        }
        for (i, inj) in self.injections.iter().enumerate() {
            if inj.duration_ms == 0 {
                return bad(format!("injection {i}: duration_ms must be positive"));
            }
            if inj.end_ms() > self.duration_ms {
                return bad(format!(
                    "injection {i}: [{}, {}] ms leaves the scenario's [0, {}] ms",
                    inj.start_ms,
                    inj.end_ms(),
                    self.duration_ms
                ));
            }
            if !(inj.magnitude >= 0.0 && inj.magnitude.is_finite()) {
                return bad(format!(
                    "injection {i}: magnitude must be finite and non-negative"
                ));
            }
            let unit = matches!(
                inj.kind,
                InjectionKind::Weather | InjectionKind::BoundarySkim
            );
            if unit && inj.magnitude > 1.0 {
                return bad(format!(
                    "injection {i}: {:?} magnitude must be in [0, 1]",
                    inj.kind
                ));
            }
            match (inj.kind, inj.modality) {
                (InjectionKind::DataGap, None) => {
                    return bad(format!("injection {i}: DATA_GAP needs a modality"))
                }
                (InjectionKind::DataGap, Some(_)) | (_, None) => {}
                (k, Some(_)) => {
                    return bad(format!("injection {i}: {k:?} does not take a modality"))
                }
            }
        }
        for (i, a) in self.injections.iter().enumerate() {
            for (j, b) in self.injections.iter().enumerate().skip(i + 1) {
                if a.channel() == b.channel() && a.start_ms < b.end_ms() && b.start_ms < a.end_ms()
                {
                    return bad(format!(
                        "injections {i} and {j} overlap on the same channel ({:?})",
                        a.kind
                    ));
                }
            }
        }
        Ok(())
    }
}
