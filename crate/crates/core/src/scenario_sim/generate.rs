//! Virtual LLP: per-modality confidence is the region/surface base minus a
//! linear response to active perturbations plus seeded Gaussian noise,
//! clamped to [0, 1].
//!
//! The noise stream draws exactly three samples per tick whatever the
//! injections are, so an injection cannot shift the noise seen by frames
//! outside its own interval.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::spec::{InjectionKind, ScenarioSpec};
use super::{SimError, Trace, TraceMeta};
use crate::odd_monitor::{Modality, ModalityReading, SensorFrame};

const MS_PER_HOUR: f64 = 3_600_000.0;
const BOUNDARY_EPS_KM: f64 = 1e-9;

/// Sum of active perturbation levels on one tick.
#[derive(Default)]
struct Levels {
    gps_ramp_m: f64,
    camera_px: f64,
    weather: f64,
    map_h: f64,
    skim: Option<f64>,
    gap: [bool; 3],
}

fn levels(spec: &ScenarioSpec, t: u64) -> Levels {
    let mut l = Levels::default();
    for inj in spec.injections.iter().filter(|i| i.active(t)) {
        match inj.kind {
            InjectionKind::GpsDriftRamp => {
                let frac = (t - inj.start_ms) as f64 / inj.duration_ms as f64;
                l.gps_ramp_m += inj.magnitude * frac;
            }
            InjectionKind::CameraNoise => l.camera_px += inj.magnitude,
            InjectionKind::Weather => l.weather += inj.magnitude,
            InjectionKind::MapStale => l.map_h += inj.magnitude,
            InjectionKind::BoundarySkim => l.skim = Some(inj.magnitude),
            InjectionKind::DataGap => {
                if let Some(m) = inj.modality {
                    l.gap[m.index()] = true;
                }
            }
        }
    }
    l
}

/// Deterministic trace for `spec`; the route loops if it is shorter than
/// the scenario.
pub fn generate(spec: &ScenarioSpec) -> Result<Trace, SimError> {
    spec.validate()?;
    let llp = &spec.llp;
    let coef = &llp.coefficients;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut seg_idx = 0;
    let mut seg_pos_km = 0.0;
    let mut odometer_km = 0.0;
    let mut frames = Vec::with_capacity(spec.ticks() as usize);

    for k in 0..spec.ticks() {
        let t = k * spec.tick_ms;
        let noise: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
        let seg = &spec.segments[seg_idx];
        let l = levels(spec, t);

        let in_base = llp.base_confidence(seg.region, seg.surface);
        let (nominal, true_in_odd) = match (seg.in_odd, l.skim) {
            (false, _) => (llp.out_of_odd, false),
            (true, Some(fooled)) => (llp.out_of_odd + fooled * (in_base - llp.out_of_odd), false),
            (true, None) => (in_base, true),
        };
        let penalty = [
            coef.gps_drift * l.gps_ramp_m,
            coef.camera_noise * l.camera_px + coef.weather_camera * l.weather,
            coef.weather_radar * l.weather,
        ];
        let reading = |m: Modality| {
            let i = m.index();
            let c = (nominal - penalty[i] + llp.noise_sigma * noise[i]).clamp(0.0, 1.0);
            ModalityReading {
                valid: !l.gap[i],
                confidence: c,
            }
        };

        let gps_err_m = llp.base_gps_err_m + l.gps_ramp_m;
        let x_m = odometer_km * 1000.0;
        let delta_km = seg.speed_kmh * spec.tick_ms as f64 / MS_PER_HOUR;
        frames.push(SensorFrame {
            t,
            gps: reading(Modality::Gps),
            camera: reading(Modality::Camera),
            radar: reading(Modality::Radar),
            gps_err_m,
            cam_reproj_err_px: llp.base_reproj_px + l.camera_px,
            est_pos: [x_m, gps_err_m],
            true_pos: [x_m, 0.0],
            map_age_h: llp.initial_map_age_h + t as f64 / MS_PER_HOUR + l.map_h,
            speed_kmh: seg.speed_kmh,
            distance_delta_km: delta_km,
            region: seg.region,
            surface: seg.surface,
            true_in_odd,
        });

        odometer_km += delta_km;
        seg_pos_km += delta_km;
        // the tolerance keeps accumulated rounding from delaying a boundary
        while seg_pos_km >= spec.segments[seg_idx].length_km - BOUNDARY_EPS_KM {
            seg_pos_km = (seg_pos_km - spec.segments[seg_idx].length_km).max(0.0);
            seg_idx = (seg_idx + 1) % spec.segments.len();
        }
    }

    Ok(Trace {
        meta: TraceMeta {
            scenario_id: spec.id.clone(),
            scenario_class: spec.scenario_class.clone(),
            seed: spec.seed,
            spec_digest: spec.digest(),
            tick_ms: spec.tick_ms,
        },
        frames,
    })
}
