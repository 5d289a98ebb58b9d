//! Delimited trace files: `#` metadata lines, a column header, one row per
//! tick. Floats are written in shortest round-trip form, so parsing a
//! written trace gives back the same frames bit for bit.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{SimError, Trace, TraceMeta};
use crate::odd_monitor::{ModalityReading, Region, SensorFrame, Surface};

const MAGIC: &str = "# odd-assure trace v1";
const UNITS: &str = "# units: t_ms=ms; *_conf=fraction; gps_err_m=m; cam_reproj_err_px=px; \
est_*_m,true_*_m=m; map_age_h=h; speed_kmh=km/h; distance_delta_km=km";

#[derive(Serialize, Deserialize)]
struct Row {
    t_ms: u64,
    gps_valid: bool,
    gps_conf: f64,
    camera_valid: bool,
    camera_conf: f64,
    radar_valid: bool,
    radar_conf: f64,
    gps_err_m: f64,
    cam_reproj_err_px: f64,
    est_x_m: f64,
    est_y_m: f64,
    true_x_m: f64,
    true_y_m: f64,
    map_age_h: f64,
    speed_kmh: f64,
    distance_delta_km: f64,
    region: Region,
    surface: Surface,
    true_in_odd: bool,
}

impl From<&SensorFrame<f64>> for Row {
    fn from(f: &SensorFrame<f64>) -> Self {
        Row {
            t_ms: f.t,
            gps_valid: f.gps.valid,
            gps_conf: f.gps.confidence,
            camera_valid: f.camera.valid,
            camera_conf: f.camera.confidence,
            radar_valid: f.radar.valid,
            radar_conf: f.radar.confidence,
            gps_err_m: f.gps_err_m,
            cam_reproj_err_px: f.cam_reproj_err_px,
            est_x_m: f.est_pos[0],
            est_y_m: f.est_pos[1],
            true_x_m: f.true_pos[0],
            true_y_m: f.true_pos[1],
            map_age_h: f.map_age_h,
            speed_kmh: f.speed_kmh,
            distance_delta_km: f.distance_delta_km,
            region: f.region,
            surface: f.surface,
            true_in_odd: f.true_in_odd,
        }
    }
}

impl From<Row> for SensorFrame<f64> {
    fn from(r: Row) -> Self {
        let reading = |valid, confidence| ModalityReading { valid, confidence };
        SensorFrame {
            t: r.t_ms,
            gps: reading(r.gps_valid, r.gps_conf),
            camera: reading(r.camera_valid, r.camera_conf),
            radar: reading(r.radar_valid, r.radar_conf),
            gps_err_m: r.gps_err_m,
            cam_reproj_err_px: r.cam_reproj_err_px,
            est_pos: [r.est_x_m, r.est_y_m],
            true_pos: [r.true_x_m, r.true_y_m],
            map_age_h: r.map_age_h,
            speed_kmh: r.speed_kmh,
            distance_delta_km: r.distance_delta_km,
            region: r.region,
            surface: r.surface,
            true_in_odd: r.true_in_odd,
        }
    }
}

pub fn write_trace(trace: &Trace) -> String {
    let m = &trace.meta;
    let mut out = format!(
        "{MAGIC}\n# scenario_id={}\n# scenario_class={}\n# seed={}\n# spec_digest={}\n# tick_ms={}\n{UNITS}\n",
        m.scenario_id, m.scenario_class, m.seed, m.spec_digest, m.tick_ms
    );
    let mut w = csv::Writer::from_writer(Vec::new());
    for f in &trace.frames {
        w.serialize(Row::from(f)).expect("trace row serializes");
    }
    let body = w.into_inner().expect("in-memory writer");
    out.push_str(std::str::from_utf8(&body).expect("csv output is utf-8"));
    out
}

/// SHA-256 of the written trace, hex encoded.
pub fn trace_digest(trace: &Trace) -> String {
    hex::encode(Sha256::digest(write_trace(trace).as_bytes()))
}

pub fn parse_trace(text: &str) -> Result<Trace, SimError> {
    let bad = |msg: String| SimError::TraceFormat(msg);
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(bad(format!("first line must be '{MAGIC}'")));
    }
    let mut field = |key: &str| -> Result<String, SimError> {
        let line = lines.next().unwrap_or_default();
        line.strip_prefix("# ")
            .and_then(|l| l.strip_prefix(key))
            .and_then(|l| l.strip_prefix('='))
            .map(str::to_string)
            .ok_or_else(|| bad(format!("expected '# {key}=...', got '{line}'")))
    };
    let scenario_id = field("scenario_id")?;
    let scenario_class = field("scenario_class")?;
    let seed = field("seed")?
        .parse()
        .map_err(|e| bad(format!("seed: {e}")))?;
    let spec_digest = field("spec_digest")?;
    let tick_ms = field("tick_ms")?
        .parse()
        .map_err(|e| bad(format!("tick_ms: {e}")))?;
    let meta = TraceMeta {
        scenario_id,
        scenario_class,
        seed,
        spec_digest,
        tick_ms,
    };

    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let frames = r
        .deserialize::<Row>()
        .map(|row| row.map(SensorFrame::from))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| bad(e.to_string()))?;
    Ok(Trace { meta, frames })
}
