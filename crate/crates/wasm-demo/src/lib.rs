//! Browser demo: the codec, geometry and filter running client-side.
//!
//! Each operation is a plain function returning JSON text so it can be tested
//! natively; the `#[wasm_bindgen]` wrappers only forward.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use ars548::cloud::{detections_to_cloud, spherical_to_cartesian};
use ars548::codec::{crc16_ccitt_false, decode_payload, encode_payload, FrameHeader, HEADER_LEN};
use ars548::filter::{filter_objects, min_speed_predicate};
use ars548::simulator::{synthesize_cycle, Scenario};
use ars548::{object_speed, FramePayload, SensorStatus, KMH_PER_MPS};

const DEMO_SCENARIO: &str = r#"
duration = 20.0
cycle_rate = 20.0
seed = 5

[detection_noise]
range = 0.15
azimuth = 0.004
elevation = 0.002
range_rate = 0.05

[[objects]]
position = [70.0, -3.5, 0.5]
velocity = [-13.9, 0.0]
classification = "CAR"
detections_per_cycle = 8

[[objects]]
position = [20.0, 2.0, 0.5]
velocity = [1.4, 0.0]
classification = "BICYCLE"
shape = [1.8, 0.6]
detections_per_cycle = 3

[[objects]]
position = [12.0, 6.0, 0.0]
velocity = [0.0, -1.2]
classification = "PEDESTRIAN"
shape = [0.5, 0.5]
detections_per_cycle = 2

[[objects]]
position = [40.0, 3.5, 0.8]
velocity = [8.0, 0.0]
acceleration = [0.5, 0.0]
classification = "TRUCK"
shape = [12.0, 2.5]
detections_per_cycle = 10
"#;

fn demo_scenario() -> Scenario {
    Scenario::from_toml(DEMO_SCENARIO).expect("built-in scenario is valid")
}

/// Cycle nearest to `t` seconds, clamped to the scenario.
fn cycle_at(scenario: &Scenario, t: f64) -> u64 {
    let last = scenario.cycle_count().saturating_sub(1);
    if !t.is_finite() || t <= 0.0 {
        return 0;
    }
    ((t * scenario.cycle_rate).round() as u64).min(last)
}

/// Cartesian position of a spherical measurement.
pub fn probe_json(azimuth: f64, elevation: f64, range: f64) -> String {
    let (x, y, z) = spherical_to_cartesian(azimuth, elevation, range);
    json!({ "x": x, "y": y, "z": z, "norm": (x * x + y * y + z * z).sqrt() }).to_string()
}

/// Objects and detections of the demo scene at `t` seconds, with each object
/// marked kept or dropped by a `min_speed_kmh` filter.
pub fn scene_json(t: f64, min_speed_kmh: f64) -> String {
    let scenario = demo_scenario();
    let cycle = cycle_at(&scenario, t);
    let out = synthesize_cycle(&scenario, cycle);
    let pred = match min_speed_predicate(min_speed_kmh) {
        Ok(p) => p,
        Err(e) => return json!({ "error": e.to_string() }).to_string(),
    };
    let kept: Vec<u32> = filter_objects(&out.objects, &pred).objects.iter().map(|o| o.id).collect();
    let objects: Vec<Value> = out
        .objects
        .objects
        .iter()
        .map(|o| {
            json!({
                "id": o.id,
                "x": o.position_x,
                "y": o.position_y,
                "yaw": o.orientation_yaw,
                "length": o.shape_length,
                "width": o.shape_width,
                "speed_kmh": object_speed(o) * KMH_PER_MPS,
                "class": format!("{:?}", o.dominant_class()).to_uppercase(),
                "kept": kept.contains(&o.id),
            })
        })
        .collect();
    let points: Vec<Value> = detections_to_cloud(&out.detections)
        .points
        .iter()
        .map(|p| json!({ "x": p.x, "y": p.y, "doppler": p.doppler }))
        .collect();
    json!({
        "cycle": cycle,
        "time": cycle as f64 / scenario.cycle_rate,
        "duration": scenario.duration,
        "objects": objects,
        "detections": points,
    })
    .to_string()
}

fn sample_frame(kind: &str) -> Option<FramePayload> {
    let out = synthesize_cycle(&demo_scenario(), 0);
    match kind {
        "detection_list" => Some(FramePayload::Detections(out.detections)),
        "object_list" => Some(FramePayload::Objects(out.objects)),
        "status" => Some(FramePayload::Status(SensorStatus { stamp: out.objects.stamp, ..Default::default() })),
        _ => None,
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect::<Vec<_>>().join(" ")
}

/// Encodes a sample frame of `kind` (`status`, `object_list`,
/// `detection_list`), optionally flips every bit of byte `flip` (negative:
/// none), and decodes it again.
pub fn inspect_json(kind: &str, flip: i64) -> String {
    let Some(payload) = sample_frame(kind) else {
        return json!({ "error": format!("unknown frame kind `{kind}`") }).to_string();
    };
    let mut bytes = encode_payload(&payload).expect("sample frames are valid");
    let flipped = usize::try_from(flip).ok().filter(|&i| i < bytes.len());
    if let Some(i) = flipped {
        bytes[i] ^= 0xFF;
    }
    let header = FrameHeader::parse(&bytes).ok();
    let result = match decode_payload(&bytes) {
        Ok(_) => "OK".to_string(),
        Err(e) => e.kind().name().to_uppercase(),
    };
    let error = decode_payload(&bytes).err().map(|e| e.to_string());
    json!({
        "length": bytes.len(),
        "flipped": flipped,
        "header": header.map(|h| json!({
            "service_id": h.service_id,
            "method_id": h.method_id,
            "payload_length": h.payload_length,
            "crc16": format!("{:#06x}", h.crc16),
        })),
        "computed_crc16": format!("{:#06x}", crc16_ccitt_false(&bytes[HEADER_LEN.min(bytes.len())..])),
        "head_hex": hex(&bytes[..bytes.len().min(48)]),
        "result": result,
        "error": error,
    })
    .to_string()
}

#[wasm_bindgen]
pub fn probe(azimuth: f64, elevation: f64, range: f64) -> String {
    probe_json(azimuth, elevation, range)
}

#[wasm_bindgen]
pub fn scene(t: f64, min_speed_kmh: f64) -> String {
    scene_json(t, min_speed_kmh)
}

#[wasm_bindgen]
pub fn inspect(kind: &str, flip: i32) -> String {
    inspect_json(kind, flip as i64)
}
