//! Scenario-driven sensor emulator.
//!
//! Objects follow constant-acceleration kinematics and are reported without
//! noise; detections sample each object's true spherical coordinates with
//! seeded Gaussian noise.

#[cfg(feature = "net")]
mod emitter;
mod rng;
mod scenario;

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::time::Duration;

use serde::{Deserialize, Serialize};

#[cfg(feature = "net")]
pub use emitter::{run_emitter, EmissionSummary, EmitError, Emitter, EmitterConfig, StampBase};
pub use rng::CounterRng;
pub use scenario::{DetectionNoise, Scenario, ScenarioError, ScenarioObject, MAX_DETECTIONS_PER_OBJECT};

use crate::model::{
    Classification, Detection, DetectionList, MeasurementStatus, MovementStatus, ObjectList,
    SyncStatus, Timestamp, TrackedObject,
};

/// Objects slower than this (m/s) are reported stationary.
pub const STATIONARY_SPEED: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicState {
    pub position: [f64; 3],
    pub velocity: [f64; 2],
}

/// Constant-acceleration propagation in the horizontal plane; z stays fixed.
pub fn propagate(obj: &ScenarioObject, t: f64) -> KinematicState {
    let [x, y, z] = obj.position;
    let [vx, vy] = obj.velocity;
    let [ax, ay] = obj.acceleration;
    KinematicState {
        position: [x + vx * t + 0.5 * ax * t * t, y + vy * t + 0.5 * ay * t * t, z],
        velocity: [vx + ax * t, vy + ay * t],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthObject {
    pub id: u32,
    pub p: [f64; 3],
    pub v: [f64; 2],
}

/// One ground-truth JSONL line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub cycle: u64,
    pub time: f64,
    pub objects: Vec<TruthObject>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleOutput {
    pub objects: ObjectList,
    pub detections: DetectionList,
    pub truth: GroundTruthRecord,
}

fn nominal_rcs(class: Classification) -> i8 {
    match class {
        Classification::Unknown => 0,
        Classification::Car => 10,
        Classification::Truck => 20,
        Classification::Motorcycle => 5,
        Classification::Pedestrian => -5,
        Classification::Bicycle => 0,
        Classification::Animal => -3,
        Classification::Hazard => 3,
    }
}

fn wrap_angle(a: f64) -> f64 {
    let w = a - TAU * ((a + PI) / TAU).floor();
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

/// Narrows an angle to f32 keeping it inside (−π, π].
fn azimuth_f32(a: f64) -> f32 {
    let v = wrap_angle(a) as f32;
    if v <= -std::f32::consts::PI {
        std::f32::consts::PI
    } else {
        v
    }
}

fn elevation_f32(a: f64) -> f32 {
    (a.clamp(-FRAC_PI_2, FRAC_PI_2) as f32).clamp(-std::f32::consts::FRAC_PI_2, std::f32::consts::FRAC_PI_2)
}

fn stamp_at(base: Duration, scenario: &Scenario, cycle: u64) -> Timestamp {
    let t = base + Duration::from_nanos(scenario.cycle_offset_nanos(cycle));
    Timestamp::from_duration(t, SyncStatus::Ok)
}

/// Stamps start at `scenario.stamp_epoch`.
pub fn synthesize_cycle(scenario: &Scenario, cycle: u64) -> CycleOutput {
    synthesize_cycle_at(scenario, cycle, Duration::from_secs_f64(scenario.stamp_epoch))
}

/// Same as [`synthesize_cycle`] with stamps starting at `stamp_base`.
pub fn synthesize_cycle_at(scenario: &Scenario, cycle: u64, stamp_base: Duration) -> CycleOutput {
    let t = cycle as f64 / scenario.cycle_rate;
    let stamp = stamp_at(stamp_base, scenario, cycle);
    let noise = &scenario.detection_noise;
    let mut rng = CounterRng::stream(scenario.seed, cycle);

    let mut objects = Vec::with_capacity(scenario.objects.len());
    let mut detections = Vec::new();
    let mut truth = Vec::with_capacity(scenario.objects.len());

    for (index, obj) in scenario.objects.iter().enumerate() {
        let id = index as u32 + 1;
        let state = propagate(obj, t);
        let [px, py, pz] = state.position;
        let [vx, vy] = state.velocity;
        let [ax, ay] = obj.acceleration;
        let speed = vx.hypot(vy);
        let heading = if speed < crate::model::EPS_SPEED { 0.0 } else { vy.atan2(vx) };
        let yaw_rate = if speed < crate::model::EPS_SPEED { 0.0 } else { (vx * ay - vy * ax) / (speed * speed) };
        let mut probs = [0u8; 8];
        probs[obj.classification as usize] = 100;

        let tracked = TrackedObject {
            id,
            age: cycle.min(u16::MAX as u64) as u16,
            status_measurement: if cycle == 0 { MeasurementStatus::New } else { MeasurementStatus::Measured },
            status_movement: if speed < STATIONARY_SPEED { MovementStatus::Stationary } else { MovementStatus::Moving },
            position_x: px as f32,
            position_y: py as f32,
            position_z: pz as f32,
            position_std_x: noise.range as f32,
            position_std_y: noise.range as f32,
            position_std_z: noise.range as f32,
            orientation_yaw: azimuth_f32(heading),
            orientation_yaw_std: noise.azimuth as f32,
            velocity_rel_x: vx as f32,
            velocity_rel_y: vy as f32,
            velocity_std_x: noise.range_rate as f32,
            velocity_std_y: noise.range_rate as f32,
            acceleration_rel_x: ax as f32,
            acceleration_rel_y: ay as f32,
            acceleration_std_x: 0.0,
            acceleration_std_y: 0.0,
            yaw_rate: yaw_rate as f32,
            shape_length: obj.shape[0] as f32,
            shape_width: obj.shape[1] as f32,
            classification_probabilities: probs,
        };
        truth.push(TruthObject {
            id,
            p: [tracked.position_x as f64, tracked.position_y as f64, tracked.position_z as f64],
            v: [tracked.velocity_rel_x as f64, tracked.velocity_rel_y as f64],
        });
        objects.push(tracked);

        let range = (px * px + py * py + pz * pz).sqrt();
        let azimuth = py.atan2(px);
        let elevation = if range > 0.0 { (pz / range).asin() } else { 0.0 };
        let range_rate = crate::cloud::radial_speed((px, py, pz), (vx, vy, 0.0));
        for _ in 0..obj.detections_per_cycle {
            let measurement_id = detections.len() as u16;
            let r = (range + noise.range * rng.next_gaussian()).max(0.0);
            let az = azimuth + noise.azimuth * rng.next_gaussian();
            let el = elevation + noise.elevation * rng.next_gaussian();
            let rr = range_rate + noise.range_rate * rng.next_gaussian();
            detections.push(Detection {
                azimuth: azimuth_f32(az),
                azimuth_std: noise.azimuth as f32,
                elevation: elevation_f32(el),
                elevation_std: noise.elevation as f32,
                range: r as f32,
                range_std: noise.range as f32,
                range_rate: rr as f32,
                range_rate_std: noise.range_rate as f32,
                rcs: nominal_rcs(obj.classification),
                measurement_id,
                object_id: id as u16,
                classification: obj.classification,
                invalid_flags: 0,
            });
        }
    }

    let sequence_counter = cycle as u32;
    CycleOutput {
        objects: ObjectList { stamp, sequence_counter, objects },
        detections: DetectionList {
            stamp,
            sequence_counter,
            origin_x: 0.0,
            origin_y: 0.0,
            origin_z: 0.0,
            detections,
        },
        truth: GroundTruthRecord { cycle, time: t, objects: truth },
    }
}
