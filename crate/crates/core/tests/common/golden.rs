//! Expected contents of the committed fixtures.

use std::net::Ipv4Addr;

use ars548::*;

pub const STATUS: &[u8] = include_bytes!("../fixtures/status.bin");
pub const OBJECTS: &[u8] = include_bytes!("../fixtures/object_list.bin");
pub const DETECTIONS: &[u8] = include_bytes!("../fixtures/detection_list.bin");

pub fn expected_status() -> SensorStatus {
    SensorStatus {
        stamp: Timestamp::new(1_700_000_000, 250_000_000, SyncStatus::Ok),
        software_version_major: 2,
        software_version_minor: 7,
        software_version_patch: 1,
        mounting: MountingPose {
            longitudinal: 3.5,
            lateral: -0.25,
            vertical: 0.75,
            yaw: 0.0625,
            pitch: -0.03125,
            plug_orientation: PlugOrientation::Right,
        },
        vehicle: VehicleDimensions { length: 4.75, width: 1.875, height: 1.5, wheelbase: 2.875 },
        radar: RadarParameters {
            max_detection_distance: 300,
            frequency_slot: FrequencySlot::High,
            cycle_time_ms: 60,
            sensor_ipv4: Ipv4Addr::new(10, 13, 1, 114),
            powersave_standstill: true,
        },
        blockage: Blockage::Partial,
        defective: false,
    }
}

pub fn expected_objects() -> ObjectList {
    ObjectList {
        stamp: Timestamp::new(1_700_000_001, 500, SyncStatus::Ok),
        sequence_counter: 42,
        objects: vec![
            TrackedObject {
                id: 7,
                age: 120,
                status_measurement: MeasurementStatus::Measured,
                status_movement: MovementStatus::Moving,
                position_x: 40.5,
                position_y: -3.5,
                position_z: 0.5,
                position_std_x: 0.25,
                position_std_y: 0.25,
                position_std_z: 0.125,
                orientation_yaw: 3.0,
                orientation_yaw_std: 0.0625,
                velocity_rel_x: -13.5,
                velocity_rel_y: 0.0,
                velocity_std_x: 0.5,
                velocity_std_y: 0.5,
                acceleration_rel_x: 0.25,
                acceleration_rel_y: -0.125,
                acceleration_std_x: 0.0625,
                acceleration_std_y: 0.0625,
                yaw_rate: 0.015625,
                shape_length: 4.5,
                shape_width: 1.75,
                classification_probabilities: [0, 90, 10, 0, 0, 0, 0, 0],
            },
            TrackedObject {
                id: 8,
                age: 3,
                status_measurement: MeasurementStatus::New,
                status_movement: MovementStatus::Stationary,
                position_x: 12.0,
                position_y: 6.0,
                position_z: 0.0,
                position_std_x: 1.0,
                position_std_y: 1.0,
                position_std_z: 0.5,
                orientation_yaw: -1.5,
                orientation_yaw_std: 0.25,
                velocity_rel_x: 0.0,
                velocity_rel_y: 0.0,
                velocity_std_x: 0.125,
                velocity_std_y: 0.125,
                acceleration_rel_x: 0.0,
                acceleration_rel_y: 0.0,
                acceleration_std_x: 0.03125,
                acceleration_std_y: 0.03125,
                yaw_rate: 0.0,
                shape_length: 0.5,
                shape_width: 0.5,
                classification_probabilities: [5, 0, 0, 0, 95, 0, 0, 0],
            },
        ],
    }
}

#[allow(clippy::too_many_arguments)]
fn det(
    az: f32, az_std: f32, el: f32, el_std: f32, r: f32, r_std: f32, rr: f32, rr_std: f32,
    rcs: i8, flags: u8, mid: u16, oid: u16, class: Classification,
) -> Detection {
    Detection {
        azimuth: az,
        azimuth_std: az_std,
        elevation: el,
        elevation_std: el_std,
        range: r,
        range_std: r_std,
        range_rate: rr,
        range_rate_std: rr_std,
        rcs,
        invalid_flags: flags,
        measurement_id: mid,
        object_id: oid,
        classification: class,
    }
}

pub fn expected_detections() -> DetectionList {
    DetectionList {
        stamp: Timestamp::new(1_700_000_002, 999_999_999, SyncStatus::Lost),
        sequence_counter: 43,
        origin_x: 0.5,
        origin_y: 0.0,
        origin_z: 0.75,
        detections: vec![
            det(0.25, 0.0078125, -0.0625, 0.0078125, 35.5, 0.125, -12.25, 0.0625, 9, 0, 0, 7, Classification::Car),
            det(-1.5, 0.015625, 0.125, 0.015625, 120.0, 0.25, 0.0, 0.125, -20, 4, 1, UNASSOCIATED, Classification::Unknown),
            det(3.0, 0.03125, 0.0, 0.03125, 2.0, 0.5, 1.5, 0.25, 0, 3, 65535, 8, Classification::Pedestrian),
        ],
    }
}

