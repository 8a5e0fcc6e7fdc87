//! Domain types for the sensor's output frames and configuration requests.
//!
//! Every floating field that travels on the wire is stored as `f32` so that a
//! decode of an encoded value is bit-identical. Kinematic helpers compute in
//! `f64`. Axes follow the sensor frame: x forward, y left, z up. Angles are
//! radians everywhere.

use std::f32::consts::{FRAC_PI_2, PI};
use std::net::{Ipv4Addr, SocketAddr};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

pub const MAX_DETECTIONS: usize = 800;
pub const MAX_OBJECTS: usize = 50;

/// Below this speed (m/s) the velocity direction is undefined and the tracked
/// orientation is reported as heading instead.
pub const EPS_SPEED: f64 = 1e-6;

pub const KMH_PER_MPS: f64 = 3.6;

pub const MIN_DETECTION_DISTANCE: u16 = 99;
pub const MAX_DETECTION_DISTANCE: u16 = 1500;
pub const MIN_CYCLE_TIME_MS: u8 = 50;
pub const MAX_CYCLE_TIME_MS: u8 = 100;

/// Detection `object_id` value for returns not associated with any track.
pub const UNASSOCIATED: u16 = 0xFFFF;

pub mod invalid_flags {
    pub const RANGE: u8 = 1 << 0;
    pub const ANGLE: u8 = 1 << 1;
    pub const RANGE_RATE: u8 = 1 << 2;
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("field `{field}` out of range: {value}")]
pub struct RangeError {
    pub field: &'static str,
    pub value: f64,
}

pub(crate) fn range_err(field: &'static str, value: impl Into<f64>) -> RangeError {
    RangeError { field, value: value.into() }
}

fn finite(field: &'static str, v: f32) -> Result<(), RangeError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(range_err(field, v))
    }
}

fn non_negative(field: &'static str, v: f32) -> Result<(), RangeError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(range_err(field, v))
    }
}

fn positive(field: &'static str, v: f32) -> Result<(), RangeError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(range_err(field, v))
    }
}

/// (−π, π]
fn half_open_angle(field: &'static str, v: f32) -> Result<(), RangeError> {
    if v.is_finite() && v > -PI && v <= PI {
        Ok(())
    } else {
        Err(range_err(field, v))
    }
}

/// [−π/2, π/2]
fn elevation_angle(field: &'static str, v: f32) -> Result<(), RangeError> {
    if v.is_finite() && (-FRAC_PI_2..=FRAC_PI_2).contains(&v) {
        Ok(())
    } else {
        Err(range_err(field, v))
    }
}

/// Declares a `u8`-backed enumeration with strict `TryFrom<u8>`.
macro_rules! wire_enum {
    ($(#[$meta:meta])* $name:ident, $field:literal { $($variant:ident = $val:expr),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "SCREAMING_SNAKE_CASE")]
        #[repr(u8)]
        pub enum $name {
            $($variant = $val),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];
            pub const FIELD: &'static str = $field;
        }

        impl TryFrom<u8> for $name {
            type Error = RangeError;

            fn try_from(raw: u8) -> Result<Self, RangeError> {
                match raw {
                    $($val => Ok($name::$variant),)+
                    _ => Err(range_err($field, raw)),
                }
            }
        }

        impl From<$name> for u8 {
            fn from(v: $name) -> u8 {
                v as u8
            }
        }
    };
}

wire_enum!(SyncStatus, "sync_status" { Ok = 1, Never = 2, Lost = 3 });

wire_enum!(
    /// Object class; also indexes `TrackedObject::classification_probabilities`.
    Classification, "classification" {
        Unknown = 0,
        Car = 1,
        Truck = 2,
        Motorcycle = 3,
        Pedestrian = 4,
        Bicycle = 5,
        Animal = 6,
        Hazard = 7,
    }
);

wire_enum!(MeasurementStatus, "status_measurement" { Measured = 0, Predicted = 1, New = 2 });
wire_enum!(MovementStatus, "status_movement" { Moving = 0, Stationary = 1 });
wire_enum!(PlugOrientation, "plug_orientation" { Left = 0, Right = 1 });
wire_enum!(FrequencySlot, "frequency_slot" { Low = 0, Mid = 1, High = 2 });
wire_enum!(Blockage, "blockage" { None = 0, Partial = 1, Full = 2 });

impl std::str::FromStr for Classification {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let wanted = s.trim().to_ascii_uppercase();
        Classification::ALL
            .iter()
            .copied()
            .find(|c| format!("{c:?}").to_ascii_uppercase() == wanted)
            .ok_or_else(|| format!("unknown classification `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Timestamp {
    pub seconds: u32,
    pub nanoseconds: u32,
    pub sync_status: SyncStatus,
}

impl Timestamp {
    pub fn new(seconds: u32, nanoseconds: u32, sync_status: SyncStatus) -> Self {
        Timestamp { seconds, nanoseconds, sync_status }
    }

    /// Converts a duration since the Unix epoch; seconds wrap at 2^32.
    pub fn from_duration(since_epoch: Duration, sync_status: SyncStatus) -> Self {
        Timestamp {
            seconds: since_epoch.as_secs() as u32,
            nanoseconds: since_epoch.subsec_nanos(),
            sync_status,
        }
    }

    pub fn from_system_time(t: SystemTime, sync_status: SyncStatus) -> Self {
        let since = t.duration_since(UNIX_EPOCH).unwrap_or_default();
        Self::from_duration(since, sync_status)
    }

    pub fn as_duration(&self) -> Duration {
        Duration::new(self.seconds as u64, self.nanoseconds)
    }

    pub fn as_secs_f64(&self) -> f64 {
        self.seconds as f64 + self.nanoseconds as f64 * 1e-9
    }

    pub fn validate(&self) -> Result<(), RangeError> {
        if self.nanoseconds >= 1_000_000_000 {
            return Err(range_err("nanoseconds", self.nanoseconds));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub azimuth: f32,
    pub azimuth_std: f32,
    pub elevation: f32,
    pub elevation_std: f32,
    pub range: f32,
    pub range_std: f32,
    /// Negative when the reflector approaches.
    pub range_rate: f32,
    pub range_rate_std: f32,
    /// dBsm
    pub rcs: i8,
    pub measurement_id: u16,
    pub object_id: u16,
    pub classification: Classification,
    /// See [`invalid_flags`].
    pub invalid_flags: u8,
}

impl Detection {
    pub fn validate(&self) -> Result<(), RangeError> {
        half_open_angle("azimuth", self.azimuth)?;
        non_negative("azimuth_std", self.azimuth_std)?;
        elevation_angle("elevation", self.elevation)?;
        non_negative("elevation_std", self.elevation_std)?;
        non_negative("range", self.range)?;
        non_negative("range_std", self.range_std)?;
        finite("range_rate", self.range_rate)?;
        non_negative("range_rate_std", self.range_rate_std)
    }

    pub fn has_valid_position(&self) -> bool {
        self.invalid_flags & (invalid_flags::RANGE | invalid_flags::ANGLE) == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionList {
    pub stamp: Timestamp,
    pub sequence_counter: u32,
    pub origin_x: f32,
    pub origin_y: f32,
    pub origin_z: f32,
    pub detections: Vec<Detection>,
}

impl DetectionList {
    pub fn validate(&self) -> Result<(), RangeError> {
        self.stamp.validate()?;
        finite("origin_x", self.origin_x)?;
        finite("origin_y", self.origin_y)?;
        finite("origin_z", self.origin_z)?;
        if self.detections.len() > MAX_DETECTIONS {
            return Err(range_err("detection_count", self.detections.len() as f64));
        }
        self.detections.iter().try_for_each(Detection::validate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackedObject {
    pub id: u32,
    /// Measurement cycles since the track was created.
    pub age: u16,
    pub status_measurement: MeasurementStatus,
    pub status_movement: MovementStatus,
    pub position_x: f32,
    pub position_y: f32,
    pub position_z: f32,
    pub position_std_x: f32,
    pub position_std_y: f32,
    pub position_std_z: f32,
    pub orientation_yaw: f32,
    pub orientation_yaw_std: f32,
    pub velocity_rel_x: f32,
    pub velocity_rel_y: f32,
    pub velocity_std_x: f32,
    pub velocity_std_y: f32,
    pub acceleration_rel_x: f32,
    pub acceleration_rel_y: f32,
    pub acceleration_std_x: f32,
    pub acceleration_std_y: f32,
    pub yaw_rate: f32,
    pub shape_length: f32,
    pub shape_width: f32,
    /// Percent, indexed by [`Classification`] discriminant.
    pub classification_probabilities: [u8; 8],
}

impl TrackedObject {
    pub fn validate(&self) -> Result<(), RangeError> {
        finite("position_x", self.position_x)?;
        finite("position_y", self.position_y)?;
        finite("position_z", self.position_z)?;
        non_negative("position_std_x", self.position_std_x)?;
        non_negative("position_std_y", self.position_std_y)?;
        non_negative("position_std_z", self.position_std_z)?;
        half_open_angle("orientation_yaw", self.orientation_yaw)?;
        non_negative("orientation_yaw_std", self.orientation_yaw_std)?;
        finite("velocity_rel_x", self.velocity_rel_x)?;
        finite("velocity_rel_y", self.velocity_rel_y)?;
        non_negative("velocity_std_x", self.velocity_std_x)?;
        non_negative("velocity_std_y", self.velocity_std_y)?;
        finite("acceleration_rel_x", self.acceleration_rel_x)?;
        finite("acceleration_rel_y", self.acceleration_rel_y)?;
        non_negative("acceleration_std_x", self.acceleration_std_x)?;
        non_negative("acceleration_std_y", self.acceleration_std_y)?;
        finite("yaw_rate", self.yaw_rate)?;
        non_negative("shape_length", self.shape_length)?;
        non_negative("shape_width", self.shape_width)?;
        for &p in &self.classification_probabilities {
            if p > 100 {
                return Err(range_err("classification_probabilities", p));
            }
        }
        Ok(())
    }

    /// Class with the highest probability; ties resolve to the lower index.
    pub fn dominant_class(&self) -> Classification {
        let mut best = 0;
        for (i, &p) in self.classification_probabilities.iter().enumerate() {
            if p > self.classification_probabilities[best] {
                best = i;
            }
        }
        Classification::ALL[best]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectList {
    pub stamp: Timestamp,
    pub sequence_counter: u32,
    pub objects: Vec<TrackedObject>,
}

impl ObjectList {
    pub fn validate(&self) -> Result<(), RangeError> {
        self.stamp.validate()?;
        if self.objects.len() > MAX_OBJECTS {
            return Err(range_err("object_count", self.objects.len() as f64));
        }
        for (i, obj) in self.objects.iter().enumerate() {
            obj.validate()?;
            if self.objects[..i].iter().any(|o| o.id == obj.id) {
                return Err(range_err("object_id", obj.id));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MountingPose {
    pub longitudinal: f32,
    pub lateral: f32,
    pub vertical: f32,
    pub yaw: f32,
    pub pitch: f32,
    pub plug_orientation: PlugOrientation,
}

impl MountingPose {
    pub fn validate(&self) -> Result<(), RangeError> {
        finite("longitudinal", self.longitudinal)?;
        finite("lateral", self.lateral)?;
        finite("vertical", self.vertical)?;
        half_open_angle("yaw", self.yaw)?;
        elevation_angle("pitch", self.pitch)
    }
}

impl Default for MountingPose {
    fn default() -> Self {
        MountingPose {
            longitudinal: 0.0,
            lateral: 0.0,
            vertical: 0.5,
            yaw: 0.0,
            pitch: 0.0,
            plug_orientation: PlugOrientation::Left,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleDimensions {
    pub length: f32,
    pub width: f32,
    pub height: f32,
    pub wheelbase: f32,
}

impl VehicleDimensions {
    pub fn validate(&self) -> Result<(), RangeError> {
        positive("length", self.length)?;
        positive("width", self.width)?;
        positive("height", self.height)?;
        positive("wheelbase", self.wheelbase)?;
        if self.wheelbase > self.length {
            return Err(range_err("wheelbase", self.wheelbase));
        }
        Ok(())
    }
}

impl Default for VehicleDimensions {
    fn default() -> Self {
        VehicleDimensions { length: 4.5, width: 1.8, height: 1.5, wheelbase: 2.7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarParameters {
    /// Meters, 99..=1500.
    pub max_detection_distance: u16,
    pub frequency_slot: FrequencySlot,
    pub cycle_time_ms: u8,
    pub sensor_ipv4: Ipv4Addr,
    pub powersave_standstill: bool,
}

impl RadarParameters {
    pub fn validate(&self) -> Result<(), RangeError> {
        if !(MIN_DETECTION_DISTANCE..=MAX_DETECTION_DISTANCE).contains(&self.max_detection_distance)
        {
            return Err(range_err("max_detection_distance", self.max_detection_distance));
        }
        if !(MIN_CYCLE_TIME_MS..=MAX_CYCLE_TIME_MS).contains(&self.cycle_time_ms) {
            return Err(range_err("cycle_time_ms", self.cycle_time_ms));
        }
        Ok(())
    }
}

impl Default for RadarParameters {
    fn default() -> Self {
        RadarParameters {
            max_detection_distance: 200,
            frequency_slot: FrequencySlot::Mid,
            cycle_time_ms: 50,
            sensor_ipv4: Ipv4Addr::new(10, 13, 1, 113),
            powersave_standstill: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorStatus {
    pub stamp: Timestamp,
    pub software_version_major: u8,
    pub software_version_minor: u8,
    pub software_version_patch: u8,
    pub mounting: MountingPose,
    pub vehicle: VehicleDimensions,
    pub radar: RadarParameters,
    pub blockage: Blockage,
    pub defective: bool,
}

impl SensorStatus {
    pub fn validate(&self) -> Result<(), RangeError> {
        self.stamp.validate()?;
        self.mounting.validate()?;
        self.vehicle.validate()?;
        self.radar.validate()
    }

    /// Applies a configuration request to this status echo.
    pub fn apply(&mut self, cfg: &SensorConfiguration) {
        if let Some(m) = cfg.mounting {
            self.mounting = m;
        }
        if let Some(v) = cfg.vehicle {
            self.vehicle = v;
        }
        if let Some(r) = cfg.radar {
            self.radar = r;
        }
        if let Some(ip) = cfg.new_sensor_ipv4 {
            self.radar.sensor_ipv4 = ip;
        }
    }

    /// True when every group requested by `cfg` is echoed exactly.
    pub fn echoes(&self, cfg: &SensorConfiguration) -> bool {
        let mut expected = *self;
        expected.apply(cfg);
        expected == *self
    }
}

impl Default for SensorStatus {
    fn default() -> Self {
        SensorStatus {
            stamp: Timestamp::new(0, 0, SyncStatus::Never),
            software_version_major: 1,
            software_version_minor: 0,
            software_version_patch: 0,
            mounting: MountingPose::default(),
            vehicle: VehicleDimensions::default(),
            radar: RadarParameters::default(),
            blockage: Blockage::None,
            defective: false,
        }
    }
}

/// Write-side request; only populated groups are sent.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SensorConfiguration {
    pub mounting: Option<MountingPose>,
    pub vehicle: Option<VehicleDimensions>,
    pub radar: Option<RadarParameters>,
    pub new_sensor_ipv4: Option<Ipv4Addr>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("configuration request has no parameter group")]
pub struct EmptyConfiguration;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum ConfigurationError {
    #[error(transparent)]
    Empty(#[from] EmptyConfiguration),
    #[error(transparent)]
    Range(#[from] RangeError),
}

impl SensorConfiguration {
    pub fn is_empty(&self) -> bool {
        self.mounting.is_none()
            && self.vehicle.is_none()
            && self.radar.is_none()
            && self.new_sensor_ipv4.is_none()
    }

    pub fn validate(&self) -> Result<(), ConfigurationError> {
        if self.is_empty() {
            return Err(EmptyConfiguration.into());
        }
        if let Some(m) = &self.mounting {
            m.validate()?;
        }
        if let Some(v) = &self.vehicle {
            v.validate()?;
        }
        if let Some(r) = &self.radar {
            r.validate()?;
        }
        Ok(())
    }
}

/// Host-side reception time, captured before decoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecvTime {
    pub wall: SystemTime,
    pub mono: Instant,
}

impl RecvTime {
    pub fn now() -> Self {
        RecvTime { wall: SystemTime::now(), mono: Instant::now() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FramePayload {
    Status(SensorStatus),
    Objects(ObjectList),
    Detections(DetectionList),
}

impl FramePayload {
    pub fn kind(&self) -> FrameKind {
        match self {
            FramePayload::Status(_) => FrameKind::Status,
            FramePayload::Objects(_) => FrameKind::ObjectList,
            FramePayload::Detections(_) => FrameKind::DetectionList,
        }
    }

    pub fn stamp(&self) -> Timestamp {
        match self {
            FramePayload::Status(s) => s.stamp,
            FramePayload::Objects(o) => o.stamp,
            FramePayload::Detections(d) => d.stamp,
        }
    }

    pub fn stamp_mut(&mut self) -> &mut Timestamp {
        match self {
            FramePayload::Status(s) => &mut s.stamp,
            FramePayload::Objects(o) => &mut o.stamp,
            FramePayload::Detections(d) => &mut d.stamp,
        }
    }

    /// Status frames carry no sequence counter.
    pub fn sequence_counter(&self) -> Option<u32> {
        match self {
            FramePayload::Status(_) => None,
            FramePayload::Objects(o) => Some(o.sequence_counter),
            FramePayload::Detections(d) => Some(d.sequence_counter),
        }
    }

    pub fn validate(&self) -> Result<(), RangeError> {
        match self {
            FramePayload::Status(s) => s.validate(),
            FramePayload::Objects(o) => o.validate(),
            FramePayload::Detections(d) => d.validate(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    Status,
    ObjectList,
    DetectionList,
}

impl FrameKind {
    pub const ALL: [FrameKind; 3] = [FrameKind::Status, FrameKind::ObjectList, FrameKind::DetectionList];

    pub fn name(self) -> &'static str {
        match self {
            FrameKind::Status => "status",
            FrameKind::ObjectList => "object_list",
            FrameKind::DetectionList => "detection_list",
        }
    }
}

/// A decoded datagram with its reception metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub payload: FramePayload,
    pub recv_time: RecvTime,
    pub source: SocketAddr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StampPolicy {
    /// Trust the sensor's stamp (sensor synchronized with the host over gPTP).
    KeepOriginal,
    /// Replace the stamp with the host wall-clock reception time.
    #[default]
    OverrideLocal,
}

impl std::str::FromStr for StampPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "keep" | "keep_original" => Ok(StampPolicy::KeepOriginal),
            "local" | "override_local" => Ok(StampPolicy::OverrideLocal),
            other => Err(format!("unknown stamp policy `{other}` (expected keep|local)")),
        }
    }
}

pub fn object_speed(obj: &TrackedObject) -> f64 {
    (obj.velocity_rel_x as f64).hypot(obj.velocity_rel_y as f64)
}

/// Direction of travel in (−π, π]; falls back to the tracked orientation
/// when the object is (numerically) at rest.
pub fn object_heading(obj: &TrackedObject) -> f64 {
    if object_speed(obj) < EPS_SPEED {
        return obj.orientation_yaw as f64;
    }
    let h = (obj.velocity_rel_y as f64).atan2(obj.velocity_rel_x as f64);
    if h <= -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        h
    }
}

pub fn apply_stamp_policy(mut frame: Frame, policy: StampPolicy) -> Frame {
    if policy == StampPolicy::OverrideLocal {
        let stamp = frame.payload.stamp_mut();
        *stamp = Timestamp::from_system_time(frame.recv_time.wall, stamp.sync_status);
    }
    frame
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::net::{IpAddr, SocketAddr};

    fn object_with_velocity(vx: f32, vy: f32) -> TrackedObject {
        TrackedObject {
            id: 1,
            age: 3,
            status_measurement: MeasurementStatus::Measured,
            status_movement: MovementStatus::Moving,
            position_x: 10.0,
            position_y: 0.0,
            position_z: 0.0,
            position_std_x: 0.1,
            position_std_y: 0.1,
            position_std_z: 0.1,
            orientation_yaw: 0.25,
            orientation_yaw_std: 0.01,
            velocity_rel_x: vx,
            velocity_rel_y: vy,
            velocity_std_x: 0.0,
            velocity_std_y: 0.0,
            acceleration_rel_x: 0.0,
            acceleration_rel_y: 0.0,
            acceleration_std_x: 0.0,
            acceleration_std_y: 0.0,
            yaw_rate: 0.0,
            shape_length: 4.0,
            shape_width: 2.0,
            classification_probabilities: [0, 90, 10, 0, 0, 0, 0, 0],
        }
    }

    fn frame_with(payload: FramePayload, wall: Duration) -> Frame {
        Frame {
            payload,
            recv_time: RecvTime { wall: UNIX_EPOCH + wall, mono: Instant::now() },
            source: SocketAddr::new(IpAddr::V4(Ipv4Addr::LOCALHOST), 42102),
        }
    }

    #[test]
    fn speed_examples() {
        assert_eq!(object_speed(&object_with_velocity(0.0, 0.0)), 0.0);
        assert_eq!(object_speed(&object_with_velocity(3.0, 4.0)), 5.0);
        let ten_kmh = (10.0 / 3.6) as f32;
        let s = object_speed(&object_with_velocity(-ten_kmh, 0.0));
        assert!((s - 10.0 / 3.6).abs() < 1e-6);
    }

    #[test]
    fn heading_examples() {
        use std::f64::consts::{FRAC_PI_2, PI};
        assert_eq!(object_heading(&object_with_velocity(1.0, 0.0)), 0.0);
        assert!((object_heading(&object_with_velocity(0.0, 1.0)) - FRAC_PI_2).abs() < 1e-12);
        // Oracle: quadrant-III angle from acos of the normalized x component.
        let oracle = -(-1.0f64 / 2f64.sqrt()).acos();
        assert!((oracle + 3.0 * PI / 4.0).abs() < 1e-12);
        assert!((object_heading(&object_with_velocity(-1.0, -1.0)) - oracle).abs() < 1e-12);
    }

    #[test]
    fn heading_falls_back_to_orientation_at_rest() {
        let obj = object_with_velocity(0.0, 0.0);
        assert_eq!(object_heading(&obj), obj.orientation_yaw as f64);
    }

    #[test]
    fn heading_never_returns_minus_pi() {
        let obj = object_with_velocity(-1.0, -0.0);
        assert_eq!(object_heading(&obj), std::f64::consts::PI);
    }

    #[test]
    fn stamp_policy_keep_and_override() {
        let list = ObjectList {
            stamp: Timestamp::new(100, 5, SyncStatus::Ok),
            sequence_counter: 9,
            objects: vec![object_with_velocity(1.0, 2.0)],
        };
        let frame = frame_with(FramePayload::Objects(list.clone()), Duration::new(200, 7));
        let kept = apply_stamp_policy(frame.clone(), StampPolicy::KeepOriginal);
        assert_eq!(kept, frame);
        let over = apply_stamp_policy(frame.clone(), StampPolicy::OverrideLocal);
        assert_eq!(over.payload.stamp(), Timestamp::new(200, 7, SyncStatus::Ok));
    }

    #[test]
    fn stamp_override_touches_only_the_stamp() {
        let status = SensorStatus {
            stamp: Timestamp::new(1, 2, SyncStatus::Lost),
            ..SensorStatus::default()
        };
        let dets = DetectionList {
            stamp: Timestamp::new(3, 4, SyncStatus::Never),
            sequence_counter: 77,
            origin_x: 1.0,
            origin_y: 2.0,
            origin_z: 3.0,
            detections: vec![],
        };
        let objs = ObjectList {
            stamp: Timestamp::new(5, 6, SyncStatus::Ok),
            sequence_counter: 78,
            objects: vec![object_with_velocity(0.5, 0.5)],
        };
        let wall = Duration::new(200, 7);
        for payload in [
            FramePayload::Status(status),
            FramePayload::Detections(dets),
            FramePayload::Objects(objs),
        ] {
            let frame = frame_with(payload, wall);
            let out = apply_stamp_policy(frame.clone(), StampPolicy::OverrideLocal);
            let sync = frame.payload.stamp().sync_status;
            assert_eq!(out.payload.stamp(), Timestamp::new(200, 7, sync));
            // Restoring the stamp must give back the original frame field-for-field.
            let mut restored = out.clone();
            *restored.payload.stamp_mut() = frame.payload.stamp();
            assert_eq!(restored, frame);
            // Idempotent for a fixed recv_time.
            assert_eq!(apply_stamp_policy(out.clone(), StampPolicy::OverrideLocal), out);
        }
    }

    #[test]
    fn configuration_validation() {
        assert_eq!(
            SensorConfiguration::default().validate(),
            Err(ConfigurationError::Empty(EmptyConfiguration))
        );
        let mut radar = RadarParameters::default();
        radar.max_detection_distance = 1501;
        let cfg = SensorConfiguration { radar: Some(radar), ..Default::default() };
        assert_eq!(
            cfg.validate(),
            Err(ConfigurationError::Range(range_err("max_detection_distance", 1501)))
        );
        let bad_vehicle = VehicleDimensions { wheelbase: 5.0, ..Default::default() };
        assert!(bad_vehicle.validate().is_err());
    }

    #[test]
    fn enum_conversion_is_strict() {
        assert_eq!(FrequencySlot::try_from(2), Ok(FrequencySlot::High));
        assert_eq!(FrequencySlot::try_from(5), Err(range_err("frequency_slot", 5)));
        assert!(SyncStatus::try_from(0).is_err());
        assert_eq!("car".parse::<Classification>(), Ok(Classification::Car));
    }

    #[test]
    fn status_echo_comparison() {
        let mut status = SensorStatus::default();
        let mut radar = status.radar;
        radar.max_detection_distance = 300;
        let cfg = SensorConfiguration { radar: Some(radar), ..Default::default() };
        assert!(!status.echoes(&cfg));
        status.apply(&cfg);
        assert!(status.echoes(&cfg));
    }

    #[test]
    fn duplicate_object_ids_rejected() {
        let o = object_with_velocity(1.0, 0.0);
        let list = ObjectList {
            stamp: Timestamp::new(0, 0, SyncStatus::Ok),
            sequence_counter: 0,
            objects: vec![o, o],
        };
        assert_eq!(list.validate(), Err(range_err("object_id", 1)));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn speed_is_scale_homogeneous(vx in -100f32..100.0, vy in -100f32..100.0, k in -10f32..10.0) {
                let base = object_speed(&object_with_velocity(vx, vy));
                let scaled = object_speed(&object_with_velocity(k * vx, k * vy));
                prop_assert!(base >= 0.0);
                prop_assert!((scaled - (k as f64).abs() * base).abs() <= 1e-5 * (1.0 + scaled));
            }

            #[test]
            fn heading_invariant_under_positive_scaling(vx in -100f32..100.0, vy in -100f32..100.0, k in 0.1f32..10.0) {
                let obj = object_with_velocity(vx, vy);
                prop_assume!(object_speed(&obj) >= 1e-3);
                let scaled = object_with_velocity(k * vx, k * vy);
                let (a, b) = (object_heading(&obj), object_heading(&scaled));
                let diff = (a - b).abs();
                prop_assert!(diff < 1e-5 || (diff - 2.0 * std::f64::consts::PI).abs() < 1e-5);
                prop_assert!(a > -std::f64::consts::PI && a <= std::f64::consts::PI);
            }
        }
    }
}
