//! Byte-exact wire codec.
//!
//! Every datagram is one frame: a 10-byte header followed by the payload.
//!
//! ```text
//! offset  size  field
//! 0       2     service_id      (always 0)
//! 2       2     method_id       380 status, 329 object list, 336 detection list, 390 configuration
//! 4       4     payload_length  bytes after the header
//! 8       2     crc16           CRC-16/CCITT-FALSE of the payload
//! ```
//!
//! All multi-byte scalars are big-endian; floats are IEEE-754 binary32.

mod crc;
mod cursor;

use std::net::{Ipv4Addr, SocketAddr};

pub use crc::crc16_ccitt_false;
use cursor::{PutBe, Reader};

use crate::model::{
    ConfigurationError, Detection, DetectionList, Frame, FramePayload, MountingPose, ObjectList,
    RadarParameters, RangeError, RecvTime, SensorConfiguration, SensorStatus, Timestamp,
    TrackedObject, VehicleDimensions, MAX_DETECTIONS, MAX_OBJECTS,
};

pub mod method {
    pub const STATUS: u16 = 380;
    pub const OBJECT_LIST: u16 = 329;
    pub const DETECTION_LIST: u16 = 336;
    pub const CONFIGURATION: u16 = 390;
}

pub const HEADER_LEN: usize = 10;
pub const STAMP_LEN: usize = 9;
pub const DETECTION_RECORD_LEN: usize = 39;
pub const OBJECT_RECORD_LEN: usize = 92;
/// stamp, sequence counter, origin xyz, detection count
pub const DETECTION_LIST_PREFIX_LEN: usize = STAMP_LEN + 4 + 3 * 4 + 4;
/// stamp, sequence counter, object count
pub const OBJECT_LIST_PREFIX_LEN: usize = STAMP_LEN + 4 + 4;
pub const MOUNTING_LEN: usize = 5 * 4 + 1;
pub const VEHICLE_LEN: usize = 4 * 4;
pub const RADAR_LEN: usize = 2 + 1 + 1 + 4 + 1;
pub const STATUS_PAYLOAD_LEN: usize = STAMP_LEN + 3 + MOUNTING_LEN + VEHICLE_LEN + RADAR_LEN + 2;

pub mod presence {
    pub const MOUNTING: u8 = 1 << 0;
    pub const VEHICLE: u8 = 1 << 1;
    pub const RADAR: u8 = 1 << 2;
    pub const NEW_IP: u8 = 1 << 3;
    pub const ALL: u8 = MOUNTING | VEHICLE | RADAR | NEW_IP;
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WireError {
    #[error("truncated: need {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
    #[error("unknown method id {0}")]
    UnknownMethod(u16),
    #[error("bad crc: header says {expected:#06x}, payload computes {got:#06x}")]
    BadCrc { expected: u16, got: u16 },
    #[error("bad length: declared {declared} bytes, actual {actual}")]
    BadLength { declared: usize, actual: usize },
    #[error("field `{field}` out of range: {value}")]
    FieldRange { field: &'static str, value: f64 },
    #[error("record count {declared} exceeds capacity {max}")]
    CountOverflow { declared: u32, max: u32 },
    #[error("configuration request has no parameter group")]
    EmptyConfiguration,
}

/// Discriminant of [`WireError`], used as a statistics key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WireErrorKind {
    Truncated,
    UnknownMethod,
    BadCrc,
    BadLength,
    FieldRange,
    CountOverflow,
    EmptyConfiguration,
}

impl WireErrorKind {
    pub const ALL: [WireErrorKind; 7] = [
        WireErrorKind::Truncated,
        WireErrorKind::UnknownMethod,
        WireErrorKind::BadCrc,
        WireErrorKind::BadLength,
        WireErrorKind::FieldRange,
        WireErrorKind::CountOverflow,
        WireErrorKind::EmptyConfiguration,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WireErrorKind::Truncated => "truncated",
            WireErrorKind::UnknownMethod => "unknown_method",
            WireErrorKind::BadCrc => "bad_crc",
            WireErrorKind::BadLength => "bad_length",
            WireErrorKind::FieldRange => "field_range",
            WireErrorKind::CountOverflow => "count_overflow",
            WireErrorKind::EmptyConfiguration => "empty_configuration",
        }
    }
}

impl WireError {
    pub fn kind(&self) -> WireErrorKind {
        match self {
            WireError::Truncated { .. } => WireErrorKind::Truncated,
            WireError::UnknownMethod(_) => WireErrorKind::UnknownMethod,
            WireError::BadCrc { .. } => WireErrorKind::BadCrc,
            WireError::BadLength { .. } => WireErrorKind::BadLength,
            WireError::FieldRange { .. } => WireErrorKind::FieldRange,
            WireError::CountOverflow { .. } => WireErrorKind::CountOverflow,
            WireError::EmptyConfiguration => WireErrorKind::EmptyConfiguration,
        }
    }
}

impl From<RangeError> for WireError {
    fn from(e: RangeError) -> Self {
        WireError::FieldRange { field: e.field, value: e.value }
    }
}

impl From<ConfigurationError> for WireError {
    fn from(e: ConfigurationError) -> Self {
        match e {
            ConfigurationError::Empty(_) => WireError::EmptyConfiguration,
            ConfigurationError::Range(r) => r.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameHeader {
    pub service_id: u16,
    pub method_id: u16,
    pub payload_length: u32,
    pub crc16: u16,
}

impl FrameHeader {
    pub fn for_payload(method_id: u16, payload: &[u8]) -> Self {
        FrameHeader {
            service_id: 0,
            method_id,
            payload_length: payload.len() as u32,
            crc16: crc16_ccitt_false(payload),
        }
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, WireError> {
        if bytes.len() < HEADER_LEN {
            return Err(WireError::Truncated { expected: HEADER_LEN, got: bytes.len() });
        }
        let mut r = Reader::new(bytes);
        Ok(FrameHeader {
            service_id: r.u16()?,
            method_id: r.u16()?,
            payload_length: r.u32()?,
            crc16: r.u16()?,
        })
    }

    fn write(&self, out: &mut Vec<u8>) {
        out.put_u16(self.service_id);
        out.put_u16(self.method_id);
        out.put_u32(self.payload_length);
        out.put_u16(self.crc16);
    }
}

/// Reads the method id without validating anything else.
pub fn peek_method(bytes: &[u8]) -> Result<u16, WireError> {
    FrameHeader::parse(bytes).map(|h| h.method_id)
}

/// Checks length and CRC, returning the header and the payload slice.
pub fn split_frame(bytes: &[u8]) -> Result<(FrameHeader, &[u8]), WireError> {
    let header = FrameHeader::parse(bytes)?;
    let payload = &bytes[HEADER_LEN..];
    if header.payload_length as usize != payload.len() {
        return Err(WireError::BadLength {
            declared: header.payload_length as usize,
            actual: payload.len(),
        });
    }
    let crc = crc16_ccitt_false(payload);
    if crc != header.crc16 {
        return Err(WireError::BadCrc { expected: header.crc16, got: crc });
    }
    if header.service_id != 0 {
        return Err(WireError::FieldRange { field: "service_id", value: header.service_id as f64 });
    }
    Ok((header, payload))
}

fn frame_bytes(method_id: u16, payload: Vec<u8>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    FrameHeader::for_payload(method_id, &payload).write(&mut out);
    out.extend_from_slice(&payload);
    out
}

/// Decodes a sensor output frame (status, object list or detection list).
///
/// A configuration frame is not sensor output and is reported as
/// `UnknownMethod(390)`; use [`decode_configuration`] for it.
pub fn decode_payload(bytes: &[u8]) -> Result<FramePayload, WireError> {
    let (header, payload) = split_frame(bytes)?;
    match header.method_id {
        method::STATUS => decode_status(payload).map(FramePayload::Status),
        method::OBJECT_LIST => decode_object_list(payload).map(FramePayload::Objects),
        method::DETECTION_LIST => decode_detection_list(payload).map(FramePayload::Detections),
        other => Err(WireError::UnknownMethod(other)),
    }
}

pub fn decode_frame(bytes: &[u8], recv_time: RecvTime, source: SocketAddr) -> Result<Frame, WireError> {
    Ok(Frame { payload: decode_payload(bytes)?, recv_time, source })
}

pub fn encode_frame(frame: &Frame) -> Result<Vec<u8>, WireError> {
    encode_payload(&frame.payload)
}

pub fn encode_payload(payload: &FramePayload) -> Result<Vec<u8>, WireError> {
    match payload {
        FramePayload::Status(s) => encode_status(s),
        FramePayload::Objects(o) => encode_object_list(o),
        FramePayload::Detections(d) => encode_detection_list(d),
    }
}

fn put_stamp(out: &mut Vec<u8>, t: &Timestamp) {
    out.put_u32(t.seconds);
    out.put_u32(t.nanoseconds);
    out.put_u8(t.sync_status.into());
}

fn read_stamp(r: &mut Reader) -> Result<Timestamp, WireError> {
    let stamp = Timestamp { seconds: r.u32()?, nanoseconds: r.u32()?, sync_status: r.enumeration()? };
    stamp.validate()?;
    Ok(stamp)
}

/// Size check for a count-prefixed list: too short is `Truncated`, extra
/// trailing bytes are `BadLength`.
fn check_list_size(payload: &[u8], prefix: usize, count: usize, record: usize) -> Result<(), WireError> {
    let expected = prefix + count * record;
    if payload.len() < expected {
        Err(WireError::Truncated { expected, got: payload.len() })
    } else if payload.len() > expected {
        Err(WireError::BadLength { declared: expected, actual: payload.len() })
    } else {
        Ok(())
    }
}

fn check_count(declared: u32, max: usize) -> Result<usize, WireError> {
    if declared as usize > max {
        Err(WireError::CountOverflow { declared, max: max as u32 })
    } else {
        Ok(declared as usize)
    }
}

pub fn encode_detection_list(list: &DetectionList) -> Result<Vec<u8>, WireError> {
    check_count(list.detections.len().try_into().unwrap_or(u32::MAX), MAX_DETECTIONS)?;
    list.validate()?;
    let mut out = Vec::with_capacity(DETECTION_LIST_PREFIX_LEN + list.detections.len() * DETECTION_RECORD_LEN);
    put_stamp(&mut out, &list.stamp);
    out.put_u32(list.sequence_counter);
    out.put_f32(list.origin_x);
    out.put_f32(list.origin_y);
    out.put_f32(list.origin_z);
    out.put_u32(list.detections.len() as u32);
    for d in &list.detections {
        out.put_f32(d.azimuth);
        out.put_f32(d.azimuth_std);
        out.put_f32(d.elevation);
        out.put_f32(d.elevation_std);
        out.put_f32(d.range);
        out.put_f32(d.range_std);
        out.put_f32(d.range_rate);
        out.put_f32(d.range_rate_std);
        out.put_i8(d.rcs);
        out.put_u8(d.invalid_flags);
        out.put_u16(d.measurement_id);
        out.put_u16(d.object_id);
        out.put_u8(d.classification.into());
    }
    Ok(frame_bytes(method::DETECTION_LIST, out))
}

pub fn decode_detection_list(payload: &[u8]) -> Result<DetectionList, WireError> {
    let mut r = Reader::new(payload);
    if payload.len() < DETECTION_LIST_PREFIX_LEN {
        return Err(WireError::Truncated { expected: DETECTION_LIST_PREFIX_LEN, got: payload.len() });
    }
    let stamp = read_stamp(&mut r)?;
    let sequence_counter = r.u32()?;
    let (origin_x, origin_y, origin_z) = (r.f32()?, r.f32()?, r.f32()?);
    let count = check_count(r.u32()?, MAX_DETECTIONS)?;
    check_list_size(payload, DETECTION_LIST_PREFIX_LEN, count, DETECTION_RECORD_LEN)?;
    let mut detections = Vec::with_capacity(count);
    for _ in 0..count {
        detections.push(Detection {
            azimuth: r.f32()?,
            azimuth_std: r.f32()?,
            elevation: r.f32()?,
            elevation_std: r.f32()?,
            range: r.f32()?,
            range_std: r.f32()?,
            range_rate: r.f32()?,
            range_rate_std: r.f32()?,
            rcs: r.i8()?,
            invalid_flags: r.u8()?,
            measurement_id: r.u16()?,
            object_id: r.u16()?,
            classification: r.enumeration()?,
        });
    }
    let list = DetectionList { stamp, sequence_counter, origin_x, origin_y, origin_z, detections };
    list.validate()?;
    Ok(list)
}

pub fn encode_object_list(list: &ObjectList) -> Result<Vec<u8>, WireError> {
    check_count(list.objects.len().try_into().unwrap_or(u32::MAX), MAX_OBJECTS)?;
    list.validate()?;
    let mut out = Vec::with_capacity(OBJECT_LIST_PREFIX_LEN + list.objects.len() * OBJECT_RECORD_LEN);
    put_stamp(&mut out, &list.stamp);
    out.put_u32(list.sequence_counter);
    out.put_u32(list.objects.len() as u32);
    for o in &list.objects {
        out.put_u32(o.id);
        out.put_u16(o.age);
        out.put_u8(o.status_measurement.into());
        out.put_u8(o.status_movement.into());
        for v in [
            o.position_x,
            o.position_y,
            o.position_z,
            o.position_std_x,
            o.position_std_y,
            o.position_std_z,
            o.orientation_yaw,
            o.orientation_yaw_std,
            o.velocity_rel_x,
            o.velocity_rel_y,
            o.velocity_std_x,
            o.velocity_std_y,
            o.acceleration_rel_x,
            o.acceleration_rel_y,
            o.acceleration_std_x,
            o.acceleration_std_y,
            o.yaw_rate,
            o.shape_length,
            o.shape_width,
        ] {
            out.put_f32(v);
        }
        out.extend_from_slice(&o.classification_probabilities);
    }
    Ok(frame_bytes(method::OBJECT_LIST, out))
}

pub fn decode_object_list(payload: &[u8]) -> Result<ObjectList, WireError> {
    let mut r = Reader::new(payload);
    if payload.len() < OBJECT_LIST_PREFIX_LEN {
        return Err(WireError::Truncated { expected: OBJECT_LIST_PREFIX_LEN, got: payload.len() });
    }
    let stamp = read_stamp(&mut r)?;
    let sequence_counter = r.u32()?;
    let count = check_count(r.u32()?, MAX_OBJECTS)?;
    check_list_size(payload, OBJECT_LIST_PREFIX_LEN, count, OBJECT_RECORD_LEN)?;
    let mut objects = Vec::with_capacity(count);
    for _ in 0..count {
        let mut o = TrackedObject {
            id: r.u32()?,
            age: r.u16()?,
            status_measurement: r.enumeration()?,
            status_movement: r.enumeration()?,
            position_x: r.f32()?,
            position_y: r.f32()?,
            position_z: r.f32()?,
            position_std_x: r.f32()?,
            position_std_y: r.f32()?,
            position_std_z: r.f32()?,
            orientation_yaw: r.f32()?,
            orientation_yaw_std: r.f32()?,
            velocity_rel_x: r.f32()?,
            velocity_rel_y: r.f32()?,
            velocity_std_x: r.f32()?,
            velocity_std_y: r.f32()?,
            acceleration_rel_x: r.f32()?,
            acceleration_rel_y: r.f32()?,
            acceleration_std_x: r.f32()?,
            acceleration_std_y: r.f32()?,
            yaw_rate: r.f32()?,
            shape_length: r.f32()?,
            shape_width: r.f32()?,
            classification_probabilities: [0; 8],
        };
        for p in o.classification_probabilities.iter_mut() {
            *p = r.u8()?;
        }
        objects.push(o);
    }
    let list = ObjectList { stamp, sequence_counter, objects };
    list.validate()?;
    Ok(list)
}

fn put_mounting(out: &mut Vec<u8>, m: &MountingPose) {
    for v in [m.longitudinal, m.lateral, m.vertical, m.yaw, m.pitch] {
        out.put_f32(v);
    }
    out.put_u8(m.plug_orientation.into());
}

fn read_mounting(r: &mut Reader) -> Result<MountingPose, WireError> {
    let m = MountingPose {
        longitudinal: r.f32()?,
        lateral: r.f32()?,
        vertical: r.f32()?,
        yaw: r.f32()?,
        pitch: r.f32()?,
        plug_orientation: r.enumeration()?,
    };
    m.validate()?;
    Ok(m)
}

fn put_vehicle(out: &mut Vec<u8>, v: &VehicleDimensions) {
    for x in [v.length, v.width, v.height, v.wheelbase] {
        out.put_f32(x);
    }
}

fn read_vehicle(r: &mut Reader) -> Result<VehicleDimensions, WireError> {
    let v = VehicleDimensions { length: r.f32()?, width: r.f32()?, height: r.f32()?, wheelbase: r.f32()? };
    v.validate()?;
    Ok(v)
}

fn put_radar(out: &mut Vec<u8>, p: &RadarParameters) {
    out.put_u16(p.max_detection_distance);
    out.put_u8(p.frequency_slot.into());
    out.put_u8(p.cycle_time_ms);
    out.put_u32(p.sensor_ipv4.into());
    out.put_u8(p.powersave_standstill as u8);
}

fn read_radar(r: &mut Reader) -> Result<RadarParameters, WireError> {
    let p = RadarParameters {
        max_detection_distance: r.u16()?,
        frequency_slot: r.enumeration()?,
        cycle_time_ms: r.u8()?,
        sensor_ipv4: Ipv4Addr::from(r.u32()?),
        powersave_standstill: r.bool("powersave_standstill")?,
    };
    p.validate()?;
    Ok(p)
}

fn check_exact(payload: &[u8], expected: usize) -> Result<(), WireError> {
    if payload.len() < expected {
        Err(WireError::Truncated { expected, got: payload.len() })
    } else if payload.len() > expected {
        Err(WireError::BadLength { declared: expected, actual: payload.len() })
    } else {
        Ok(())
    }
}

pub fn encode_status(status: &SensorStatus) -> Result<Vec<u8>, WireError> {
    status.validate()?;
    let mut out = Vec::with_capacity(STATUS_PAYLOAD_LEN);
    put_stamp(&mut out, &status.stamp);
    out.put_u8(status.software_version_major);
    out.put_u8(status.software_version_minor);
    out.put_u8(status.software_version_patch);
    put_mounting(&mut out, &status.mounting);
    put_vehicle(&mut out, &status.vehicle);
    put_radar(&mut out, &status.radar);
    out.put_u8(status.blockage.into());
    out.put_u8(status.defective as u8);
    Ok(frame_bytes(method::STATUS, out))
}

pub fn decode_status(payload: &[u8]) -> Result<SensorStatus, WireError> {
    check_exact(payload, STATUS_PAYLOAD_LEN)?;
    let mut r = Reader::new(payload);
    Ok(SensorStatus {
        stamp: read_stamp(&mut r)?,
        software_version_major: r.u8()?,
        software_version_minor: r.u8()?,
        software_version_patch: r.u8()?,
        mounting: read_mounting(&mut r)?,
        vehicle: read_vehicle(&mut r)?,
        radar: read_radar(&mut r)?,
        blockage: r.enumeration()?,
        defective: r.bool("defective")?,
    })
}

/// Encodes a configuration request as a full frame (method 390): a presence
/// bitmask followed by the populated groups in mounting, vehicle, radar,
/// new-ip order.
pub fn encode_configuration(cfg: &SensorConfiguration) -> Result<Vec<u8>, WireError> {
    cfg.validate()?;
    let mut mask = 0u8;
    let mut body = Vec::new();
    if let Some(m) = &cfg.mounting {
        mask |= presence::MOUNTING;
        put_mounting(&mut body, m);
    }
    if let Some(v) = &cfg.vehicle {
        mask |= presence::VEHICLE;
        put_vehicle(&mut body, v);
    }
    if let Some(p) = &cfg.radar {
        mask |= presence::RADAR;
        put_radar(&mut body, p);
    }
    if let Some(ip) = cfg.new_sensor_ipv4 {
        mask |= presence::NEW_IP;
        body.put_u32(ip.into());
    }
    let mut payload = Vec::with_capacity(1 + body.len());
    payload.put_u8(mask);
    payload.extend_from_slice(&body);
    Ok(frame_bytes(method::CONFIGURATION, payload))
}

pub fn decode_configuration(bytes: &[u8]) -> Result<SensorConfiguration, WireError> {
    let (header, payload) = split_frame(bytes)?;
    if header.method_id != method::CONFIGURATION {
        return Err(WireError::UnknownMethod(header.method_id));
    }
    let mut r = Reader::new(payload);
    let mask = r.u8()?;
    if mask & !presence::ALL != 0 {
        return Err(WireError::FieldRange { field: "presence_bitmask", value: mask as f64 });
    }
    if mask == 0 {
        return Err(WireError::EmptyConfiguration);
    }
    let group_len = |bit: u8, len: usize| if mask & bit != 0 { len } else { 0 };
    let expected = 1
        + group_len(presence::MOUNTING, MOUNTING_LEN)
        + group_len(presence::VEHICLE, VEHICLE_LEN)
        + group_len(presence::RADAR, RADAR_LEN)
        + group_len(presence::NEW_IP, 4);
    check_exact(payload, expected)?;
    let mut cfg = SensorConfiguration::default();
    if mask & presence::MOUNTING != 0 {
        cfg.mounting = Some(read_mounting(&mut r)?);
    }
    if mask & presence::VEHICLE != 0 {
        cfg.vehicle = Some(read_vehicle(&mut r)?);
    }
    if mask & presence::RADAR != 0 {
        cfg.radar = Some(read_radar(&mut r)?);
    }
    if mask & presence::NEW_IP != 0 {
        cfg.new_sensor_ipv4 = Some(Ipv4Addr::from(r.u32()?));
    }
    debug_assert_eq!(r.position(), payload.len());
    Ok(cfg)
}
