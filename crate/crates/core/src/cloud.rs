//! Point clouds and pose sets built from decoded frames, plus file export.
//!
//! Export formats (numbers use six significant digits, `%g` style):
//!
//! - CSV: header `x,y,z,doppler,intensity,source_id`, one row per point.
//! - PCD: ASCII v0.7 with `FIELDS x y z doppler intensity`, one cloud per file.
//! - JSONL: one cloud per line,
//!   `{"stamp":{"seconds":..,"nanoseconds":..,"sync_status":"OK"},"frame_label":"ars548","points":[{"x":..,"y":..,"z":..,"doppler":..,"intensity":..,"source_id":..}]}`

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::model::{object_heading, DetectionList, ObjectList, Timestamp};

pub const DEFAULT_FRAME_LABEL: &str = "ars548";
pub const CSV_HEADER: &str = "x,y,z,doppler,intensity,source_id";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Range rate for detections, radial relative speed for objects.
    pub doppler: f64,
    /// RCS in dBsm for detections, 0 for objects.
    pub intensity: f64,
    /// Measurement id for detections, object id for objects.
    pub source_id: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub stamp: Timestamp,
    pub frame_label: String,
    pub points: Vec<RadarPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseSet {
    pub stamp: Timestamp,
    pub poses: Vec<Pose>,
}

pub fn spherical_to_cartesian(azimuth: f64, elevation: f64, range: f64) -> (f64, f64, f64) {
    let (sin_az, cos_az) = azimuth.sin_cos();
    let (sin_el, cos_el) = elevation.sin_cos();
    (range * cos_el * cos_az, range * cos_el * sin_az, range * sin_el)
}

/// Drops detections whose range or angle is flagged invalid.
pub fn detections_to_cloud(list: &DetectionList) -> PointCloud {
    let points = list
        .detections
        .iter()
        .filter(|d| d.has_valid_position())
        .map(|d| {
            let (x, y, z) = spherical_to_cartesian(d.azimuth as f64, d.elevation as f64, d.range as f64);
            RadarPoint {
                x,
                y,
                z,
                doppler: d.range_rate as f64,
                intensity: d.rcs as f64,
                source_id: d.measurement_id as u32,
            }
        })
        .collect();
    PointCloud { stamp: list.stamp, frame_label: DEFAULT_FRAME_LABEL.to_string(), points }
}

/// Radial component of `v` along `p`; zero at the origin.
pub fn radial_speed(p: (f64, f64, f64), v: (f64, f64, f64)) -> f64 {
    let norm = (p.0 * p.0 + p.1 * p.1 + p.2 * p.2).sqrt();
    if norm < 1e-9 {
        0.0
    } else {
        (p.0 * v.0 + p.1 * v.1 + p.2 * v.2) / norm
    }
}

pub fn objects_to_cloud(list: &ObjectList) -> PointCloud {
    let points = list
        .objects
        .iter()
        .map(|o| {
            let p = (o.position_x as f64, o.position_y as f64, o.position_z as f64);
            let v = (o.velocity_rel_x as f64, o.velocity_rel_y as f64, 0.0);
            RadarPoint { x: p.0, y: p.1, z: p.2, doppler: radial_speed(p, v), intensity: 0.0, source_id: o.id }
        })
        .collect();
    PointCloud { stamp: list.stamp, frame_label: DEFAULT_FRAME_LABEL.to_string(), points }
}

pub fn objects_to_poses(list: &ObjectList) -> PoseSet {
    let poses = list
        .objects
        .iter()
        .map(|o| Pose {
            x: o.position_x as f64,
            y: o.position_y as f64,
            z: o.position_z as f64,
            yaw: object_heading(o),
        })
        .collect();
    PoseSet { stamp: list.stamp, poses }
}

/// Formats `v` with six significant digits, trailing zeros trimmed; switches
/// to exponent notation outside 1e-5..1e15 like C's `%g`.
pub fn format_sig6(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    // `{:.5e}` is correctly rounded, so take the decimal exponent from it.
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..15).contains(&exp) {
        let m = trim_fraction(mantissa);
        return format!("{m}e{exp}");
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_fraction(&format!("{v:.decimals$}")).to_string()
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{}: {source}", path.display())]
pub struct ExportError {
    pub path: PathBuf,
    #[source]
    pub source: io::Error,
}

pub fn write_csv<W: Write>(cloud: &PointCloud, mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for p in &cloud.points {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            format_sig6(p.x),
            format_sig6(p.y),
            format_sig6(p.z),
            format_sig6(p.doppler),
            format_sig6(p.intensity),
            p.source_id
        )?;
    }
    out.flush()
}

pub fn write_pcd<W: Write>(cloud: &PointCloud, mut out: W) -> io::Result<()> {
    let n = cloud.points.len();
    writeln!(out, "# .PCD v0.7 - Point Cloud Data file format")?;
    writeln!(out, "VERSION 0.7")?;
    writeln!(out, "FIELDS x y z doppler intensity")?;
    writeln!(out, "SIZE 4 4 4 4 4")?;
    writeln!(out, "TYPE F F F F F")?;
    writeln!(out, "COUNT 1 1 1 1 1")?;
    writeln!(out, "WIDTH {n}")?;
    writeln!(out, "HEIGHT 1")?;
    writeln!(out, "VIEWPOINT 0 0 0 1 0 0 0")?;
    writeln!(out, "POINTS {n}")?;
    writeln!(out, "DATA ascii")?;
    for p in &cloud.points {
        writeln!(
            out,
            "{} {} {} {} {}",
            format_sig6(p.x),
            format_sig6(p.y),
            format_sig6(p.z),
            format_sig6(p.doppler),
            format_sig6(p.intensity)
        )?;
    }
    out.flush()
}

fn sync_name(t: &Timestamp) -> String {
    serde_json::to_value(t.sync_status)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

/// Writes one JSON object for `cloud`, without a trailing newline.
pub fn write_json_cloud<W: Write>(cloud: &PointCloud, out: &mut W) -> io::Result<()> {
    write!(
        out,
        "{{\"stamp\":{{\"seconds\":{},\"nanoseconds\":{},\"sync_status\":\"{}\"}},\"frame_label\":{},\"points\":[",
        cloud.stamp.seconds,
        cloud.stamp.nanoseconds,
        sync_name(&cloud.stamp),
        serde_json::to_string(&cloud.frame_label).map_err(io::Error::other)?
    )?;
    for (i, p) in cloud.points.iter().enumerate() {
        if i > 0 {
            write!(out, ",")?;
        }
        write!(
            out,
            "{{\"x\":{},\"y\":{},\"z\":{},\"doppler\":{},\"intensity\":{},\"source_id\":{}}}",
            format_sig6(p.x),
            format_sig6(p.y),
            format_sig6(p.z),
            format_sig6(p.doppler),
            format_sig6(p.intensity),
            p.source_id
        )?;
    }
    write!(out, "]}}")
}

pub fn write_jsonl<'a, W: Write>(clouds: impl IntoIterator<Item = &'a PointCloud>, mut out: W) -> io::Result<()> {
    for cloud in clouds {
        write_json_cloud(cloud, &mut out)?;
        writeln!(out)?;
    }
    out.flush()
}

fn with_file(path: &Path, f: impl FnOnce(BufWriter<File>) -> io::Result<()>) -> Result<(), ExportError> {
    let wrap = |source| ExportError { path: path.to_path_buf(), source };
    let file = File::create(path).map_err(wrap)?;
    f(BufWriter::new(file)).map_err(wrap)
}

pub fn write_csv_file(cloud: &PointCloud, path: &Path) -> Result<(), ExportError> {
    with_file(path, |w| write_csv(cloud, w))
}

pub fn write_pcd_file(cloud: &PointCloud, path: &Path) -> Result<(), ExportError> {
    with_file(path, |w| write_pcd(cloud, w))
}

pub fn write_jsonl_file<'a>(clouds: impl IntoIterator<Item = &'a PointCloud>, path: &Path) -> Result<(), ExportError> {
    with_file(path, |w| write_jsonl(clouds, w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_6};

    fn stamp() -> Timestamp {
        Timestamp::new(10, 20, SyncStatus::Ok)
    }

    fn detection(az: f32, el: f32, r: f32, rr: f32, flags: u8) -> Detection {
        Detection {
            azimuth: az,
            azimuth_std: 0.0,
            elevation: el,
            elevation_std: 0.0,
            range: r,
            range_std: 0.0,
            range_rate: rr,
            range_rate_std: 0.0,
            rcs: 12,
            measurement_id: 4,
            object_id: UNASSOCIATED,
            classification: Classification::Unknown,
            invalid_flags: flags,
        }
    }

    fn dlist(detections: Vec<Detection>) -> DetectionList {
        DetectionList { stamp: stamp(), sequence_counter: 0, origin_x: 0.0, origin_y: 0.0, origin_z: 0.0, detections }
    }

    fn object_at(p: (f32, f32, f32), v: (f32, f32)) -> TrackedObject {
        TrackedObject {
            id: 9,
            age: 0,
            status_measurement: MeasurementStatus::New,
            status_movement: MovementStatus::Moving,
            position_x: p.0,
            position_y: p.1,
            position_z: p.2,
            position_std_x: 0.0,
            position_std_y: 0.0,
            position_std_z: 0.0,
            orientation_yaw: 0.0,
            orientation_yaw_std: 0.0,
            velocity_rel_x: v.0,
            velocity_rel_y: v.1,
            velocity_std_x: 0.0,
            velocity_std_y: 0.0,
            acceleration_rel_x: 0.0,
            acceleration_rel_y: 0.0,
            acceleration_std_x: 0.0,
            acceleration_std_y: 0.0,
            yaw_rate: 0.0,
            shape_length: 0.0,
            shape_width: 0.0,
            classification_probabilities: [0; 8],
        }
    }

    fn close(a: (f64, f64, f64), b: (f64, f64, f64), tol: f64) -> bool {
        (a.0 - b.0).abs() < tol && (a.1 - b.1).abs() < tol && (a.2 - b.2).abs() < tol
    }

    #[test]
    fn conversion_examples() {
        assert_eq!(spherical_to_cartesian(0.0, 0.0, 10.0), (10.0, 0.0, 0.0));
        assert!(close(spherical_to_cartesian(FRAC_PI_2, 0.0, 5.0), (0.0, 5.0, 0.0), 1e-12));
        // Oracle: closed forms cos(pi/6)=sqrt(3)/2, sin(pi/6)=1/2, cos(pi/4)=sin(pi/4)=sqrt(2)/2.
        let (s3, s2) = (3f64.sqrt(), 2f64.sqrt());
        let expected = (2.0 * s2 / 2.0 * s3 / 2.0, 2.0 * s2 / 2.0 * 0.5, 2.0 * s2 / 2.0);
        assert!(close(expected, (1.2247, 0.7071, 1.4142), 1e-4));
        assert!(close(spherical_to_cartesian(FRAC_PI_6, FRAC_PI_4, 2.0), expected, 1e-6));
    }

    #[test]
    fn detection_cloud() {
        let empty = detections_to_cloud(&dlist(vec![]));
        assert!(empty.points.is_empty());
        assert_eq!(empty.stamp, stamp());

        let flagged = detections_to_cloud(&dlist(vec![detection(0.0, 0.0, 10.0, -5.0, invalid_flags::RANGE)]));
        assert!(flagged.points.is_empty());

        // A range-rate flag alone does not drop the point.
        let c = detections_to_cloud(&dlist(vec![detection(0.0, 0.0, 10.0, -5.0, invalid_flags::RANGE_RATE)]));
        assert_eq!(c.points.len(), 1);
        let p = c.points[0];
        assert_eq!((p.x, p.y, p.z, p.doppler, p.intensity, p.source_id), (10.0, 0.0, 0.0, -5.0, 12.0, 4));
    }

    #[test]
    fn object_doppler() {
        let list = |p, v| ObjectList { stamp: stamp(), sequence_counter: 0, objects: vec![object_at(p, v)] };
        assert_eq!(objects_to_cloud(&list((10.0, 0.0, 0.0), (-5.0, 0.0))).points[0].doppler, -5.0);
        assert_eq!(objects_to_cloud(&list((0.0, 10.0, 0.0), (-5.0, 0.0))).points[0].doppler, 0.0);
        let d = objects_to_cloud(&list((3.0, 4.0, 0.0), (1.0, 2.0))).points[0].doppler;
        assert!((d - (3.0 * 1.0 + 4.0 * 2.0) / 5.0).abs() < 1e-12);
        assert_eq!(objects_to_cloud(&list((0.0, 0.0, 0.0), (1.0, 2.0))).points[0].doppler, 0.0);
        let poses = objects_to_poses(&list((3.0, 4.0, 0.0), (0.0, 1.0)));
        assert!((poses.poses[0].yaw - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn sig6_formatting() {
        assert_eq!(format_sig6(0.0), "0");
        assert_eq!(format_sig6(-0.0), "0");
        assert_eq!(format_sig6(10.0), "10");
        assert_eq!(format_sig6(1.224744871), "1.22474");
        assert_eq!(format_sig6(-5.0), "-5");
        assert_eq!(format_sig6(123456.7), "123457");
        assert_eq!(format_sig6(9.9999996), "10");
        assert_eq!(format_sig6(0.000123456789), "0.000123457");
        assert_eq!(format_sig6(1.5e-7), "1.5e-7");
        assert_eq!(format_sig6(2.5e20), "2.5e20");
    }

    fn sample_cloud() -> PointCloud {
        PointCloud {
            stamp: stamp(),
            frame_label: DEFAULT_FRAME_LABEL.into(),
            points: vec![
                RadarPoint { x: 1.2247448, y: 0.70710678, z: 1.41421356, doppler: -2.5, intensity: 7.0, source_id: 1 },
                RadarPoint { x: 100.123456, y: -3.0, z: 0.0, doppler: 0.0, intensity: -12.0, source_id: 2 },
            ],
        }
    }

    #[test]
    fn empty_csv_is_header_only() {
        let mut buf = Vec::new();
        write_csv(&PointCloud { stamp: stamp(), frame_label: "x".into(), points: vec![] }, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x,y,z,doppler,intensity,source_id\n");
    }

    #[test]
    fn csv_parse_back() {
        let cloud = sample_cloud();
        let mut buf = Vec::new();
        write_csv(&cloud, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        for (line, p) in lines.zip(&cloud.points) {
            let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
            for (got, want) in cols.iter().zip([p.x, p.y, p.z, p.doppler, p.intensity]) {
                assert!((got - want).abs() <= 5e-6 * want.abs().max(1e-30), "{got} vs {want}");
            }
            assert_eq!(cols[5] as u32, p.source_id);
        }
    }

    #[test]
    fn pcd_header_counts_rows() {
        let mut buf = Vec::new();
        write_pcd(&sample_cloud(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("VERSION 0.7\nFIELDS x y z doppler intensity\n"));
        let points: usize = text.lines().find_map(|l| l.strip_prefix("POINTS ")).unwrap().parse().unwrap();
        let data_rows = text.lines().skip_while(|l| *l != "DATA ascii").skip(1).count();
        assert_eq!(points, data_rows);
        assert_eq!(points, 2);
    }

    #[test]
    fn jsonl_is_valid_json_per_line() {
        let clouds = vec![sample_cloud(), PointCloud { points: vec![], ..sample_cloud() }];
        let mut buf = Vec::new();
        write_jsonl(&clouds, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        let v: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(v["stamp"]["seconds"], 10);
        assert_eq!(v["stamp"]["sync_status"], "OK");
        assert_eq!(v["points"][0]["x"].as_f64().unwrap(), 1.22474);
        assert_eq!(v["points"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn exports_are_deterministic() {
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_pcd(&sample_cloud(), &mut a).unwrap();
        write_pcd(&sample_cloud(), &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn export_error_names_path() {
        let err = write_csv_file(&sample_cloud(), Path::new("/nonexistent-dir/x.csv")).unwrap_err();
        assert!(err.to_string().starts_with("/nonexistent-dir/x.csv"));
    }

    proptest! {
        #[test]
        fn conversion_preserves_norm(az in -3.14f64..3.14, el in -1.57f64..1.57, r in 0f64..2000.0) {
            let (x, y, z) = spherical_to_cartesian(az, el, r);
            let norm = (x * x + y * y + z * z).sqrt();
            prop_assert!((norm - r).abs() <= 1e-9 * r.max(1e-300));
        }

        #[test]
        fn object_doppler_bounded_by_speed(p in proptest::array::uniform3(-100f32..100.0), v in proptest::array::uniform2(-50f32..50.0)) {
            let list = ObjectList { stamp: stamp(), sequence_counter: 0, objects: vec![object_at((p[0], p[1], p[2]), (v[0], v[1]))] };
            let d = objects_to_cloud(&list).points[0].doppler;
            prop_assert!(d.abs() <= object_speed(&list.objects[0]) + 1e-9);
        }

        #[test]
        fn sig6_round_trips_to_six_figures(v in -1e6f64..1e6) {
            let parsed: f64 = format_sig6(v).parse().unwrap();
            prop_assert!((parsed - v).abs() <= 5e-6 * v.abs() + 1e-300);
        }
    }
}
