use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::{Ipv4Addr, SocketAddr, SocketAddrV4};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant, UNIX_EPOCH};

use anyhow::{Context, Result};
use log::{info, warn};

use ars548::filter::{filter_objects, parse_filter_expr};
use ars548::recorder::{replay_to_udp, LogReader, LogRecord, LogWriter};
use ars548::simulator::{run_emitter, EmitterConfig, Scenario, StampBase};
use ars548::transport::{
    await_confirmation, send_configuration_frame, ConfigOutcome, Driver, FrameSink, Receiver, TransportConfig,
    ACK_TIMEOUT,
};
use ars548::{
    Frame, FramePayload, RadarParameters, RecvTime, SensorConfiguration, SensorStatus, StampPolicy, VehicleDimensions,
};

use crate::args::{ConfigureArgs, DataPort, ExportArgs, ListenArgs, RecordArgs, ReplayArgs, SimulateArgs};
use crate::export::Exporter;
use crate::UsageError;

fn data_config(d: &DataPort, policy: StampPolicy) -> TransportConfig {
    TransportConfig {
        listen_port: d.port,
        multicast_group: d.group.0,
        interface_address: d.iface,
        stamp_policy: policy,
        ..TransportConfig::default()
    }
}

fn deadline(duration: Option<f64>) -> Option<Instant> {
    duration.map(|s| Instant::now() + Duration::from_secs_f64(s))
}

fn keep_going(stop: &AtomicBool, until: Option<Instant>) -> bool {
    !stop.load(Ordering::SeqCst) && until.is_none_or(|t| Instant::now() < t)
}

fn one_line(dump: &str) -> String {
    dump.lines().collect::<Vec<_>>().join(" ")
}

fn describe(frame: &Frame) -> String {
    let p = &frame.payload;
    let stamp = p.stamp();
    let detail = match p {
        FramePayload::Detections(d) => format!("seq={} detections={}", d.sequence_counter, d.detections.len()),
        FramePayload::Objects(o) => format!("seq={} objects={}", o.sequence_counter, o.objects.len()),
        FramePayload::Status(s) => format!(
            "max_distance={} slot={} cycle_ms={} blockage={:?}",
            s.radar.max_detection_distance, u8::from(s.radar.frequency_slot), s.radar.cycle_time_ms, s.blockage
        ),
    };
    format!("{} stamp={}.{:09} {}", p.kind().name(), stamp.seconds, stamp.nanoseconds, detail)
}

pub fn listen(a: ListenArgs, stop: &AtomicBool) -> Result<u8> {
    let cfg = data_config(&a.data, a.stamp.into());
    let filter = a.filter.as_deref().map(parse_filter_expr).transpose().map_err(|e| UsageError(e.to_string()))?;
    let mut receiver = Receiver::bind(&cfg).with_context(|| format!("cannot listen on port {}", cfg.listen_port))?;
    let mut exporter = match (a.export, &a.out) {
        (Some(format), Some(dir)) => Some(Exporter::new(format, dir)?),
        _ => None,
    };
    let until = deadline(a.duration);
    let stats_every = (a.stats_every > 0.0).then(|| Duration::from_secs_f64(a.stats_every));
    let mut next_stats = stats_every.map(|d| Instant::now() + d);
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut pending = Vec::new();

    while keep_going(stop, until) {
        receiver.poll(&mut |f: Frame| pending.push(f)).context("receive failed")?;
        for frame in pending.drain(..) {
            match &mut exporter {
                Some(e) => e.write(&frame.payload, filter.as_ref())?,
                None => {
                    let frame = match (&filter, frame.payload) {
                        (Some(p), FramePayload::Objects(list)) => Frame {
                            payload: FramePayload::Objects(filter_objects(&list, p)),
                            ..frame
                        },
                        (_, payload) => Frame { payload, ..frame },
                    };
                    writeln!(out, "{}", describe(&frame))?;
                }
            }
        }
        if let (Some(every), Some(at)) = (stats_every, next_stats) {
            if Instant::now() >= at {
                writeln!(out, "stats {}", one_line(&receiver.stats().dump()))?;
                next_stats = Some(at + every);
            }
        }
    }
    if let Some(e) = exporter {
        e.finish()?;
    }
    write!(out, "{}", receiver.stats().dump())?;
    Ok(0)
}

fn build_vehicle(v: &[f32]) -> VehicleDimensions {
    VehicleDimensions { length: v[0], width: v[1], height: v[2], wheelbase: v[3] }
}

/// Polls until a status frame arrives or `timeout` elapses.
fn wait_status(receiver: &mut Receiver, timeout: Duration) -> Result<Option<SensorStatus>> {
    let until = Instant::now() + timeout;
    while Instant::now() < until {
        let mut status = None;
        receiver
            .poll(&mut |f: Frame| {
                if let FramePayload::Status(s) = f.payload {
                    status = Some(s);
                }
            })
            .context("receive failed")?;
        if status.is_some() {
            return Ok(status);
        }
    }
    Ok(None)
}

pub fn configure(a: ConfigureArgs) -> Result<u8> {
    let mounting = a.parse_mounting().map_err(UsageError)?;
    let vehicle = a.vehicle.as_deref().map(build_vehicle);
    if mounting.is_none() && vehicle.is_none() && !a.any_radar_field() && a.new_ip.is_none() {
        return Err(UsageError("no parameter given; pass at least one of --max-distance, --frequency-slot, --cycle-time, --powersave, --mounting, --vehicle, --new-ip".into()).into());
    }
    if let Some(m) = &mounting {
        m.validate().map_err(|e| UsageError(format!("--mounting: {e}")))?;
    }
    if let Some(v) = &vehicle {
        v.validate().map_err(|e| UsageError(format!("--vehicle: {e}")))?;
    }

    let cfg = TransportConfig {
        listen_port: a.listen_port,
        multicast_group: a.group.0,
        interface_address: a.iface,
        sensor_address: a.sensor_ip,
        config_port: a.config_port,
        stamp_policy: StampPolicy::KeepOriginal,
    };
    cfg.validate().map_err(|e| UsageError(e.to_string()))?;
    let mut receiver = Receiver::bind(&cfg).with_context(|| format!("cannot listen on port {}", cfg.listen_port))?;

    // The radar group is sent whole: unspecified fields keep the sensor's
    // current values.
    let radar = if a.any_radar_field() {
        let base = match wait_status(&mut receiver, ACK_TIMEOUT)? {
            Some(s) => s.radar,
            None => {
                warn!("no status frame received; unspecified radar parameters use defaults");
                RadarParameters::default()
            }
        };
        Some(RadarParameters {
            max_detection_distance: a.max_distance.unwrap_or(base.max_detection_distance),
            frequency_slot: a.frequency_slot.unwrap_or(base.frequency_slot),
            cycle_time_ms: a.cycle_time.unwrap_or(base.cycle_time_ms),
            powersave_standstill: a.powersave.unwrap_or(base.powersave_standstill),
            ..base
        })
    } else {
        None
    };
    let request = SensorConfiguration { mounting, vehicle, radar, new_sensor_ipv4: a.new_ip };
    request.validate().map_err(|e| UsageError(e.to_string()))?;

    send_configuration_frame(&cfg, &request)?;
    info!("configuration sent to {}", cfg.config_endpoint());
    let mut io_failure = None;
    let outcome = await_confirmation(&request, ACK_TIMEOUT, |_| match wait_status(&mut receiver, Duration::from_millis(100)) {
        Ok(s) => s,
        Err(e) => {
            io_failure.get_or_insert(e);
            None
        }
    });
    if let Some(e) = io_failure {
        return Err(e);
    }
    println!("{}", outcome.label());
    if let ConfigOutcome::Confirmed(s) | ConfigOutcome::Mismatch(s) = &outcome {
        println!("{}", serde_json::to_string(&s)?);
    }
    Ok(if matches!(outcome, ConfigOutcome::Confirmed(_)) { 0 } else { 1 })
}

pub fn simulate(a: SimulateArgs, stop: &AtomicBool) -> Result<u8> {
    let mut scenario = Scenario::load(&a.scenario)?;
    if let Some(seed) = a.seed {
        scenario.seed = seed;
    }
    let mut cfg = EmitterConfig::new(a.target);
    cfg.paced = !a.unpaced;
    cfg.config_bind = a.config_port.map(|p| SocketAddr::V4(SocketAddrV4::new(Ipv4Addr::UNSPECIFIED, p)));
    cfg.ground_truth = a.ground_truth.clone();
    cfg.stamp_base = match a.stamp_offset {
        Some(offset_secs) => StampBase::WallClock { offset_secs },
        None => StampBase::Scenario,
    };
    let summary = run_emitter(scenario, cfg, stop)?;
    println!("cycles={}", summary.cycles);
    println!("detection_frames={}", summary.detection_frames);
    println!("object_frames={}", summary.object_frames);
    println!("status_frames={}", summary.status_frames);
    println!("bytes_sent={}", summary.bytes_sent);
    println!("configs_applied={}", summary.configs_applied);
    println!("configs_rejected={}", summary.configs_rejected);
    Ok(0)
}

struct RecordSink {
    writer: LogWriter<BufWriter<File>>,
    failure: Option<io::Error>,
}

impl FrameSink for RecordSink {
    fn on_frame(&mut self, _frame: Frame) {}

    fn on_datagram(&mut self, bytes: &[u8], recv_time: RecvTime, source: SocketAddr) {
        if self.failure.is_none() {
            if let Err(e) = self.writer.write_record(&LogRecord::new(recv_time.wall, source, bytes.to_vec())) {
                self.failure = Some(e);
            }
        }
    }
}

pub fn record(a: RecordArgs, stop: &AtomicBool) -> Result<u8> {
    let cfg = data_config(&a.data, StampPolicy::KeepOriginal);
    let mut receiver = Receiver::bind(&cfg).with_context(|| format!("cannot listen on port {}", cfg.listen_port))?;
    let writer = LogWriter::create(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
    let mut sink = RecordSink { writer, failure: None };
    let until = deadline(a.duration);
    while keep_going(stop, until) && sink.failure.is_none() {
        receiver.poll(&mut sink).context("receive failed")?;
    }
    let count = sink.writer.count();
    if let Some(e) = sink.failure {
        return Err(e).with_context(|| format!("writing {} failed after {count} records", a.out.display()));
    }
    sink.writer.finish().with_context(|| format!("cannot flush {}", a.out.display()))?;
    println!("records={count}");
    print!("{}", receiver.stats().dump());
    Ok(0)
}

pub fn replay(a: ReplayArgs, stop: &AtomicBool) -> Result<u8> {
    let summary = replay_to_udp(&a.input, a.target, a.speed, Some(stop))
        .with_context(|| format!("replaying {}", a.input.display()))?;
    println!("records={}", summary.records);
    println!("bytes={}", summary.bytes);
    println!("elapsed_secs={:.3}", summary.elapsed.as_secs_f64());
    Ok(0)
}

pub fn export(a: ExportArgs) -> Result<u8> {
    let filter = a.filter.as_deref().map(parse_filter_expr).transpose().map_err(|e| UsageError(e.to_string()))?;
    let reader = LogReader::open(&a.input).with_context(|| format!("cannot read {}", a.input.display()))?;
    let mut exporter = Exporter::new(a.format, &a.out)?;
    let mut driver = Driver::new(a.stamp.into());
    let mut records = 0u64;
    for rec in reader {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                warn!("{}: {e}; exporting the {records} complete records", a.input.display());
                break;
            }
        };
        records += 1;
        let recv_time = RecvTime { wall: UNIX_EPOCH + Duration::from_nanos(rec.recv_time_ns), mono: Instant::now() };
        if let Ok(frame) = driver.handle_datagram(&rec.payload, recv_time, SocketAddr::V4(rec.source)) {
            exporter.write(&frame.payload, filter.as_ref())?;
        }
    }
    exporter.finish()?;
    let stats = driver.stats();
    println!("records={records}");
    println!("frames={}", stats.total_ok());
    println!("errors={}", stats.total_errors());
    Ok(0)
}
