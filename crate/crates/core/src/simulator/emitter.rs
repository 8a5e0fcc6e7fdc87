use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::{SocketAddr, UdpSocket};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use log::{debug, info, warn};

use super::{synthesize_cycle_at, Scenario};
use crate::codec::{decode_configuration, encode_detection_list, encode_object_list, encode_status, WireError};
use crate::model::{SensorStatus, SyncStatus, Timestamp};

const LISTENER_POLL: Duration = Duration::from_millis(20);

/// Where stamps of emitted frames start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StampBase {
    /// `scenario.stamp_epoch`; fully deterministic.
    Scenario,
    /// Host wall clock at emission start plus `offset_secs` (may be negative).
    WallClock { offset_secs: f64 },
}

#[derive(Debug, Clone)]
pub struct EmitterConfig {
    pub target: SocketAddr,
    /// Address to listen on for configuration frames; `None` disables.
    pub config_bind: Option<SocketAddr>,
    /// Pace cycles at the scenario rate; otherwise emit back to back.
    pub paced: bool,
    pub stamp_base: StampBase,
    /// A status frame follows the object list every this many cycles.
    pub status_every: u64,
    pub initial_status: SensorStatus,
    pub ground_truth: Option<PathBuf>,
}

impl EmitterConfig {
    pub fn new(target: SocketAddr) -> Self {
        EmitterConfig {
            target,
            config_bind: None,
            paced: true,
            stamp_base: StampBase::WallClock { offset_secs: 0.0 },
            status_every: 10,
            initial_status: SensorStatus::default(),
            ground_truth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmissionSummary {
    pub cycles: u64,
    pub detection_frames: u64,
    pub object_frames: u64,
    pub status_frames: u64,
    pub bytes_sent: u64,
    pub configs_applied: u64,
    pub configs_rejected: u64,
    /// Stamp of cycle 0; cycle `k` is stamped `base + k / rate`.
    pub stamp_base: Duration,
    pub final_status: Option<SensorStatus>,
}

#[derive(Debug, thiserror::Error)]
pub enum EmitError {
    #[error("socket error after {cycles} cycles: {source}")]
    Socket { cycles: u64, source: io::Error },
    #[error("ground truth {path}: {source}")]
    GroundTruth { path: PathBuf, source: io::Error },
    #[error("encoding failed: {0}")]
    Encode(#[from] WireError),
    #[error(transparent)]
    Scenario(#[from] super::ScenarioError),
}

/// Emulated sensor with its data socket and optional configuration listener.
pub struct Emitter {
    scenario: Scenario,
    cfg: EmitterConfig,
    data: UdpSocket,
    config: Option<UdpSocket>,
    status: Arc<Mutex<SensorStatus>>,
}

impl Emitter {
    pub fn bind(scenario: Scenario, cfg: EmitterConfig) -> Result<Self, EmitError> {
        scenario.validate()?;
        let socket_err = |source| EmitError::Socket { cycles: 0, source };
        let local: SocketAddr = if cfg.target.is_ipv4() { "0.0.0.0:0" } else { "[::]:0" }.parse().unwrap();
        let data = UdpSocket::bind(local).map_err(socket_err)?;
        if let SocketAddr::V4(t) = cfg.target {
            if t.ip().is_multicast() {
                data.set_multicast_loop_v4(true).map_err(socket_err)?;
            }
        }
        let config = match cfg.config_bind {
            Some(addr) => {
                let s = UdpSocket::bind(addr).map_err(socket_err)?;
                s.set_read_timeout(Some(LISTENER_POLL)).map_err(socket_err)?;
                Some(s)
            }
            None => None,
        };
        let status = Arc::new(Mutex::new(cfg.initial_status));
        Ok(Emitter { scenario, cfg, data, config, status })
    }

    pub fn config_addr(&self) -> Option<SocketAddr> {
        self.config.as_ref().and_then(|s| s.local_addr().ok())
    }

    /// Shared handle to the status the emulator echoes.
    pub fn status(&self) -> Arc<Mutex<SensorStatus>> {
        Arc::clone(&self.status)
    }

    /// Emits every cycle of the scenario or until `stop` is raised.
    pub fn run(self, stop: &AtomicBool) -> Result<EmissionSummary, EmitError> {
        let Emitter { scenario, cfg, data, config, status } = self;
        let applied = Arc::new(AtomicU64::new(0));
        let rejected = Arc::new(AtomicU64::new(0));
        let done = Arc::new(AtomicBool::new(false));

        let listener = config.map(|sock| {
            let (status, applied, rejected, done) =
                (Arc::clone(&status), Arc::clone(&applied), Arc::clone(&rejected), Arc::clone(&done));
            thread::spawn(move || config_listener(sock, status, applied, rejected, done))
        });

        let result = emit_loop(&scenario, &cfg, &data, &status, stop);
        done.store(true, Ordering::SeqCst);
        if let Some(handle) = listener {
            let _ = handle.join();
        }
        let mut summary = result?;
        summary.configs_applied = applied.load(Ordering::SeqCst);
        summary.configs_rejected = rejected.load(Ordering::SeqCst);
        summary.final_status = Some(*status.lock().unwrap());
        Ok(summary)
    }
}

pub fn run_emitter(scenario: Scenario, cfg: EmitterConfig, stop: &AtomicBool) -> Result<EmissionSummary, EmitError> {
    Emitter::bind(scenario, cfg)?.run(stop)
}

fn config_listener(
    sock: UdpSocket,
    status: Arc<Mutex<SensorStatus>>,
    applied: Arc<AtomicU64>,
    rejected: Arc<AtomicU64>,
    done: Arc<AtomicBool>,
) {
    let mut buf = vec![0u8; 65535];
    while !done.load(Ordering::SeqCst) {
        let (n, from) = match sock.recv_from(&mut buf) {
            Ok(r) => r,
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => continue,
            Err(e) => {
                warn!("configuration listener stopped: {e}");
                return;
            }
        };
        match decode_configuration(&buf[..n]) {
            Ok(cfg) => {
                status.lock().unwrap().apply(&cfg);
                applied.fetch_add(1, Ordering::SeqCst);
                info!("applied configuration from {from}: {cfg:?}");
            }
            Err(e) => {
                rejected.fetch_add(1, Ordering::SeqCst);
                warn!("rejected configuration frame from {from}: {e}");
            }
        }
    }
}

fn emit_loop(
    scenario: &Scenario,
    cfg: &EmitterConfig,
    data: &UdpSocket,
    status: &Mutex<SensorStatus>,
    stop: &AtomicBool,
) -> Result<EmissionSummary, EmitError> {
    let stamp_base = match cfg.stamp_base {
        StampBase::Scenario => Duration::from_secs_f64(scenario.stamp_epoch),
        StampBase::WallClock { offset_secs } => {
            let now = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default().as_secs_f64();
            Duration::from_secs_f64((now + offset_secs).max(0.0))
        }
    };
    let mut truth = match &cfg.ground_truth {
        Some(path) => Some((
            BufWriter::new(
                File::create(path).map_err(|source| EmitError::GroundTruth { path: path.clone(), source })?,
            ),
            path,
        )),
        None => None,
    };
    let mut summary = EmissionSummary { stamp_base, ..Default::default() };
    let start = Instant::now();

    for cycle in 0..scenario.cycle_count() {
        if stop.load(Ordering::SeqCst) {
            break;
        }
        if cfg.paced {
            let due = start + Duration::from_nanos(scenario.cycle_offset_nanos(cycle));
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                thread::sleep(wait);
            }
        }
        let out = synthesize_cycle_at(scenario, cycle, stamp_base);
        let send = |bytes: &[u8], summary: &mut EmissionSummary| -> Result<(), EmitError> {
            data.send_to(bytes, cfg.target)
                .map_err(|source| EmitError::Socket { cycles: summary.cycles, source })?;
            summary.bytes_sent += bytes.len() as u64;
            Ok(())
        };

        send(&encode_detection_list(&out.detections)?, &mut summary)?;
        summary.detection_frames += 1;
        send(&encode_object_list(&out.objects)?, &mut summary)?;
        summary.object_frames += 1;

        if cfg.status_every > 0 && cycle % cfg.status_every == 0 {
            let frame = {
                let mut st = status.lock().unwrap();
                st.stamp = Timestamp { sync_status: SyncStatus::Ok, ..out.objects.stamp };
                encode_status(&st)?
            };
            send(&frame, &mut summary)?;
            summary.status_frames += 1;
        }

        if let Some((w, path)) = truth.as_mut() {
            let line = serde_json::to_string(&out.truth).expect("ground truth serializes");
            writeln!(w, "{line}").map_err(|source| EmitError::GroundTruth { path: (*path).clone(), source })?;
        }
        summary.cycles += 1;
        debug!("cycle {cycle} emitted");
    }

    if let Some((mut w, path)) = truth {
        w.flush().map_err(|source| EmitError::GroundTruth { path: path.clone(), source })?;
    }
    Ok(summary)
}
