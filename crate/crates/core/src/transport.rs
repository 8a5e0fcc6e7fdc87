//! UDP reception and configuration transmission.
//!
//! One datagram carries exactly one frame. The receive loop stamps each
//! datagram on arrival, decodes it, applies the [`StampPolicy`] and hands valid
//! frames to a [`FrameSink`] in arrival order. Decode failures are counted in
//! [`DriverStats`] and never stop the loop.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::net::{Ipv4Addr, SocketAddr, SocketAddrV4, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use log::{debug, warn};
use socket2::{Domain, Protocol, Socket, Type};

use crate::codec::{self, WireError, WireErrorKind};
use crate::model::{apply_stamp_policy, Frame, FrameKind, FramePayload, RecvTime, SensorConfiguration, SensorStatus, StampPolicy};

pub const DEFAULT_LISTEN_PORT: u16 = 42102;
pub const DEFAULT_MULTICAST_GROUP: Ipv4Addr = Ipv4Addr::new(224, 0, 2, 2);
pub const DEFAULT_SENSOR_ADDRESS: Ipv4Addr = Ipv4Addr::new(10, 13, 1, 113);
pub const DEFAULT_CONFIG_PORT: u16 = 42101;
pub const ACK_TIMEOUT: Duration = Duration::from_secs(2);
pub const DATAGRAM_BUFFER: usize = 65535;

/// Read timeout of the receive socket; bounds how long a stop request waits.
const POLL_INTERVAL: Duration = Duration::from_millis(50);
const RECV_BUFFER_BYTES: usize = 8 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct TransportConfig {
    pub listen_port: u16,
    pub multicast_group: Option<Ipv4Addr>,
    pub interface_address: Option<Ipv4Addr>,
    pub sensor_address: Ipv4Addr,
    pub config_port: u16,
    pub stamp_policy: StampPolicy,
}

impl Default for TransportConfig {
    fn default() -> Self {
        TransportConfig {
            listen_port: DEFAULT_LISTEN_PORT,
            multicast_group: Some(DEFAULT_MULTICAST_GROUP),
            interface_address: None,
            sensor_address: DEFAULT_SENSOR_ADDRESS,
            config_port: DEFAULT_CONFIG_PORT,
            stamp_policy: StampPolicy::OverrideLocal,
        }
    }
}

impl TransportConfig {
    /// Unicast reception on localhost, convenient with the simulator.
    pub fn loopback(listen_port: u16, config_port: u16) -> Self {
        TransportConfig {
            listen_port,
            multicast_group: None,
            interface_address: Some(Ipv4Addr::LOCALHOST),
            sensor_address: Ipv4Addr::LOCALHOST,
            config_port,
            stamp_policy: StampPolicy::OverrideLocal,
        }
    }

    pub fn validate(&self) -> Result<(), TransportError> {
        if self.listen_port == 0 || self.config_port == 0 {
            return Err(TransportError::InvalidConfig("ports must be nonzero".into()));
        }
        if let Some(g) = self.multicast_group {
            if !g.is_multicast() {
                return Err(TransportError::InvalidConfig(format!("{g} is not in 224.0.0.0/4")));
            }
        }
        Ok(())
    }

    pub fn config_endpoint(&self) -> SocketAddr {
        SocketAddr::V4(SocketAddrV4::new(self.sensor_address, self.config_port))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("invalid transport configuration: {0}")]
    InvalidConfig(String),
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
    #[error("configuration rejected before transmission: {0}")]
    Rejected(WireError),
}

fn io_err(context: impl Into<String>) -> impl FnOnce(io::Error) -> TransportError {
    let context = context.into();
    move |source| TransportError::Io { context, source }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DriverStats {
    pub frames_ok: BTreeMap<FrameKind, u64>,
    pub frames_error: BTreeMap<WireErrorKind, u64>,
    pub last_sequence: BTreeMap<FrameKind, u32>,
    pub sequence_gaps: u64,
    pub bytes_received: u64,
}

impl DriverStats {
    pub fn ok(&self, kind: FrameKind) -> u64 {
        self.frames_ok.get(&kind).copied().unwrap_or(0)
    }

    pub fn errors(&self, kind: WireErrorKind) -> u64 {
        self.frames_error.get(&kind).copied().unwrap_or(0)
    }

    pub fn total_ok(&self) -> u64 {
        self.frames_ok.values().sum()
    }

    pub fn total_errors(&self) -> u64 {
        self.frames_error.values().sum()
    }

    pub fn datagrams(&self) -> u64 {
        self.total_ok() + self.total_errors()
    }

    fn record_ok(&mut self, payload: &FramePayload) {
        let kind = payload.kind();
        *self.frames_ok.entry(kind).or_default() += 1;
        if let Some(seq) = payload.sequence_counter() {
            if let Some(last) = self.last_sequence.insert(kind, seq) {
                if seq != last.wrapping_add(1) {
                    self.sequence_gaps += 1;
                    debug!("{} sequence jump {last} -> {seq}", kind.name());
                }
            }
        }
    }

    fn record_error(&mut self, e: &WireError) {
        *self.frames_error.entry(e.kind()).or_default() += 1;
    }

    /// `key=value` lines, one counter per line, stable order.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for kind in FrameKind::ALL {
            let _ = writeln!(out, "frames_ok.{}={}", kind.name(), self.ok(kind));
        }
        for kind in WireErrorKind::ALL {
            let _ = writeln!(out, "frames_error.{}={}", kind.name(), self.errors(kind));
        }
        for (kind, seq) in &self.last_sequence {
            let _ = writeln!(out, "last_sequence.{}={}", kind.name(), seq);
        }
        let _ = writeln!(out, "sequence_gaps={}", self.sequence_gaps);
        let _ = writeln!(out, "bytes_received={}", self.bytes_received);
        out
    }
}

/// Socket-free decode, stamp and bookkeeping for one datagram at a time.
#[derive(Debug, Clone, Default)]
pub struct Driver {
    pub policy: StampPolicy,
    stats: DriverStats,
}

impl Driver {
    pub fn new(policy: StampPolicy) -> Self {
        Driver { policy, stats: DriverStats::default() }
    }

    pub fn stats(&self) -> &DriverStats {
        &self.stats
    }

    pub fn into_stats(self) -> DriverStats {
        self.stats
    }

    pub fn handle_datagram(&mut self, bytes: &[u8], recv_time: RecvTime, source: SocketAddr) -> Result<Frame, WireError> {
        self.stats.bytes_received += bytes.len() as u64;
        match codec::decode_frame(bytes, recv_time, source) {
            Ok(frame) => {
                self.stats.record_ok(&frame.payload);
                Ok(apply_stamp_policy(frame, self.policy))
            }
            Err(e) => {
                self.stats.record_error(&e);
                warn!("dropping datagram from {source} ({} bytes): {e}", bytes.len());
                Err(e)
            }
        }
    }
}

/// Consumer of decoded frames; runs on the receive loop's thread.
pub trait FrameSink {
    fn on_frame(&mut self, frame: Frame);

    /// Raw datagram tap, called before decoding.
    fn on_datagram(&mut self, _bytes: &[u8], _recv_time: RecvTime, _source: SocketAddr) {}
}

impl<F: FnMut(Frame)> FrameSink for F {
    fn on_frame(&mut self, frame: Frame) {
        self(frame)
    }
}

fn open_data_socket(cfg: &TransportConfig) -> Result<UdpSocket, TransportError> {
    let socket = Socket::new(Domain::IPV4, Type::DGRAM, Some(Protocol::UDP)).map_err(io_err("create socket"))?;
    socket.set_reuse_address(true).map_err(io_err("SO_REUSEADDR"))?;
    if let Err(e) = socket.set_recv_buffer_size(RECV_BUFFER_BYTES) {
        debug!("could not enlarge receive buffer: {e}");
    }
    let iface = cfg.interface_address.unwrap_or(Ipv4Addr::UNSPECIFIED);
    let bind_ip = match cfg.multicast_group {
        Some(_) => Ipv4Addr::UNSPECIFIED,
        None => iface,
    };
    let bind = SocketAddrV4::new(bind_ip, cfg.listen_port);
    socket.bind(&bind.into()).map_err(io_err(format!("bind {bind}")))?;
    if let Some(group) = cfg.multicast_group {
        socket
            .join_multicast_v4(&group, &iface)
            .map_err(io_err(format!("join {group} on {iface}")))?;
    }
    let socket: UdpSocket = socket.into();
    socket.set_read_timeout(Some(POLL_INTERVAL)).map_err(io_err("set read timeout"))?;
    Ok(socket)
}

pub struct Receiver {
    socket: UdpSocket,
    driver: Driver,
    buf: Vec<u8>,
}

impl Receiver {
    pub fn bind(cfg: &TransportConfig) -> Result<Self, TransportError> {
        cfg.validate()?;
        Ok(Receiver {
            socket: open_data_socket(cfg)?,
            driver: Driver::new(cfg.stamp_policy),
            buf: vec![0; DATAGRAM_BUFFER],
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.socket.local_addr()
    }

    pub fn stats(&self) -> &DriverStats {
        self.driver.stats()
    }

    /// Waits up to the poll interval for one datagram. Returns `Ok(false)` on
    /// timeout.
    pub fn poll<S: FrameSink + ?Sized>(&mut self, sink: &mut S) -> io::Result<bool> {
        let (n, source) = match self.socket.recv_from(&mut self.buf) {
            Ok(r) => r,
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => return Ok(false),
            Err(e) if e.kind() == io::ErrorKind::ConnectionRefused => return Ok(false),
            Err(e) => return Err(e),
        };
        let recv_time = RecvTime::now();
        let bytes = &self.buf[..n];
        sink.on_datagram(bytes, recv_time, source);
        if let Ok(frame) = self.driver.handle_datagram(bytes, recv_time, source) {
            sink.on_frame(frame);
        }
        Ok(true)
    }

    /// Receives until `stop` is raised.
    pub fn run<S: FrameSink + ?Sized>(mut self, sink: &mut S, stop: &AtomicBool) -> Result<DriverStats, TransportError> {
        while !stop.load(Ordering::SeqCst) {
            self.poll(sink).map_err(io_err("receive"))?;
        }
        Ok(self.driver.into_stats())
    }
}

pub fn run_receiver<S: FrameSink + ?Sized>(cfg: &TransportConfig, sink: &mut S, stop: &AtomicBool) -> Result<DriverStats, TransportError> {
    Receiver::bind(cfg)?.run(sink, stop)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigOutcome {
    /// A status frame echoed every requested value.
    Confirmed(SensorStatus),
    /// No status frame arrived before the timeout.
    Unconfirmed,
    /// Status frames arrived, but none echoed the request; holds the last one.
    Mismatch(SensorStatus),
}

impl ConfigOutcome {
    pub fn label(&self) -> &'static str {
        match self {
            ConfigOutcome::Confirmed(_) => "CONFIRMED",
            ConfigOutcome::Unconfirmed => "UNCONFIRMED",
            ConfigOutcome::Mismatch(_) => "MISMATCH",
        }
    }
}

/// Validates, encodes and sends a configuration frame to the sensor.
pub fn send_configuration_frame(cfg: &TransportConfig, conf: &SensorConfiguration) -> Result<usize, TransportError> {
    let bytes = codec::encode_configuration(conf).map_err(TransportError::Rejected)?;
    let local = SocketAddrV4::new(cfg.interface_address.unwrap_or(Ipv4Addr::UNSPECIFIED), 0);
    let socket = UdpSocket::bind(local).map_err(io_err(format!("bind {local}")))?;
    let dest = cfg.config_endpoint();
    socket.send_to(&bytes, dest).map_err(io_err(format!("send to {dest}")))
}

/// Waits until a status from `next_status` echoes `conf` or `timeout` elapses.
/// `next_status` receives the remaining time budget.
pub fn await_confirmation(
    conf: &SensorConfiguration,
    timeout: Duration,
    mut next_status: impl FnMut(Duration) -> Option<SensorStatus>,
) -> ConfigOutcome {
    let deadline = Instant::now() + timeout;
    let mut last = None;
    while let Some(left) = deadline.checked_duration_since(Instant::now()).filter(|d| !d.is_zero()) {
        if let Some(status) = next_status(left) {
            if status.echoes(conf) {
                return ConfigOutcome::Confirmed(status);
            }
            last = Some(status);
        }
    }
    match last {
        Some(s) => ConfigOutcome::Mismatch(s),
        None => ConfigOutcome::Unconfirmed,
    }
}

/// Sends `conf` and confirms it against status frames received on the data
/// port. Use [`send_configuration_frame`] with [`await_confirmation`] when a
/// receiver already owns the data port.
pub fn send_configuration(cfg: &TransportConfig, conf: &SensorConfiguration) -> Result<ConfigOutcome, TransportError> {
    conf.validate().map_err(|e| TransportError::Rejected(e.into()))?;
    cfg.validate()?;
    let mut receiver = Receiver::bind(cfg)?;
    send_configuration_frame(cfg, conf)?;
    let mut io_failure = None;
    let outcome = await_confirmation(conf, ACK_TIMEOUT, |_| {
        let mut status = None;
        let mut sink = |f: Frame| {
            if let FramePayload::Status(s) = f.payload {
                status = Some(s);
            }
        };
        if let Err(e) = receiver.poll(&mut sink) {
            io_failure.get_or_insert(e);
        }
        status
    });
    match io_failure {
        Some(e) => Err(io_err("receive status")(e)),
        None => Ok(outcome),
    }
}
