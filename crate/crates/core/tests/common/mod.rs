#![allow(dead_code)]

pub mod golden;

use std::net::UdpSocket;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use ars548::simulator::Scenario;
use ars548::transport::{DriverStats, Receiver, TransportConfig};
use ars548::Frame;

/// A currently unused localhost UDP port.
pub fn free_udp_port() -> u16 {
    UdpSocket::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

pub fn two_cars(duration: f64) -> Scenario {
    Scenario::from_toml(&format!(
        r#"
duration = {duration}
cycle_rate = 20.0
seed = 11

[detection_noise]
range = 0.1
azimuth = 0.002

[[objects]]
position = [40.0, -3.5, 0.5]
velocity = [-13.9, 0.0]
classification = "CAR"
detections_per_cycle = 4

[[objects]]
position = [15.0, 4.0, 0.0]
velocity = [1.0, 0.5]
classification = "PEDESTRIAN"
detections_per_cycle = 2
"#
    ))
    .unwrap()
}

/// A receiver running on its own thread, collecting every decoded frame.
pub struct Collector {
    pub port: u16,
    pub frames: Arc<Mutex<Vec<Frame>>>,
    stop: Arc<AtomicBool>,
    handle: JoinHandle<DriverStats>,
}

impl Collector {
    pub fn start(cfg: TransportConfig) -> Self {
        let port = cfg.listen_port;
        let mut receiver = Receiver::bind(&cfg).unwrap();
        let frames = Arc::new(Mutex::new(Vec::new()));
        let stop = Arc::new(AtomicBool::new(false));
        let (f, s) = (Arc::clone(&frames), Arc::clone(&stop));
        let handle = thread::spawn(move || {
            let mut sink = |frame: Frame| f.lock().unwrap().push(frame);
            while !s.load(Ordering::SeqCst) {
                receiver.poll(&mut sink).unwrap();
            }
            receiver.stats().clone()
        });
        Collector { port, frames, stop, handle }
    }

    pub fn loopback() -> Self {
        Collector::start(TransportConfig::loopback(free_udp_port(), free_udp_port()))
    }

    pub fn count(&self) -> usize {
        self.frames.lock().unwrap().len()
    }

    /// Waits until `n` frames arrived or `timeout` elapsed.
    pub fn wait_for(&self, n: usize, timeout: Duration) {
        let deadline = Instant::now() + timeout;
        while self.count() < n && Instant::now() < deadline {
            thread::sleep(Duration::from_millis(5));
        }
    }

    pub fn finish(self) -> (Vec<Frame>, DriverStats) {
        self.stop.store(true, Ordering::SeqCst);
        let stats = self.handle.join().unwrap();
        let frames = std::mem::take(&mut *self.frames.lock().unwrap());
        (frames, stats)
    }
}
