//! Raw datagram capture and timed replay.
//!
//! Log file layout (all integers big-endian):
//!
//! ```text
//! file header   magic "ARS548LOG\0" (10 bytes), version u16 = 1
//! record        recv_time_ns u64, source ipv4 u32, source port u16,
//!               length u32, payload[length]
//! ```
//!
//! Records are appended in arrival order; a reader recovers every complete
//! record of a truncated file.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::net::{Ipv4Addr, SocketAddr, SocketAddrV4};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::thread;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

pub const MAGIC: &[u8; 10] = b"ARS548LOG\0";
pub const VERSION: u16 = 1;
pub const FILE_HEADER_LEN: usize = 12;
pub const RECORD_HEADER_LEN: usize = 8 + 4 + 2 + 4;
/// Larger lengths cannot come from a UDP datagram and mark a corrupt record.
pub const MAX_RECORD_PAYLOAD: u32 = 65535;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogRecord {
    /// Nanoseconds since the Unix epoch.
    pub recv_time_ns: u64,
    pub source: SocketAddrV4,
    pub payload: Vec<u8>,
}

impl LogRecord {
    /// IPv6 sources are stored as `0.0.0.0` with their port.
    pub fn new(recv_time: SystemTime, source: SocketAddr, payload: Vec<u8>) -> Self {
        let recv_time_ns = recv_time.duration_since(UNIX_EPOCH).unwrap_or_default().as_nanos() as u64;
        let source = match source {
            SocketAddr::V4(v4) => v4,
            SocketAddr::V6(v6) => SocketAddrV4::new(Ipv4Addr::UNSPECIFIED, v6.port()),
        };
        LogRecord { recv_time_ns, source, payload }
    }

    pub fn length(&self) -> u32 {
        self.payload.len() as u32
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("i/o error at byte {offset}: {source}")]
    Io { offset: u64, source: io::Error },
    #[error("not an ARS548 log: bad magic at byte {offset}")]
    BadMagic { offset: u64 },
    #[error("unsupported log version {version} at byte {offset}")]
    UnsupportedVersion { offset: u64, version: u16 },
    #[error("record at byte {offset} declares {length} payload bytes")]
    Oversized { offset: u64, length: u32 },
    #[error("truncated record at byte {offset}; last complete record index: {}", last_complete.map_or("none".to_string(), |i| i.to_string()))]
    Truncated { offset: u64, last_complete: Option<u64> },
}

pub struct LogWriter<W: Write> {
    inner: W,
    count: u64,
}

impl<W: Write> LogWriter<W> {
    pub fn new(mut inner: W) -> io::Result<Self> {
        inner.write_all(MAGIC)?;
        inner.write_all(&VERSION.to_be_bytes())?;
        Ok(LogWriter { inner, count: 0 })
    }

    pub fn write_record(&mut self, rec: &LogRecord) -> io::Result<()> {
        let mut head = [0u8; RECORD_HEADER_LEN];
        head[0..8].copy_from_slice(&rec.recv_time_ns.to_be_bytes());
        head[8..12].copy_from_slice(&rec.source.ip().octets());
        head[12..14].copy_from_slice(&rec.source.port().to_be_bytes());
        head[14..18].copy_from_slice(&rec.length().to_be_bytes());
        self.inner.write_all(&head)?;
        self.inner.write_all(&rec.payload)?;
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }

    pub fn finish(mut self) -> io::Result<(W, u64)> {
        self.inner.flush()?;
        Ok((self.inner, self.count))
    }
}

impl LogWriter<BufWriter<File>> {
    pub fn create(path: &Path) -> io::Result<Self> {
        LogWriter::new(BufWriter::new(File::create(path)?))
    }
}

#[derive(Debug, thiserror::Error)]
#[error("recording to {} failed after {count} records: {source}", path.display())]
pub struct RecordError {
    pub path: PathBuf,
    pub count: u64,
    #[source]
    pub source: io::Error,
}

/// Writes `datagrams` to a new log at `path`; returns the record count.
pub fn record(datagrams: impl IntoIterator<Item = LogRecord>, path: &Path) -> Result<u64, RecordError> {
    let fail = |count, source| RecordError { path: path.to_path_buf(), count, source };
    let mut writer = LogWriter::create(path).map_err(|e| fail(0, e))?;
    for rec in datagrams {
        writer.write_record(&rec).map_err(|e| fail(writer.count(), e))?;
    }
    let n = writer.count();
    writer.finish().map(|(_, n)| n).map_err(|e| fail(n, e))
}

pub struct LogReader<R: Read> {
    inner: R,
    offset: u64,
    index: u64,
    failed: bool,
}

/// Reads until `buf` is full or EOF; returns bytes read.
fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

impl<R: Read> LogReader<R> {
    pub fn new(mut inner: R) -> Result<Self, LogError> {
        let mut head = [0u8; FILE_HEADER_LEN];
        let n = read_full(&mut inner, &mut head).map_err(|source| LogError::Io { offset: 0, source })?;
        if n < MAGIC.len() || &head[..MAGIC.len()] != MAGIC {
            return Err(LogError::BadMagic { offset: 0 });
        }
        if n < FILE_HEADER_LEN {
            return Err(LogError::Truncated { offset: MAGIC.len() as u64, last_complete: None });
        }
        let version = u16::from_be_bytes([head[10], head[11]]);
        if version != VERSION {
            return Err(LogError::UnsupportedVersion { offset: MAGIC.len() as u64, version });
        }
        Ok(LogReader { inner, offset: FILE_HEADER_LEN as u64, index: 0, failed: false })
    }

    /// Byte offset of the next record.
    pub fn offset(&self) -> u64 {
        self.offset
    }

    fn truncated(&self) -> LogError {
        LogError::Truncated { offset: self.offset, last_complete: self.index.checked_sub(1) }
    }

    fn read_record(&mut self) -> Result<Option<LogRecord>, LogError> {
        let mut head = [0u8; RECORD_HEADER_LEN];
        let io = |offset| move |source| LogError::Io { offset, source };
        let n = read_full(&mut self.inner, &mut head).map_err(io(self.offset))?;
        if n == 0 {
            return Ok(None);
        }
        if n < RECORD_HEADER_LEN {
            return Err(self.truncated());
        }
        let recv_time_ns = u64::from_be_bytes(head[0..8].try_into().unwrap());
        let ip = Ipv4Addr::new(head[8], head[9], head[10], head[11]);
        let port = u16::from_be_bytes([head[12], head[13]]);
        let length = u32::from_be_bytes(head[14..18].try_into().unwrap());
        if length > MAX_RECORD_PAYLOAD {
            return Err(LogError::Oversized { offset: self.offset, length });
        }
        let mut payload = vec![0u8; length as usize];
        let got = read_full(&mut self.inner, &mut payload).map_err(io(self.offset))?;
        if got < payload.len() {
            return Err(self.truncated());
        }
        self.offset += (RECORD_HEADER_LEN + payload.len()) as u64;
        self.index += 1;
        Ok(Some(LogRecord { recv_time_ns, source: SocketAddrV4::new(ip, port), payload }))
    }
}

impl LogReader<BufReader<File>> {
    pub fn open(path: &Path) -> Result<Self, LogError> {
        let file = File::open(path).map_err(|source| LogError::Io { offset: 0, source })?;
        LogReader::new(BufReader::new(file))
    }
}

impl<R: Read> Iterator for LogReader<R> {
    type Item = Result<LogRecord, LogError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        match self.read_record() {
            Ok(rec) => rec.map(Ok),
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }
}

/// Every complete record, plus the error that ended reading early, if any.
pub fn read_log(path: &Path) -> Result<(Vec<LogRecord>, Option<LogError>), LogError> {
    let mut records = Vec::new();
    for item in LogReader::open(path)? {
        match item {
            Ok(r) => records.push(r),
            Err(e) => return Ok((records, Some(e))),
        }
    }
    Ok((records, None))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReplaySpeed {
    /// Original inter-record gaps divided by this factor (> 0).
    Factor(f64),
    /// No pacing.
    Unlimited,
}

impl ReplaySpeed {
    pub fn factor(f: f64) -> Result<Self, String> {
        if f.is_infinite() && f > 0.0 {
            Ok(ReplaySpeed::Unlimited)
        } else if f > 0.0 && f.is_finite() {
            Ok(ReplaySpeed::Factor(f))
        } else {
            Err(format!("replay speed must be > 0, got {f}"))
        }
    }
}

impl std::str::FromStr for ReplaySpeed {
    type Err = String;

    /// A positive number, or `inf`/`max` for unpaced replay.
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "inf" | "max" | "unlimited" => Ok(ReplaySpeed::Unlimited),
            _ => ReplaySpeed::factor(s.parse::<f64>().map_err(|e| format!("bad replay speed `{s}`: {e}"))?),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplaySummary {
    pub records: u64,
    pub bytes: u64,
    pub elapsed: Duration,
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("emitting record {index} failed: {source}")]
    Emit { index: u64, source: io::Error },
}

/// Emits records in order, sleeping so each lands at
/// `start + (recv_time − first recv_time) / speed`. Stops early when `stop` is
/// raised.
pub fn replay<I, F>(records: I, speed: ReplaySpeed, mut emit: F, stop: Option<&AtomicBool>) -> Result<ReplaySummary, ReplayError>
where
    I: IntoIterator<Item = Result<LogRecord, LogError>>,
    F: FnMut(&LogRecord) -> io::Result<()>,
{
    let start = Instant::now();
    let mut first_ns = None;
    let mut summary = ReplaySummary::default();
    for rec in records {
        if stop.is_some_and(|s| s.load(Ordering::SeqCst)) {
            break;
        }
        let rec = rec?;
        let t0 = *first_ns.get_or_insert(rec.recv_time_ns);
        if let ReplaySpeed::Factor(f) = speed {
            let delta = rec.recv_time_ns.saturating_sub(t0) as f64 / f;
            let due = start + Duration::from_nanos(delta as u64);
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                thread::sleep(wait);
            }
        }
        emit(&rec).map_err(|source| ReplayError::Emit { index: summary.records, source })?;
        summary.records += 1;
        summary.bytes += rec.payload.len() as u64;
    }
    summary.elapsed = start.elapsed();
    Ok(summary)
}

/// Replays a log file to a UDP endpoint, payloads byte-identical.
#[cfg(feature = "net")]
pub fn replay_to_udp(path: &Path, target: SocketAddr, speed: ReplaySpeed, stop: Option<&AtomicBool>) -> Result<ReplaySummary, ReplayError> {
    let reader = LogReader::open(path)?;
    let local: SocketAddr = if target.is_ipv4() { "0.0.0.0:0" } else { "[::]:0" }.parse().unwrap();
    let socket = std::net::UdpSocket::bind(local).map_err(|source| ReplayError::Emit { index: 0, source })?;
    replay(reader, speed, |rec| socket.send_to(&rec.payload, target).map(|_| ()), stop)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn rec(t: u64, payload: &[u8]) -> LogRecord {
        LogRecord { recv_time_ns: t, source: SocketAddrV4::new(Ipv4Addr::new(10, 13, 1, 113), 42102), payload: payload.to_vec() }
    }

    fn encode(records: &[LogRecord]) -> Vec<u8> {
        let mut w = LogWriter::new(Vec::new()).unwrap();
        for r in records {
            w.write_record(r).unwrap();
        }
        w.finish().unwrap().0
    }

    #[test]
    fn empty_log_is_header_only() {
        let bytes = encode(&[]);
        assert_eq!(bytes.len(), 12);
        assert_eq!(&bytes[..10], b"ARS548LOG\0");
        assert_eq!(&bytes[10..], &[0, 1]);
        assert_eq!(LogReader::new(Cursor::new(bytes)).unwrap().count(), 0);
    }

    #[test]
    fn record_layout_is_big_endian() {
        let bytes = encode(&[rec(0x0102030405060708, &[0xAA, 0xBB])]);
        assert_eq!(&bytes[12..20], &[1, 2, 3, 4, 5, 6, 7, 8]);
        assert_eq!(&bytes[20..24], &[10, 13, 1, 113]);
        assert_eq!(&bytes[24..26], &42102u16.to_be_bytes());
        assert_eq!(&bytes[26..30], &[0, 0, 0, 2]);
        assert_eq!(&bytes[30..], &[0xAA, 0xBB]);
    }

    #[test]
    fn truncated_file_reports_last_complete_index() {
        let records = [rec(1, b"first"), rec(2, b"second"), rec(3, b"third")];
        let bytes = encode(&records);
        let cut = bytes.len() - 2;
        let mut reader = LogReader::new(Cursor::new(bytes[..cut].to_vec())).unwrap();
        assert_eq!(reader.next().unwrap().unwrap(), records[0]);
        assert_eq!(reader.next().unwrap().unwrap(), records[1]);
        let third_offset = reader.offset();
        match reader.next().unwrap() {
            Err(LogError::Truncated { offset, last_complete }) => {
                assert_eq!(last_complete, Some(1));
                assert_eq!(offset, third_offset);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(reader.next().is_none());
    }

    #[test]
    fn corrupt_header_and_record() {
        assert!(matches!(LogReader::new(Cursor::new(b"PCAPFILE\0\0\0\x01".to_vec())), Err(LogError::BadMagic { offset: 0 })));
        let mut bytes = encode(&[]);
        bytes[11] = 2;
        assert!(matches!(LogReader::new(Cursor::new(bytes)), Err(LogError::UnsupportedVersion { offset: 10, version: 2 })));
        let mut bytes = encode(&[rec(1, b"x")]);
        bytes[26..30].copy_from_slice(&u32::MAX.to_be_bytes());
        let err = LogReader::new(Cursor::new(bytes)).unwrap().next().unwrap().unwrap_err();
        assert!(matches!(err, LogError::Oversized { offset: 12, .. }));
        assert!(err.to_string().contains("byte 12"));
    }

    #[test]
    fn record_to_file_and_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.log");
        let records: Vec<_> = (0..5).map(|i| rec(i * 1000, &[i as u8; 7])).collect();
        assert_eq!(record(records.clone(), &path).unwrap(), 5);
        let (back, err) = read_log(&path).unwrap();
        assert!(err.is_none());
        assert_eq!(back, records);
    }

    #[test]
    fn replay_paces_by_deltas() {
        let records: Vec<_> = (0..5).map(|i| rec(i * 20_000_000, b"p")).collect();
        let mut seen = Vec::new();
        let summary = replay(records.iter().cloned().map(Ok), ReplaySpeed::Factor(2.0), |r| {
            seen.push(r.clone());
            Ok(())
        }, None)
        .unwrap();
        assert_eq!(seen, records);
        // 80 ms of recorded time at 2x.
        assert!(summary.elapsed >= Duration::from_millis(40));
        assert!(summary.elapsed < Duration::from_millis(200));
        let fast = replay(records.into_iter().map(Ok), ReplaySpeed::Unlimited, |_| Ok(()), None).unwrap();
        assert!(fast.elapsed < Duration::from_millis(20));
    }

    #[test]
    fn empty_replay_is_clean() {
        let s = replay(std::iter::empty(), ReplaySpeed::Factor(1.0), |_| Ok(()), None).unwrap();
        assert_eq!(s.records, 0);
    }

    #[test]
    fn speed_parsing() {
        assert_eq!("2".parse::<ReplaySpeed>(), Ok(ReplaySpeed::Factor(2.0)));
        assert_eq!("inf".parse::<ReplaySpeed>(), Ok(ReplaySpeed::Unlimited));
        assert!("0".parse::<ReplaySpeed>().is_err());
        assert!("-1".parse::<ReplaySpeed>().is_err());
        assert!("NaN".parse::<ReplaySpeed>().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn write_read_preserves_payloads(payloads in proptest::collection::vec(proptest::collection::vec(any::<u8>(), 0..300), 0..20)) {
                let records: Vec<_> = payloads.iter().enumerate().map(|(i, p)| rec(i as u64, p)).collect();
                let bytes = encode(&records);
                let back: Vec<_> = LogReader::new(Cursor::new(bytes)).unwrap().map(Result::unwrap).collect();
                prop_assert_eq!(back, records);
            }
        }
    }
}
