use std::net::{Ipv4Addr, SocketAddr};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ars548::filter::parse_filter_expr;
use ars548::recorder::ReplaySpeed;
use ars548::transport::{DEFAULT_CONFIG_PORT, DEFAULT_LISTEN_PORT, DEFAULT_SENSOR_ADDRESS};
use ars548::{FrequencySlot, PlugOrientation, StampPolicy};

#[derive(Debug, Parser)]
#[command(name = "ars548", version, about = "Driver toolkit for the Continental ARS 548 RDI radar")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Receive, decode and optionally filter/export sensor frames
    Listen(ListenArgs),
    /// Send a configuration request and wait for the sensor to confirm it
    Configure(ConfigureArgs),
    /// Emulate a sensor from a scenario file
    Simulate(SimulateArgs),
    /// Capture raw datagrams to a log file
    Record(RecordArgs),
    /// Re-emit a log file over UDP with the original timing
    Replay(ReplayArgs),
    /// Convert a log file to point-cloud files without any sockets
    Export(ExportArgs),
}

/// `none` disables multicast membership.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Group(pub Option<Ipv4Addr>);

fn parse_group(s: &str) -> Result<Group, String> {
    if s.eq_ignore_ascii_case("none") {
        return Ok(Group(None));
    }
    let ip: Ipv4Addr = s.parse().map_err(|e| format!("{e}"))?;
    if !ip.is_multicast() {
        return Err(format!("{ip} is not a multicast address (use `none` for unicast)"));
    }
    Ok(Group(Some(ip)))
}

#[derive(Debug, Args)]
pub struct DataPort {
    /// UDP port the sensor sends to
    #[arg(long, default_value_t = DEFAULT_LISTEN_PORT)]
    pub port: u16,
    /// Multicast group to join, or `none`
    #[arg(long, default_value = "224.0.2.2", value_parser = parse_group)]
    pub group: Group,
    /// Local interface address to bind / join on
    #[arg(long)]
    pub iface: Option<Ipv4Addr>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StampArg {
    /// Keep the sensor's own stamp
    Keep,
    /// Replace with host receive time
    Local,
}

impl From<StampArg> for StampPolicy {
    fn from(s: StampArg) -> Self {
        match s {
            StampArg::Keep => StampPolicy::KeepOriginal,
            StampArg::Local => StampPolicy::OverrideLocal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExportFormat {
    Csv,
    Pcd,
    Jsonl,
}

/// Validated at parse time; the source text is kept for logging.
fn check_filter(s: &str) -> Result<String, String> {
    parse_filter_expr(s).map(|_| s.to_string()).map_err(|e| e.to_string())
}

fn non_negative_secs(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("expected a non-negative number of seconds, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug, Args)]
pub struct ListenArgs {
    #[command(flatten)]
    pub data: DataPort,
    /// Stamp policy
    #[arg(long, value_enum, default_value_t = StampArg::Local)]
    pub stamp: StampArg,
    /// Object filter, e.g. `min_speed_kmh=10&class=CAR`
    #[arg(long, value_parser = check_filter)]
    pub filter: Option<String>,
    /// Export decoded frames as point clouds
    #[arg(long, value_enum, requires = "out")]
    pub export: Option<ExportFormat>,
    /// Output directory for exported files
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print frame counters every this many seconds (0 disables)
    #[arg(long, default_value = "0", value_parser = non_negative_secs)]
    pub stats_every: f64,
    /// Stop after this many seconds (default: until interrupted)
    #[arg(long, value_parser = non_negative_secs)]
    pub duration: Option<f64>,
}

fn plug(s: &str) -> Result<PlugOrientation, String> {
    match s.to_ascii_lowercase().as_str() {
        "0" | "left" => Ok(PlugOrientation::Left),
        "1" | "right" => Ok(PlugOrientation::Right),
        _ => Err(format!("plug orientation must be left|right|0|1, got `{s}`")),
    }
}

fn frequency_slot(s: &str) -> Result<FrequencySlot, String> {
    let n: u8 = s.parse().map_err(|_| format!("frequency slot must be 0, 1 or 2, got `{s}`"))?;
    FrequencySlot::try_from(n).map_err(|_| format!("frequency slot must be 0, 1 or 2, got {n}"))
}

#[derive(Debug, Args)]
pub struct ConfigureArgs {
    /// Sensor address the request is sent to
    #[arg(long, default_value_t = DEFAULT_SENSOR_ADDRESS)]
    pub sensor_ip: Ipv4Addr,
    /// Sensor configuration port
    #[arg(long, default_value_t = DEFAULT_CONFIG_PORT)]
    pub config_port: u16,
    /// Port on which status frames are received for confirmation
    #[arg(long, default_value_t = DEFAULT_LISTEN_PORT)]
    pub listen_port: u16,
    /// Multicast group status frames arrive on, or `none`
    #[arg(long, default_value = "224.0.2.2", value_parser = parse_group)]
    pub group: Group,
    /// Local interface address
    #[arg(long)]
    pub iface: Option<Ipv4Addr>,
    /// Maximum detection distance in meters (99..=1500)
    #[arg(long, value_parser = clap::value_parser!(u16).range(99..=1500))]
    pub max_distance: Option<u16>,
    /// RF frequency slot: 0 low, 1 mid, 2 high
    #[arg(long, value_parser = frequency_slot)]
    pub frequency_slot: Option<FrequencySlot>,
    /// Measurement cycle time in ms (50..=100)
    #[arg(long, value_parser = clap::value_parser!(u8).range(50..=100))]
    pub cycle_time: Option<u8>,
    /// Enable power saving at standstill
    #[arg(long)]
    pub powersave: Option<bool>,
    /// Mounting pose: LONGITUDINAL LATERAL VERTICAL YAW PITCH PLUG (m, rad, left|right)
    #[arg(long, num_args = 6, value_names = ["LONG", "LAT", "VERT", "YAW", "PITCH", "PLUG"], allow_negative_numbers = true)]
    pub mounting: Option<Vec<String>>,
    /// Vehicle: LENGTH WIDTH HEIGHT WHEELBASE in meters
    #[arg(long, num_args = 4, value_names = ["LENGTH", "WIDTH", "HEIGHT", "WHEELBASE"], allow_negative_numbers = true)]
    pub vehicle: Option<Vec<f32>>,
    /// New sensor IPv4 address
    #[arg(long)]
    pub new_ip: Option<Ipv4Addr>,
}

impl ConfigureArgs {
    pub fn any_radar_field(&self) -> bool {
        self.max_distance.is_some() || self.frequency_slot.is_some() || self.cycle_time.is_some() || self.powersave.is_some()
    }

    pub fn parse_mounting(&self) -> Result<Option<ars548::MountingPose>, String> {
        let Some(v) = &self.mounting else { return Ok(None) };
        let num = |i: usize| v[i].parse::<f32>().map_err(|_| format!("--mounting value `{}` is not a number", v[i]));
        Ok(Some(ars548::MountingPose {
            longitudinal: num(0)?,
            lateral: num(1)?,
            vertical: num(2)?,
            yaw: num(3)?,
            pitch: num(4)?,
            plug_orientation: plug(&v[5])?,
        }))
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario file (TOML)
    #[arg(long)]
    pub scenario: PathBuf,
    /// Destination of the emitted data frames
    #[arg(long, default_value = "127.0.0.1:42102")]
    pub target: SocketAddr,
    /// Overrides the scenario seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Listen for configuration frames on this local port
    #[arg(long)]
    pub config_port: Option<u16>,
    /// Write per-cycle ground truth as JSON lines
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
    /// Stamp frames with host time plus this offset in seconds; default uses the scenario epoch
    #[arg(long, allow_negative_numbers = true)]
    pub stamp_offset: Option<f64>,
    /// Emit cycles back to back instead of at the scenario rate
    #[arg(long)]
    pub unpaced: bool,
}

#[derive(Debug, Args)]
pub struct RecordArgs {
    #[command(flatten)]
    pub data: DataPort,
    /// Log file to write
    #[arg(long)]
    pub out: PathBuf,
    /// Stop after this many seconds (default: until interrupted)
    #[arg(long, value_parser = non_negative_secs)]
    pub duration: Option<f64>,
}

fn replay_speed(s: &str) -> Result<ReplaySpeed, String> {
    s.parse()
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Log file to replay
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Playback speed factor (> 0), or `inf` for no pacing
    #[arg(long, default_value = "1", value_parser = replay_speed)]
    pub speed: ReplaySpeed,
    /// Destination address
    #[arg(long, default_value = "127.0.0.1:42102")]
    pub target: SocketAddr,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Log file to convert
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub format: ExportFormat,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// Object filter, e.g. `min_speed_kmh=10`
    #[arg(long, value_parser = check_filter)]
    pub filter: Option<String>,
    /// `local` stamps frames with their recorded receive time
    #[arg(long, value_enum, default_value_t = StampArg::Keep)]
    pub stamp: StampArg,
}
