//! Driver toolkit for the Continental ARS 548 RDI long-range radar.
//!
//! - [`model`]: frame and configuration types, kinematic helpers, stamp policy
//! - [`codec`]: byte-exact encode/decode of the UDP frames
//! - [`transport`]: receive loop, driver statistics, configuration sender
//! - [`filter`]: composable object/detection predicates
//! - [`cloud`]: point-cloud and pose conversion, CSV/PCD/JSONL export
//! - [`simulator`]: scenario-driven sensor emulator
//! - [`recorder`]: raw datagram log capture and timed replay

pub mod cloud;
pub mod codec;
pub mod filter;
pub mod model;
pub mod recorder;
pub mod simulator;
#[cfg(feature = "net")]
pub mod transport;

pub use codec::{decode_frame, encode_frame, WireError};
pub use model::*;
