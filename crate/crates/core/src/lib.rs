//! Deterministic user-space emulator for a dual-queue coupled AQM (DualPI2).
//!
//! The crate is organised the way the AQM itself decomposes:
//!
//! * [`aqm`] holds the classifier, the two FIFO queues, the PI² controller,
//!   the step AQM for the low-latency queue and a pluggable scheduler.
//! * [`link`] turns delivery traces (or a smooth constant-rate server) into
//!   dequeue opportunities, and models fixed one-way delays.
//! * [`traffic`] contains closed-loop sender/receiver models: a DCTCP-style
//!   scalable sender and Reno/Cubic classic senders.
//! * [`metrics`] samples the AQM every `tupdate` and exports run records.
//! * [`sim`] binds everything together in a single ordered event loop.
//! * [`scenario`] parses scenario files and resolves named presets.

pub mod aqm;
pub mod error;
pub mod link;
pub mod metrics;
pub mod packet;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod time;
pub mod traffic;

pub use error::{Error, Result};
pub use packet::{EcnCodepoint, FlowId, Packet};
pub use rng::SimRng;
pub use time::SimTime;
