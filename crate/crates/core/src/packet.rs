use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::time::SimTime;

/// The two-bit ECN field of the IP header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EcnCodepoint {
    /// `00`: not ECN-capable.
    NotEct,
    /// `10`: ECN-capable, classic semantics.
    Ect0,
    /// `01`: ECN-capable, L4S semantics.
    Ect1,
    /// `11`: congestion experienced.
    Ce,
}

impl EcnCodepoint {
    pub fn bits(self) -> u8 {
        match self {
            EcnCodepoint::NotEct => 0b00,
            EcnCodepoint::Ect1 => 0b01,
            EcnCodepoint::Ect0 => 0b10,
            EcnCodepoint::Ce => 0b11,
        }
    }

    pub fn from_bits(bits: u8) -> Option<Self> {
        match bits {
            0b00 => Some(EcnCodepoint::NotEct),
            0b01 => Some(EcnCodepoint::Ect1),
            0b10 => Some(EcnCodepoint::Ect0),
            0b11 => Some(EcnCodepoint::Ce),
            _ => None,
        }
    }

    pub fn is_ect(self) -> bool {
        matches!(self, EcnCodepoint::Ect0 | EcnCodepoint::Ect1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FlowId(pub u32);

impl fmt::Display for FlowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl FromStr for FlowId {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(FlowId)
    }
}

/// One emulated packet. Payloads are not modelled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub id: u64,
    pub flow: FlowId,
    pub size: u32,
    pub ecn: EcnCodepoint,
    pub created_at: SimTime,
    /// Stamped by the AQM on admission.
    pub enqueued_at: Option<SimTime>,
    pub seq: u64,
}

impl Packet {
    pub fn new(
        id: u64,
        flow: FlowId,
        seq: u64,
        size: u32,
        ecn: EcnCodepoint,
        now: SimTime,
    ) -> Self {
        debug_assert!(size > 0, "zero-sized packet");
        Packet {
            id,
            flow,
            size,
            ecn,
            created_at: now,
            enqueued_at: None,
            seq,
        }
    }

    /// Time spent queued as of `now`; zero if never enqueued.
    pub fn sojourn_nanos(&self, now: SimTime) -> u64 {
        self.enqueued_at.map_or(0, |t| now.nanos_since(t))
    }
}
