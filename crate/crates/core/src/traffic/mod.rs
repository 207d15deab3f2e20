//! Closed-loop senders and receivers.
//!
//! Senders are window limited and always have data. They inject MTU-sized
//! packets carrying a fixed ECN codepoint and react to per-packet ACKs that
//! echo CE marks and report losses detected at the receiver. Lost data is
//! not retransmitted; throughput is what reaches the receiver.

mod classic;
mod receiver;
mod scalable;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use classic::{cubic_k, cubic_window, ClassicSender, ClassicVariant, CUBIC_BETA, CUBIC_C};
pub use receiver::{Ack, Receiver, LOSS_THRESHOLD};
pub use scalable::{ScalableSender, DCTCP_G};

use crate::aqm::MTU;
use crate::error::{Error, Result};
use crate::packet::{EcnCodepoint, FlowId, Packet};
use crate::time::SimTime;

pub const INITIAL_CWND: f64 = 10.0;
pub const MIN_RTO: Duration = Duration::from_millis(200);
const INITIAL_RTO: Duration = Duration::from_secs(1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowKind {
    Scalable,
    Reno,
    Cubic,
}

impl FlowKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FlowKind::Scalable => "scalable",
            FlowKind::Reno => "reno",
            FlowKind::Cubic => "cubic",
        }
    }

    pub fn ecn(self) -> EcnCodepoint {
        match self {
            FlowKind::Scalable => EcnCodepoint::Ect1,
            FlowKind::Reno | FlowKind::Cubic => EcnCodepoint::Ect0,
        }
    }
}

impl fmt::Display for FlowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FlowKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scalable" => Ok(FlowKind::Scalable),
            "reno" => Ok(FlowKind::Reno),
            "cubic" => Ok(FlowKind::Cubic),
            other => Err(Error::config(format!("unknown flow kind {other:?}"))),
        }
    }
}

/// Smoothed RTT and variance in the usual 1/8, 1/4 style.
#[derive(Debug, Clone, Copy, Default)]
pub struct RttEstimator {
    srtt_s: Option<f64>,
    rttvar_s: f64,
    min_rtt_s: f64,
}

impl RttEstimator {
    pub fn update(&mut self, sample_s: f64) {
        match self.srtt_s {
            None => {
                self.srtt_s = Some(sample_s);
                self.rttvar_s = sample_s / 2.0;
                self.min_rtt_s = sample_s;
            }
            Some(srtt) => {
                self.rttvar_s = 0.75 * self.rttvar_s + 0.25 * (srtt - sample_s).abs();
                self.srtt_s = Some(0.875 * srtt + 0.125 * sample_s);
                self.min_rtt_s = self.min_rtt_s.min(sample_s);
            }
        }
    }

    pub fn srtt_s(&self) -> Option<f64> {
        self.srtt_s
    }

    pub fn min_rtt_s(&self) -> Option<f64> {
        self.srtt_s.map(|_| self.min_rtt_s)
    }

    pub fn rto(&self) -> Duration {
        match self.srtt_s {
            None => INITIAL_RTO,
            Some(srtt) => Duration::from_secs_f64(srtt + 4.0 * self.rttvar_s).max(MIN_RTO),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Controller {
    Scalable(ScalableSender),
    Classic(ClassicSender),
}

impl Controller {
    pub fn for_kind(kind: FlowKind) -> Self {
        match kind {
            FlowKind::Scalable => Controller::Scalable(ScalableSender::new(INITIAL_CWND)),
            FlowKind::Reno => {
                Controller::Classic(ClassicSender::new(ClassicVariant::Reno, INITIAL_CWND))
            }
            FlowKind::Cubic => {
                Controller::Classic(ClassicSender::new(ClassicVariant::Cubic, INITIAL_CWND))
            }
        }
    }

    pub fn cwnd(&self) -> f64 {
        match self {
            Controller::Scalable(s) => s.cwnd(),
            Controller::Classic(c) => c.cwnd(),
        }
    }
}

/// Sender-side flow state shared by all congestion controllers.
#[derive(Debug, Clone)]
pub struct Sender {
    flow: FlowId,
    kind: FlowKind,
    cc: Controller,
    next_seq: u64,
    inflight: u64,
    recover_seq: u64,
    rtt: RttEstimator,
    last_progress: SimTime,
    stop_at: Option<SimTime>,
    packets_sent: u64,
    reductions: u64,
    timeouts: u64,
}

impl Sender {
    pub fn new(flow: FlowId, kind: FlowKind, stop_at: Option<SimTime>) -> Self {
        Sender {
            flow,
            kind,
            cc: Controller::for_kind(kind),
            next_seq: 0,
            inflight: 0,
            recover_seq: 0,
            rtt: RttEstimator::default(),
            last_progress: SimTime::ZERO,
            stop_at,
            packets_sent: 0,
            reductions: 0,
            timeouts: 0,
        }
    }

    pub fn flow(&self) -> FlowId {
        self.flow
    }

    pub fn kind(&self) -> FlowKind {
        self.kind
    }

    pub fn controller(&self) -> &Controller {
        &self.cc
    }

    pub fn cwnd(&self) -> f64 {
        self.cc.cwnd()
    }

    pub fn inflight(&self) -> u64 {
        self.inflight
    }

    pub fn packets_sent(&self) -> u64 {
        self.packets_sent
    }

    /// Decreases gated by the once-per-RTT recovery point: losses for every
    /// controller, CE marks for classic ones.
    pub fn reductions(&self) -> u64 {
        self.reductions
    }

    pub fn timeouts(&self) -> u64 {
        self.timeouts
    }

    pub fn rtt(&self) -> &RttEstimator {
        &self.rtt
    }

    /// Emits packets while the in-flight count is below `cwnd`.
    ///
    /// `next_id` supplies globally unique packet ids.
    pub fn pump(&mut self, now: SimTime, next_id: &mut u64, out: &mut Vec<Packet>) {
        if self.stop_at.is_some_and(|stop| now >= stop) {
            return;
        }
        if self.inflight == 0 {
            self.last_progress = now;
        }
        let ecn = self.kind.ecn();
        while (self.inflight as f64) < self.cwnd() {
            out.push(Packet::new(
                *next_id,
                self.flow,
                self.next_seq,
                MTU,
                ecn,
                now,
            ));
            *next_id += 1;
            self.next_seq += 1;
            self.inflight += 1;
            self.packets_sent += 1;
        }
    }

    pub fn on_ack(&mut self, now: SimTime, ack: &Ack) {
        self.inflight = self.inflight.saturating_sub(1 + ack.lost);
        self.last_progress = now;
        self.rtt.update(now.nanos_since(ack.sent_at) as f64 * 1e-9);
        let now_s = now.as_secs_f64();

        if ack.lost_max_seq.is_some_and(|s| s >= self.recover_seq) {
            match &mut self.cc {
                Controller::Scalable(s) => s.on_loss(),
                Controller::Classic(c) => c.on_congestion(now_s),
            }
            self.enter_recovery();
        }

        match &mut self.cc {
            Controller::Scalable(s) => s.on_ack(ack.seq, ack.ce, self.next_seq),
            Controller::Classic(c) => {
                if ack.seq >= self.recover_seq {
                    if ack.ce {
                        c.on_congestion(now_s);
                        self.reductions += 1;
                        self.recover_seq = self.next_seq;
                    } else {
                        let rtt = self.rtt.srtt_s().unwrap_or(0.0);
                        c.on_ack(now_s, rtt);
                    }
                }
            }
        }
    }

    fn enter_recovery(&mut self) {
        self.reductions += 1;
        self.recover_seq = self.next_seq;
    }

    /// When the retransmission timer would fire, if anything is in flight.
    pub fn rto_deadline(&self) -> Option<SimTime> {
        (self.inflight > 0).then(|| {
            SimTime::from_nanos(
                self.last_progress
                    .as_nanos()
                    .saturating_add(self.rtt.rto().as_nanos() as u64),
            )
        })
    }

    /// Fires the timer if it has expired: everything in flight is presumed
    /// lost and the window collapses to one packet.
    pub fn on_rto(&mut self, now: SimTime) -> bool {
        match self.rto_deadline() {
            Some(deadline) if deadline <= now => {
                self.inflight = 0;
                self.timeouts += 1;
                self.recover_seq = self.next_seq;
                self.last_progress = now;
                match &mut self.cc {
                    Controller::Scalable(s) => s.on_timeout(),
                    Controller::Classic(c) => c.on_timeout(),
                }
                true
            }
            _ => false,
        }
    }
}
