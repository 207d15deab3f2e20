//! Schedulers arbitrating between the C and L queues.

use super::QueueId;

/// Chooses which queue to serve next.
///
/// `select` is called with the current queue lengths; `commit` is called
/// only if the selected head packet actually leaves the AQM (classic drops
/// do not count as service).
pub trait DualQueueScheduler: std::fmt::Debug + Send {
    fn select(&mut self, c_len: usize, l_len: usize) -> Option<QueueId>;

    fn commit(&mut self, served: QueueId, bytes: u32, other_backlogged: bool);
}

/// Credit-based weighted round robin, as used by the Linux qdisc.
///
/// The L queue has priority while the credit is non-positive. Serving L
/// while C is backlogged earns `w_c * len` credit; serving C while L is
/// backlogged spends `w_l * len`. With both queues saturated the C byte
/// share therefore converges to `w_c / (w_c + w_l)`.
#[derive(Debug, Clone)]
pub struct WrrScheduler {
    w_c: i64,
    w_l: i64,
    init: i64,
    credit: i64,
}

/// Weights are integers in units of 1/WEIGHT_SCALE.
const WEIGHT_SCALE: i64 = 10_000;

impl WrrScheduler {
    pub fn new(classic_protection: f64, mtu: u32) -> Self {
        let w_c = (classic_protection * WEIGHT_SCALE as f64).round() as i64;
        let w_l = WEIGHT_SCALE - w_c;
        let init = i64::from(mtu) * (w_c - w_l);
        WrrScheduler {
            w_c,
            w_l,
            init,
            credit: init,
        }
    }

    pub fn credit(&self) -> i64 {
        self.credit
    }
}

impl DualQueueScheduler for WrrScheduler {
    fn select(&mut self, c_len: usize, l_len: usize) -> Option<QueueId> {
        if l_len > 0 && (c_len == 0 || self.credit <= 0) {
            Some(QueueId::L4s)
        } else if c_len > 0 {
            Some(QueueId::Classic)
        } else {
            self.credit = self.init;
            None
        }
    }

    fn commit(&mut self, served: QueueId, bytes: u32, other_backlogged: bool) {
        if !other_backlogged {
            return;
        }
        match served {
            QueueId::L4s => self.credit += self.w_c * i64::from(bytes),
            QueueId::Classic => self.credit -= self.w_l * i64::from(bytes),
        }
    }
}

/// Strict L-over-C priority; starves C under L saturation.
#[derive(Debug, Default, Clone, Copy)]
pub struct StrictPriority;

impl DualQueueScheduler for StrictPriority {
    fn select(&mut self, c_len: usize, l_len: usize) -> Option<QueueId> {
        if l_len > 0 {
            Some(QueueId::L4s)
        } else if c_len > 0 {
            Some(QueueId::Classic)
        } else {
            None
        }
    }

    fn commit(&mut self, _served: QueueId, _bytes: u32, _other_backlogged: bool) {}
}
