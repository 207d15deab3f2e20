use serde::{Deserialize, Serialize};

/// Cubic scaling constant, in packets / s³.
pub const CUBIC_C: f64 = 0.4;
/// Cubic multiplicative decrease factor.
pub const CUBIC_BETA: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassicVariant {
    Reno,
    Cubic,
}

/// `K = cbrt(w_max * (1 - beta) / C)`, the time to regain `w_max`.
pub fn cubic_k(w_max: f64) -> f64 {
    (w_max * (1.0 - CUBIC_BETA) / CUBIC_C).cbrt()
}

/// `W(t) = C * (t - K)^3 + w_max`, with `t` in seconds since the epoch.
pub fn cubic_window(t: f64, w_max: f64, k: f64) -> f64 {
    CUBIC_C * (t - k).powi(3) + w_max
}

/// Reno-equivalent window `t` seconds into a Cubic epoch.
fn reno_friendly_window(t: f64, w_max: f64, rtt: f64) -> f64 {
    w_max * CUBIC_BETA + 3.0 * (1.0 - CUBIC_BETA) / (1.0 + CUBIC_BETA) * (t / rtt)
}

#[derive(Debug, Clone, Copy)]
struct CubicEpoch {
    start_s: f64,
    origin: f64,
    k: f64,
}

/// Loss/CE-driven Reno or Cubic controller. Windows are in packets.
#[derive(Debug, Clone)]
pub struct ClassicSender {
    variant: ClassicVariant,
    cwnd: f64,
    ssthresh: f64,
    w_max: f64,
    epoch: Option<CubicEpoch>,
}

impl ClassicSender {
    pub fn new(variant: ClassicVariant, initial_cwnd: f64) -> Self {
        ClassicSender {
            variant,
            cwnd: initial_cwnd.max(1.0),
            ssthresh: f64::INFINITY,
            w_max: 0.0,
            epoch: None,
        }
    }

    pub fn variant(&self) -> ClassicVariant {
        self.variant
    }

    pub fn cwnd(&self) -> f64 {
        self.cwnd
    }

    pub fn ssthresh(&self) -> f64 {
        self.ssthresh
    }

    pub fn w_max(&self) -> f64 {
        self.w_max
    }

    pub fn in_slow_start(&self) -> bool {
        self.cwnd < self.ssthresh
    }

    /// Window growth for one acknowledged packet at `now_s` seconds.
    pub fn on_ack(&mut self, now_s: f64, rtt_s: f64) {
        if self.in_slow_start() {
            self.cwnd += 1.0;
            return;
        }
        match self.variant {
            ClassicVariant::Reno => self.cwnd += 1.0 / self.cwnd,
            ClassicVariant::Cubic => {
                let epoch = *self.epoch.get_or_insert_with(|| {
                    if self.w_max <= self.cwnd {
                        CubicEpoch {
                            start_s: now_s,
                            origin: self.cwnd,
                            k: 0.0,
                        }
                    } else {
                        CubicEpoch {
                            start_s: now_s,
                            origin: self.w_max,
                            k: cubic_k(self.w_max),
                        }
                    }
                });
                let t = now_s - epoch.start_s;
                let mut target = cubic_window(t, epoch.origin, epoch.k);
                if rtt_s > 0.0 {
                    target = target.max(reno_friendly_window(t, epoch.origin, rtt_s));
                }
                if target > self.cwnd {
                    self.cwnd += (target - self.cwnd) / self.cwnd;
                } else {
                    self.cwnd += 0.01 / self.cwnd;
                }
            }
        }
    }

    /// Multiplicative decrease on CE or loss. The caller applies it at most
    /// once per RTT.
    pub fn on_congestion(&mut self, now_s: f64) {
        match self.variant {
            ClassicVariant::Reno => {
                self.cwnd = (self.cwnd / 2.0).max(1.0);
            }
            ClassicVariant::Cubic => {
                self.w_max = self.cwnd;
                self.cwnd = (self.cwnd * CUBIC_BETA).max(1.0);
                self.epoch = Some(CubicEpoch {
                    start_s: now_s,
                    origin: self.w_max,
                    k: cubic_k(self.w_max),
                });
            }
        }
        self.ssthresh = self.cwnd;
    }

    pub fn on_timeout(&mut self) {
        self.w_max = self.cwnd;
        self.ssthresh = (self.cwnd / 2.0).max(2.0);
        self.cwnd = 1.0;
        self.epoch = None;
    }
}
