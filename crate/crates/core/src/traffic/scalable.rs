/// EWMA gain for the marked fraction.
pub const DCTCP_G: f64 = 1.0 / 16.0;

/// DCTCP-style scalable congestion controller.
///
/// Feedback is aggregated over observation windows of one RTT (everything
/// sent before the window started has been acknowledged). At the end of
/// each window the marked-fraction EWMA is updated and, if any CE mark was
/// seen, the window shrinks by `ewma / 2`. Between reductions the window
/// grows by `1 / cwnd` per ACK, i.e. one packet per RTT.
#[derive(Debug, Clone)]
pub struct ScalableSender {
    cwnd: f64,
    ssthresh: f64,
    marked_frac_ewma: f64,
    window_end: u64,
    window_acked: u64,
    window_ce: u64,
}

impl ScalableSender {
    pub fn new(initial_cwnd: f64) -> Self {
        ScalableSender {
            cwnd: initial_cwnd.max(1.0),
            ssthresh: f64::INFINITY,
            marked_frac_ewma: 1.0,
            window_end: 0,
            window_acked: 0,
            window_ce: 0,
        }
    }

    pub fn cwnd(&self) -> f64 {
        self.cwnd
    }

    pub fn marked_frac_ewma(&self) -> f64 {
        self.marked_frac_ewma
    }

    pub fn in_slow_start(&self) -> bool {
        self.cwnd < self.ssthresh
    }

    /// Closes one observation window with `acked` packets, `ce` of them marked.
    pub fn end_window(&mut self, acked: u64, ce: u64) {
        debug_assert!(ce <= acked);
        if acked > 0 {
            let frac = ce as f64 / acked as f64;
            self.marked_frac_ewma = (1.0 - DCTCP_G) * self.marked_frac_ewma + DCTCP_G * frac;
        }
        if ce > 0 {
            self.reduce();
        }
    }

    fn reduce(&mut self) {
        self.cwnd = (self.cwnd * (1.0 - self.marked_frac_ewma / 2.0)).max(1.0);
        self.ssthresh = self.cwnd;
    }

    /// Per-packet feedback. `next_seq` is the next sequence number the
    /// sender will use and delimits the following window.
    pub fn on_ack(&mut self, seq: u64, ce: bool, next_seq: u64) {
        self.window_acked += 1;
        self.window_ce += u64::from(ce);
        if self.in_slow_start() {
            if ce {
                // Leave slow start on the first mark and restart the window.
                self.reduce();
                self.start_window(next_seq);
                return;
            }
            self.cwnd += 1.0;
        } else {
            self.cwnd += 1.0 / self.cwnd;
        }
        if seq >= self.window_end {
            self.end_window(self.window_acked, self.window_ce);
            self.start_window(next_seq);
        }
    }

    fn start_window(&mut self, next_seq: u64) {
        self.window_end = next_seq;
        self.window_acked = 0;
        self.window_ce = 0;
    }

    /// Loss response: halve once; the caller limits this to once per RTT.
    pub fn on_loss(&mut self) {
        self.cwnd = (self.cwnd / 2.0).max(1.0);
        self.ssthresh = self.cwnd;
    }

    pub fn on_timeout(&mut self) {
        self.ssthresh = (self.cwnd / 2.0).max(2.0);
        self.cwnd = 1.0;
    }
}
