//! Trace-driven bottleneck link and fixed-delay elements.
//!
//! In [`LinkMode::Bursty`] the link follows a packet-delivery trace: one
//! integer millisecond timestamp per delivery opportunity, looping every
//! `repeat_period`. Each opportunity releases at most one packet of up to
//! one MTU; unused opportunities are lost. [`LinkMode::Smooth`] instead
//! serves packets back to back, spaced by their exact serialization time.

use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::aqm::{DualPi2, DualQueueScheduler, Served, MTU};
use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::time::SimTime;

/// Longest period synthesized by [`constant_rate_trace`].
pub const MAX_TRACE_PERIOD_MS: u64 = 60_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LinkMode {
    /// Millisecond-granularity delivery opportunities.
    #[default]
    Bursty,
    /// Evenly spaced per-packet service.
    Smooth,
}

impl FromStr for LinkMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bursty" => Ok(LinkMode::Bursty),
            "smooth" => Ok(LinkMode::Smooth),
            other => Err(Error::config(format!("unknown link mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeliveryTrace {
    opportunities: Vec<u64>,
    repeat_period_ms: u64,
}

impl DeliveryTrace {
    pub fn new(opportunities: Vec<u64>) -> Result<Self> {
        if opportunities.is_empty() {
            return Err(Error::Trace("trace has no delivery opportunities".into()));
        }
        if let Some(w) = opportunities.windows(2).find(|w| w[1] < w[0]) {
            return Err(Error::Trace(format!(
                "timestamps must be non-decreasing ({} after {})",
                w[1], w[0]
            )));
        }
        let repeat_period_ms = *opportunities.last().unwrap();
        if repeat_period_ms == 0 {
            return Err(Error::Trace("last timestamp must be > 0".into()));
        }
        Ok(DeliveryTrace {
            opportunities,
            repeat_period_ms,
        })
    }

    /// Parses the one-timestamp-per-line text format. Blank lines are ignored.
    pub fn parse(reader: impl BufRead) -> Result<Self> {
        let mut ops = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let ts = line
                .parse::<u64>()
                .map_err(|e| Error::Trace(format!("line {}: {line:?}: {e}", lineno + 1)))?;
            ops.push(ts);
        }
        Self::new(ops)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Trace(format!("{}: {e}", path.display())))?;
        Self::parse(std::io::BufReader::new(file))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.opportunities.len() * 6);
        for ts in &self.opportunities {
            s.push_str(&ts.to_string());
            s.push('\n');
        }
        s
    }

    pub fn opportunities(&self) -> &[u64] {
        &self.opportunities
    }

    pub fn repeat_period_ms(&self) -> u64 {
        self.repeat_period_ms
    }

    /// Long-run rate in bits per second when every opportunity carries `mtu`.
    pub fn average_rate_bps(&self, mtu: u32) -> f64 {
        self.opportunities.len() as f64 * f64::from(mtu) * 8.0 * 1000.0
            / self.repeat_period_ms as f64
    }

    /// Opportunities grouped as `(timestamp_ms, count)`.
    fn ticks(&self) -> Vec<(u64, u32)> {
        let mut ticks: Vec<(u64, u32)> = Vec::new();
        for &ts in &self.opportunities {
            match ticks.last_mut() {
                Some((t, n)) if *t == ts => *n += 1,
                _ => ticks.push((ts, 1)),
            }
        }
        ticks
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Synthesizes a constant-rate trace by accumulating credit each millisecond.
///
/// The period is the shortest whole number of milliseconds carrying an
/// integral number of packets, capped at [`MAX_TRACE_PERIOD_MS`].
pub fn constant_rate_trace(rate_bps: u64, mtu: u32) -> Result<DeliveryTrace> {
    if rate_bps == 0 {
        return Err(Error::Trace("link rate must be > 0".into()));
    }
    if mtu == 0 {
        return Err(Error::Trace("mtu must be > 0".into()));
    }
    // Credit is kept in bit-milliseconds per second so every step is integral.
    let cost = u64::from(mtu) * 8 * 1000;
    let period = (cost / gcd(rate_bps, cost)).min(MAX_TRACE_PERIOD_MS);
    let mut credit = 0u64;
    let mut ops = Vec::new();
    for ms in 1..=period {
        credit += rate_bps;
        while credit >= cost {
            credit -= cost;
            ops.push(ms);
        }
    }
    if ops.is_empty() {
        return Err(Error::Trace(format!(
            "{rate_bps} bps cannot deliver one {mtu}-byte packet per {period} ms"
        )));
    }
    // Pin the loop length to the full period even if the last ms is idle.
    let mut trace = DeliveryTrace::new(ops)?;
    trace.repeat_period_ms = period;
    Ok(trace)
}

#[derive(Debug)]
enum LinkState {
    Bursty {
        ticks: Vec<(u64, u32)>,
        period_ms: u64,
        cursor: usize,
        base_ms: u64,
    },
    Smooth {
        rate_bps: u64,
        busy_until: SimTime,
        remainder: u64,
        scheduled: bool,
    },
}

/// The bottleneck server sitting behind the AQM.
#[derive(Debug)]
pub struct Link {
    state: LinkState,
    delivered_bytes: u64,
}

impl Link {
    pub fn bursty(trace: &DeliveryTrace) -> Self {
        Link {
            state: LinkState::Bursty {
                ticks: trace.ticks(),
                period_ms: trace.repeat_period_ms,
                cursor: 0,
                base_ms: 0,
            },
            delivered_bytes: 0,
        }
    }

    pub fn smooth(rate_bps: u64) -> Result<Self> {
        if rate_bps == 0 {
            return Err(Error::config("link rate must be > 0"));
        }
        Ok(Link {
            state: LinkState::Smooth {
                rate_bps,
                busy_until: SimTime::ZERO,
                remainder: 0,
                scheduled: false,
            },
            delivered_bytes: 0,
        })
    }

    pub fn delivered_bytes(&self) -> u64 {
        self.delivered_bytes
    }

    /// The first service instant that does not depend on arrivals.
    pub fn first_service(&self) -> Option<SimTime> {
        match &self.state {
            LinkState::Bursty { ticks, .. } => Some(SimTime::from_millis(ticks[0].0)),
            LinkState::Smooth { .. } => None,
        }
    }

    /// Must be called after every admitted packet. Returns a service time to
    /// schedule when the smooth server was idle.
    pub fn on_enqueue(&mut self, now: SimTime) -> Option<SimTime> {
        match &mut self.state {
            LinkState::Bursty { .. } => None,
            LinkState::Smooth {
                busy_until,
                scheduled,
                ..
            } => {
                if *scheduled {
                    None
                } else {
                    *scheduled = true;
                    Some((*busy_until).max(now))
                }
            }
        }
    }

    /// Serves the delivery opportunity due at `now`.
    ///
    /// Delivered packets are appended to `out`; the return value is the next
    /// service instant to schedule, if any.
    pub fn advance<S: DualQueueScheduler>(
        &mut self,
        aqm: &mut DualPi2<S>,
        now: SimTime,
        rng: &mut SimRng,
        out: &mut Vec<Served>,
    ) -> Result<Option<SimTime>> {
        match &mut self.state {
            LinkState::Bursty {
                ticks,
                period_ms,
                cursor,
                base_ms,
            } => {
                let (_, count) = ticks[*cursor];
                for _ in 0..count {
                    // Sub-MTU packets still use a whole opportunity.
                    match aqm.dequeue(now, rng) {
                        Some(served) => {
                            self.delivered_bytes += u64::from(served.packet.size);
                            out.push(served);
                        }
                        None => break,
                    }
                }
                *cursor += 1;
                if *cursor == ticks.len() {
                    *cursor = 0;
                    *base_ms += *period_ms;
                }
                let next_ms = base_ms
                    .checked_add(ticks[*cursor].0)
                    .filter(|ms| *ms <= u64::MAX / 1_000_000)
                    .ok_or_else(|| Error::TimeOverflow("link trace cursor".into()))?;
                Ok(Some(SimTime::from_millis(next_ms)))
            }
            LinkState::Smooth {
                rate_bps,
                busy_until,
                remainder,
                scheduled,
            } => {
                let Some(served) = aqm.dequeue(now, rng) else {
                    *scheduled = false;
                    return Ok(None);
                };
                let numerator =
                    u128::from(served.packet.size) * 8 * 1_000_000_000 + u128::from(*remainder);
                let rate = u128::from(*rate_bps);
                *remainder = (numerator % rate) as u64;
                let tx_ns = u64::try_from(numerator / rate)
                    .map_err(|_| Error::TimeOverflow("serialization time".into()))?;
                *busy_until = now.advance_nanos(tx_ns)?;
                self.delivered_bytes += u64::from(served.packet.size);
                out.push(served);
                if aqm.is_empty() {
                    *scheduled = false;
                    Ok(None)
                } else {
                    Ok(Some(*busy_until))
                }
            }
        }
    }
}

/// Serialization time of an MTU packet at `rate_bps`, in nanoseconds.
pub fn mtu_spacing_nanos(rate_bps: u64) -> f64 {
    f64::from(MTU) * 8.0 * 1e9 / rate_bps as f64
}

/// A fixed one-way propagation delay. Constant delay preserves FIFO order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DelayElement {
    pub one_way: Duration,
}

impl DelayElement {
    pub fn new(one_way: Duration) -> Self {
        DelayElement { one_way }
    }

    /// Arrival time at the far end for a packet entering at `now`.
    pub fn forward(&self, now: SimTime) -> Result<SimTime> {
        now.advance(self.one_way)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aqm::AqmConfig;
    use crate::packet::{EcnCodepoint, FlowId, Packet};

    #[test]
    fn twelve_mbps_is_one_per_ms() {
        let t = constant_rate_trace(12_000_000, 1500).unwrap();
        assert_eq!(t.opportunities(), &[1]);
        assert_eq!(t.repeat_period_ms(), 1);
        assert_eq!(t.average_rate_bps(1500), 12_000_000.0);
    }

    /// Independent oracle: count packets due by each ms boundary as
    /// `floor(rate * ms / (8000 * mtu))`.
    fn due_by(rate_bps: u64, mtu: u32, ms: u64) -> u64 {
        rate_bps * ms / (8000 * u64::from(mtu))
    }

    #[test]
    fn fifty_mbps_window() {
        let t = constant_rate_trace(50_000_000, 1500).unwrap();
        assert_eq!(t.repeat_period_ms(), 6);
        assert_eq!(t.opportunities().len(), 25);
        for ms in 1..=6 {
            let emitted = t.opportunities().iter().filter(|&&o| o <= ms).count() as u64;
            assert_eq!(emitted, due_by(50_000_000, 1500, ms));
        }
        let avg = t.average_rate_bps(1500) / 1000.0 / 12_000.0;
        assert!((avg - 4.1667).abs() < 1e-4);
    }

    #[test]
    fn awkward_rate_within_one_packet() {
        let rate = 12_345_678;
        let t = constant_rate_trace(rate, 1500).unwrap();
        let period = t.repeat_period_ms();
        let expected = rate as f64 * period as f64 / 1000.0 / 12_000.0;
        assert!((t.opportunities().len() as f64 - expected).abs() < 1.0);
    }

    #[test]
    fn degenerate_rates_rejected() {
        assert!(constant_rate_trace(0, 1500).is_err());
        assert!(constant_rate_trace(100, 1500).is_err());
    }

    #[test]
    fn parse_trace_text() {
        let t = DeliveryTrace::parse("1\n1\n\n3\n".as_bytes()).unwrap();
        assert_eq!(t.opportunities(), &[1, 1, 3]);
        assert_eq!(t.repeat_period_ms(), 3);
        assert_eq!(DeliveryTrace::parse(t.to_text().as_bytes()).unwrap(), t);
        assert!(DeliveryTrace::parse("3\n1\n".as_bytes()).is_err());
        assert!(DeliveryTrace::parse("x\n".as_bytes()).is_err());
        assert!(DeliveryTrace::parse("".as_bytes()).is_err());
        assert!(DeliveryTrace::parse("0\n".as_bytes()).is_err());
    }

    fn offer(aqm: &mut DualPi2, id: u64, now: SimTime) {
        aqm.enqueue(
            Packet::new(id, FlowId(0), id, 1500, EcnCodepoint::Ect1, now),
            now,
        );
    }

    #[test]
    fn idle_opportunity_is_wasted() {
        let trace = constant_rate_trace(12_000_000, 1500).unwrap();
        let mut link = Link::bursty(&trace);
        let mut aqm = DualPi2::new(AqmConfig::for_link_rate(12_000_000));
        let mut rng = SimRng::new(0);
        let mut out = Vec::new();
        let t1 = link.first_service().unwrap();
        let t2 = link
            .advance(&mut aqm, t1, &mut rng, &mut out)
            .unwrap()
            .unwrap();
        assert!(out.is_empty());
        offer(&mut aqm, 1, t1);
        link.advance(&mut aqm, t2, &mut rng, &mut out).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(t2, SimTime::from_millis(2));
    }

    #[test]
    fn bursty_and_smooth_deliver_the_same_bytes() {
        let rate = 50_000_000;
        let end = SimTime::from_secs(30);
        let deliver = |mut link: Link| {
            let mut aqm = DualPi2::new(AqmConfig::for_link_rate(rate));
            let mut rng = SimRng::new(0);
            let mut out = Vec::new();
            let mut id = 0;
            let mut next = link.first_service().or(Some(SimTime::ZERO));
            while let Some(now) = next {
                if now > end {
                    break;
                }
                while aqm.queued_packets() < 16 {
                    id += 1;
                    offer(&mut aqm, id, now);
                }
                next = link.advance(&mut aqm, now, &mut rng, &mut out).unwrap();
            }
            link.delivered_bytes()
        };
        let trace = constant_rate_trace(rate, 1500).unwrap();
        let bursty = deliver(Link::bursty(&trace));
        let smooth = deliver(Link::smooth(rate).unwrap());
        assert_eq!(bursty, 125_000 * 1500);
        assert!(bursty.abs_diff(smooth) <= 1500, "{bursty} vs {smooth}");
    }

    #[test]
    fn smooth_spacing_is_exact() {
        let mut link = Link::smooth(12_000_000).unwrap();
        let mut aqm = DualPi2::new(AqmConfig::for_link_rate(12_000_000));
        let mut rng = SimRng::new(0);
        let mut out = Vec::new();
        offer(&mut aqm, 1, SimTime::ZERO);
        offer(&mut aqm, 2, SimTime::ZERO);
        let start = link.on_enqueue(SimTime::ZERO).unwrap();
        assert_eq!(link.on_enqueue(SimTime::ZERO), None);
        let next = link.advance(&mut aqm, start, &mut rng, &mut out).unwrap();
        assert_eq!(next, Some(SimTime::from_millis(1)));
        assert_eq!(
            link.advance(&mut aqm, next.unwrap(), &mut rng, &mut out)
                .unwrap(),
            None
        );
        assert_eq!(
            link.on_enqueue(SimTime::from_micros(1500)),
            Some(SimTime::from_millis(2))
        );
        assert!((mtu_spacing_nanos(50_000_000) - 240_000.0).abs() < 1e-9);
    }

    #[test]
    fn delay_element() {
        let d = DelayElement::new(Duration::from_millis(10));
        let out = d.forward(SimTime::ZERO).unwrap();
        let back = d.forward(out).unwrap();
        assert_eq!(back, SimTime::from_millis(20));
        let zero = DelayElement::new(Duration::ZERO);
        assert_eq!(
            zero.forward(SimTime::from_nanos(5)).unwrap(),
            SimTime::from_nanos(5)
        );
        let a = d.forward(SimTime::from_micros(1)).unwrap();
        let b = d.forward(SimTime::from_micros(2)).unwrap();
        assert_eq!(b.nanos_since(a), 1_000);
    }
}
