//! Dual-queue coupled AQM (DualPI2).
//!
//! The AQM is split into the same pieces as its reference design: a
//! classifier ([`classify`]), two FIFOs ([`PacketFifo`]), the PI² base
//! probability controller ([`pi2_step`]), the per-queue dequeue actions
//! ([`classic_action`], [`l4s_action`]) and a pluggable
//! [`DualQueueScheduler`]. [`DualPi2`] glues them together.
//!
//! All drop and mark decisions are taken at dequeue time. The only
//! enqueue-time decision is the shared byte-limit overflow drop.

mod config;
mod queue;
mod scheduler;

pub use config::{limit_for_rate, AqmConfig, LIMIT_DELAY};
pub use queue::PacketFifo;
pub use scheduler::{DualQueueScheduler, StrictPriority, WrrScheduler};

use serde::{Deserialize, Serialize};

use crate::packet::{EcnCodepoint, Packet};
use crate::rng::SimRng;
use crate::time::{nanos, SimTime};

pub const MTU: u32 = 1500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QueueId {
    Classic,
    L4s,
}

/// ECT(1) and CE go to the L queue, Not-ECT and ECT(0) to the C queue.
pub fn classify(ecn: EcnCodepoint) -> QueueId {
    match ecn {
        EcnCodepoint::Ect1 | EcnCodepoint::Ce => QueueId::L4s,
        EcnCodepoint::NotEct | EcnCodepoint::Ect0 => QueueId::Classic,
    }
}

/// Admission outcome of an offered packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    EnqueuedC,
    EnqueuedL,
    DroppedOverflow,
}

/// What the AQM does with a head packet at dequeue time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Pass,
    Mark,
    Drop,
}

/// Cumulative counters. All are monotone.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AqmCounters {
    /// Packets offered to `enqueue`, including overflow drops.
    pub enq_total: u64,
    pub enq_bytes: u64,
    pub deq_total: u64,
    pub deq_bytes: u64,
    pub drops_total: u64,
    pub drops_bytes: u64,
    pub drops_overflow: u64,
    pub drops_aqm: u64,
    pub ecn_marks_l: u64,
    pub ecn_marks_c: u64,
}

impl AqmCounters {
    pub fn ecn_marks(&self) -> u64 {
        self.ecn_marks_l + self.ecn_marks_c
    }
}

/// A packet leaving the AQM towards the link.
#[derive(Debug, Clone)]
pub struct Served {
    pub packet: Packet,
    pub queue: QueueId,
    pub sojourn_ns: u64,
    /// CE was set by this dequeue.
    pub marked: bool,
}

/// One PI² update of the base probability, clamped to `[0, 1]`.
///
/// `p' + alpha * tupdate * (qdelay - target) + beta * (qdelay - prev_qdelay)`
/// with delays in seconds. Delay differences are formed in integer
/// nanoseconds so a zero error contributes exactly zero.
pub fn pi2_step(cfg: &AqmConfig, p_prime: f64, qdelay_ns: u64, prev_qdelay_ns: u64) -> f64 {
    let err_s = (qdelay_ns as i128 - nanos(cfg.target) as i128) as f64 * 1e-9;
    let delta_s = (qdelay_ns as i128 - prev_qdelay_ns as i128) as f64 * 1e-9;
    let tupdate_s = cfg.tupdate.as_secs_f64();
    let p = p_prime + cfg.alpha * tupdate_s * err_s + cfg.beta * delta_s;
    p.clamp(0.0, 1.0)
}

/// Classic drop (or mark) probability `P_C = p'^2`.
pub fn classic_probability(p_prime: f64) -> f64 {
    p_prime * p_prime
}

/// Coupled L4S marking probability `P_CL = min(k * p', 1)`.
pub fn coupled_probability(cfg: &AqmConfig, p_prime: f64) -> f64 {
    (cfg.coupling_k * p_prime).clamp(0.0, 1.0)
}

/// Dequeue-time decision for the head of the C queue. Draws exactly once.
pub fn classic_action(cfg: &AqmConfig, p_prime: f64, pkt: &Packet, rng: &mut SimRng) -> Action {
    if !rng.bernoulli(classic_probability(p_prime)) {
        Action::Pass
    } else if cfg.ecn_classic_enabled && pkt.ecn == EcnCodepoint::Ect0 {
        Action::Mark
    } else {
        Action::Drop
    }
}

/// Dequeue-time decision for the head of the L queue.
///
/// Marks when the sojourn exceeds `step_thresh`; otherwise marks with the
/// coupled probability (one draw). Never drops: overload is bounded by the
/// shared byte limit instead.
pub fn l4s_action(cfg: &AqmConfig, p_prime: f64, sojourn_ns: u64, rng: &mut SimRng) -> Action {
    if sojourn_ns > nanos(cfg.step_thresh) || rng.bernoulli(coupled_probability(cfg, p_prime)) {
        Action::Mark
    } else {
        Action::Pass
    }
}

#[derive(Debug)]
pub struct DualPi2<S = WrrScheduler> {
    cfg: AqmConfig,
    c_queue: PacketFifo,
    l_queue: PacketFifo,
    p_prime: f64,
    prev_qdelay_ns: u64,
    next_update_at: SimTime,
    scheduler: S,
    counters: AqmCounters,
}

impl DualPi2<WrrScheduler> {
    pub fn new(cfg: AqmConfig) -> Self {
        let scheduler = WrrScheduler::new(cfg.classic_protection, MTU);
        Self::with_scheduler(cfg, scheduler)
    }
}

impl<S: DualQueueScheduler> DualPi2<S> {
    pub fn with_scheduler(cfg: AqmConfig, scheduler: S) -> Self {
        let next_update_at = SimTime::from_nanos(nanos(cfg.tupdate));
        DualPi2 {
            cfg,
            c_queue: PacketFifo::new(),
            l_queue: PacketFifo::new(),
            p_prime: 0.0,
            prev_qdelay_ns: 0,
            next_update_at,
            scheduler,
            counters: AqmCounters::default(),
        }
    }

    pub fn config(&self) -> &AqmConfig {
        &self.cfg
    }

    pub fn p_prime(&self) -> f64 {
        self.p_prime
    }

    pub fn counters(&self) -> &AqmCounters {
        &self.counters
    }

    pub fn next_update_at(&self) -> SimTime {
        self.next_update_at
    }

    pub fn c_queue(&self) -> &PacketFifo {
        &self.c_queue
    }

    pub fn l_queue(&self) -> &PacketFifo {
        &self.l_queue
    }

    pub fn queued_packets(&self) -> u64 {
        (self.c_queue.len() + self.l_queue.len()) as u64
    }

    pub fn queued_bytes(&self) -> u64 {
        self.c_queue.bytes() + self.l_queue.bytes()
    }

    pub fn is_empty(&self) -> bool {
        self.c_queue.is_empty() && self.l_queue.is_empty()
    }

    /// Packet and byte conservation plus the buffer cap.
    pub fn conservation_holds(&self) -> bool {
        let c = &self.counters;
        c.enq_total == c.deq_total + c.drops_total + self.queued_packets()
            && c.enq_bytes == c.deq_bytes + c.drops_bytes + self.queued_bytes()
            && self.queued_bytes() <= self.cfg.limit_bytes
    }

    pub fn enqueue(&mut self, mut pkt: Packet, now: SimTime) -> Verdict {
        let size = u64::from(pkt.size);
        self.counters.enq_total += 1;
        self.counters.enq_bytes += size;
        if self.queued_bytes() + size > self.cfg.limit_bytes {
            self.counters.drops_total += 1;
            self.counters.drops_bytes += size;
            self.counters.drops_overflow += 1;
            return Verdict::DroppedOverflow;
        }
        pkt.enqueued_at = Some(now);
        match classify(pkt.ecn) {
            QueueId::Classic => {
                self.c_queue.push(pkt);
                Verdict::EnqueuedC
            }
            QueueId::L4s => {
                self.l_queue.push(pkt);
                Verdict::EnqueuedL
            }
        }
    }

    /// Runs one PI² update at `now` and schedules the next one.
    ///
    /// The queue delay is the sojourn of the C-queue head (zero when empty).
    pub fn pi2_update(&mut self, now: SimTime) -> f64 {
        debug_assert!(now >= self.next_update_at);
        let qdelay = self.c_queue.head().map_or(0, |p| p.sojourn_nanos(now));
        self.p_prime = pi2_step(&self.cfg, self.p_prime, qdelay, self.prev_qdelay_ns);
        self.prev_qdelay_ns = qdelay;
        self.next_update_at =
            SimTime::from_nanos(self.next_update_at.as_nanos() + nanos(self.cfg.tupdate));
        self.p_prime
    }

    /// Serves one packet, applying the AQM actions to the selected head.
    ///
    /// Classic drops retry with the next head; the retry loop is bounded by
    /// the number of queued packets since each iteration removes one.
    pub fn dequeue(&mut self, now: SimTime, rng: &mut SimRng) -> Option<Served> {
        loop {
            let c_len = self.c_queue.len();
            let l_len = self.l_queue.len();
            let queue = self.scheduler.select(c_len, l_len)?;
            let (mut packet, other_backlogged) = match queue {
                QueueId::Classic => (self.c_queue.pop()?, l_len > 0),
                QueueId::L4s => (self.l_queue.pop()?, c_len > 0),
            };
            let sojourn_ns = packet.sojourn_nanos(now);
            let size = u64::from(packet.size);
            let action = match queue {
                QueueId::Classic => classic_action(&self.cfg, self.p_prime, &packet, rng),
                QueueId::L4s => l4s_action(&self.cfg, self.p_prime, sojourn_ns, rng),
            };
            let marked = match action {
                Action::Drop => {
                    self.counters.drops_total += 1;
                    self.counters.drops_bytes += size;
                    self.counters.drops_aqm += 1;
                    continue;
                }
                Action::Mark if packet.ecn != EcnCodepoint::Ce => {
                    packet.ecn = EcnCodepoint::Ce;
                    match queue {
                        QueueId::Classic => self.counters.ecn_marks_c += 1,
                        QueueId::L4s => self.counters.ecn_marks_l += 1,
                    }
                    true
                }
                Action::Mark | Action::Pass => false,
            };
            self.scheduler.commit(queue, packet.size, other_backlogged);
            self.counters.deq_total += 1;
            self.counters.deq_bytes += size;
            return Some(Served {
                packet,
                queue,
                sojourn_ns,
                marked,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use std::time::Duration;

    use super::*;
    use crate::packet::FlowId;

    fn pkt(id: u64, ecn: EcnCodepoint, size: u32) -> Packet {
        Packet::new(id, FlowId(0), id, size, ecn, SimTime::ZERO)
    }

    fn cfg() -> AqmConfig {
        AqmConfig::for_link_rate(12_000_000)
    }

    #[test]
    fn classifier_follows_codepoints() {
        assert_eq!(classify(EcnCodepoint::Ect1), QueueId::L4s);
        assert_eq!(classify(EcnCodepoint::Ce), QueueId::L4s);
        assert_eq!(classify(EcnCodepoint::NotEct), QueueId::Classic);
        assert_eq!(classify(EcnCodepoint::Ect0), QueueId::Classic);
    }

    #[test]
    fn enqueue_verdicts() {
        let mut aqm = DualPi2::new(cfg());
        assert_eq!(aqm.config().limit_bytes, 375_000);
        assert_eq!(
            aqm.enqueue(pkt(1, EcnCodepoint::Ect1, 1500), SimTime::ZERO),
            Verdict::EnqueuedL
        );
        assert_eq!(
            aqm.enqueue(pkt(2, EcnCodepoint::Ect0, 1500), SimTime::ZERO),
            Verdict::EnqueuedC
        );
        assert_eq!(
            aqm.enqueue(pkt(3, EcnCodepoint::NotEct, 1500), SimTime::ZERO),
            Verdict::EnqueuedC
        );
        assert_eq!(
            aqm.l_queue().head().unwrap().enqueued_at,
            Some(SimTime::ZERO)
        );
        assert!(aqm.conservation_holds());
    }

    #[test]
    fn overflow_drops_regardless_of_ecn() {
        let mut c = cfg();
        c.limit_bytes = 3000;
        let mut aqm = DualPi2::new(c);
        aqm.enqueue(pkt(1, EcnCodepoint::Ect1, 1500), SimTime::ZERO);
        aqm.enqueue(pkt(2, EcnCodepoint::Ect0, 1500), SimTime::ZERO);
        assert_eq!(aqm.queued_bytes(), 3000);
        for ecn in [EcnCodepoint::Ect1, EcnCodepoint::Ce, EcnCodepoint::NotEct] {
            assert_eq!(
                aqm.enqueue(pkt(9, ecn, 1500), SimTime::ZERO),
                Verdict::DroppedOverflow
            );
        }
        assert_eq!(aqm.counters().drops_overflow, 3);
        assert!(aqm.conservation_holds());
    }

    #[test]
    fn pi2_step_oracle() {
        let c = cfg();
        let p = pi2_step(&c, 0.01, 25_000_000, 20_000_000);
        // 0.01 + 0.16 * 0.016 * 0.010 + 3.2 * 0.005
        assert!((p - 0.0260256).abs() < 1e-12, "p = {p}");
    }

    #[test]
    fn pi2_fixed_point_and_clamp() {
        let c = cfg();
        let target = nanos(c.target);
        let mut p = 0.123456789;
        for _ in 0..10_000 {
            p = pi2_step(&c, p, target, target);
        }
        assert_eq!(p, 0.123456789);
        assert_eq!(pi2_step(&c, 0.001, 0, 50_000_000), 0.0);
        assert_eq!(pi2_step(&c, 0.999, 900_000_000, 0), 1.0);
    }

    #[test]
    fn probabilities() {
        let c = cfg();
        assert!((classic_probability(0.2) - 0.04).abs() < 1e-15);
        assert!((coupled_probability(&c, 0.2) - 0.4).abs() < 1e-15);
        assert_eq!(coupled_probability(&c, 0.9), 1.0);
    }

    #[test]
    fn classic_action_rules() {
        let c = cfg();
        let mut rng = SimRng::new(1);
        let ect0 = pkt(1, EcnCodepoint::Ect0, 1500);
        let not_ect = pkt(2, EcnCodepoint::NotEct, 1500);
        for _ in 0..1000 {
            assert_eq!(classic_action(&c, 0.0, &ect0, &mut rng), Action::Pass);
        }
        assert_eq!(classic_action(&c, 1.0, &ect0, &mut rng), Action::Mark);
        assert_eq!(classic_action(&c, 1.0, &not_ect, &mut rng), Action::Drop);
        let mut no_ecn = c.clone();
        no_ecn.ecn_classic_enabled = false;
        assert_eq!(classic_action(&no_ecn, 1.0, &ect0, &mut rng), Action::Drop);
    }

    #[test]
    fn classic_action_frequency() {
        let c = cfg();
        let mut rng = SimRng::new(5);
        let p = pkt(1, EcnCodepoint::NotEct, 1500);
        let n = 200_000;
        let drops = (0..n)
            .filter(|_| classic_action(&c, 0.2, &p, &mut rng) == Action::Drop)
            .count();
        let frac = drops as f64 / n as f64;
        let bound = 4.0 * (0.04f64 * 0.96 / n as f64).sqrt();
        assert!((frac - 0.04).abs() < bound, "frac = {frac}");
    }

    #[test]
    fn step_marking() {
        let c = cfg();
        let mut rng = SimRng::new(1);
        assert_eq!(l4s_action(&c, 0.0, 500_000, &mut rng), Action::Pass);
        assert_eq!(l4s_action(&c, 0.0, 1_000_000, &mut rng), Action::Pass);
        assert_eq!(l4s_action(&c, 0.0, 2_000_000, &mut rng), Action::Mark);
    }

    #[test]
    fn dequeue_marks_late_l_packets() {
        let mut aqm = DualPi2::new(cfg());
        let mut rng = SimRng::new(1);
        aqm.enqueue(pkt(1, EcnCodepoint::Ect1, 1500), SimTime::ZERO);
        aqm.enqueue(pkt(2, EcnCodepoint::Ect1, 1500), SimTime::from_millis(1));
        let first = aqm.dequeue(SimTime::from_millis(2), &mut rng).unwrap();
        assert!(first.marked);
        assert_eq!(first.packet.ecn, EcnCodepoint::Ce);
        assert_eq!(first.sojourn_ns, 2_000_000);
        let second = aqm.dequeue(SimTime::from_millis(2), &mut rng).unwrap();
        assert!(!second.marked);
        assert_eq!(aqm.counters().ecn_marks_l, 1);
        assert!(aqm.dequeue(SimTime::from_millis(2), &mut rng).is_none());
        assert!(aqm.conservation_holds());
    }

    #[test]
    fn work_conservation() {
        let mut aqm = DualPi2::new(cfg());
        let mut rng = SimRng::new(1);
        aqm.enqueue(pkt(1, EcnCodepoint::Ect0, 1500), SimTime::ZERO);
        assert_eq!(
            aqm.dequeue(SimTime::ZERO, &mut rng).unwrap().queue,
            QueueId::Classic
        );
        aqm.enqueue(pkt(2, EcnCodepoint::Ect1, 1500), SimTime::ZERO);
        assert_eq!(
            aqm.dequeue(SimTime::ZERO, &mut rng).unwrap().queue,
            QueueId::L4s
        );
    }

    #[test]
    fn classic_drops_fall_through_to_l() {
        let mut c = cfg();
        c.ecn_classic_enabled = false;
        let mut aqm = DualPi2::with_scheduler(c, StrictPriorityClassic);
        let mut rng = SimRng::new(1);
        for i in 0..5 {
            aqm.enqueue(pkt(i, EcnCodepoint::NotEct, 1500), SimTime::ZERO);
        }
        aqm.enqueue(pkt(9, EcnCodepoint::Ect1, 1500), SimTime::ZERO);
        aqm.p_prime = 1.0;
        let served = aqm.dequeue(SimTime::from_millis(1), &mut rng).unwrap();
        assert_eq!(served.queue, QueueId::L4s);
        assert_eq!(aqm.counters().drops_aqm, 5);
        assert!(aqm.conservation_holds());
    }

    /// Prefers C whenever it is backlogged, to exercise the retry path.
    #[derive(Debug)]
    struct StrictPriorityClassic;

    impl DualQueueScheduler for StrictPriorityClassic {
        fn select(&mut self, c_len: usize, l_len: usize) -> Option<QueueId> {
            if c_len > 0 {
                Some(QueueId::Classic)
            } else if l_len > 0 {
                Some(QueueId::L4s)
            } else {
                None
            }
        }

        fn commit(&mut self, _: QueueId, _: u32, _: bool) {}
    }

    #[test]
    fn update_uses_c_head_sojourn() {
        let mut aqm = DualPi2::new(cfg());
        aqm.enqueue(pkt(1, EcnCodepoint::Ect0, 1500), SimTime::ZERO);
        let p = aqm.pi2_update(SimTime::from_millis(16));
        let expected = pi2_step(aqm.config(), 0.0, 16_000_000, 0);
        assert_eq!(p, expected);
        assert_eq!(aqm.next_update_at(), SimTime::from_millis(32));
        let mut empty = DualPi2::new(cfg());
        assert_eq!(empty.pi2_update(SimTime::from_millis(16)), 0.0);
    }

    #[test]
    fn saturated_wrr_share() {
        let mut aqm = DualPi2::new(cfg());
        let mut rng = SimRng::new(1);
        let mut id = 0;
        let (mut c_bytes, mut total) = (0u64, 0u64);
        for i in 0..100_000 {
            while aqm.c_queue().len() < 4 {
                id += 1;
                aqm.enqueue(pkt(id, EcnCodepoint::Ect0, 1500), SimTime::ZERO);
            }
            while aqm.l_queue().len() < 4 {
                id += 1;
                aqm.enqueue(pkt(id, EcnCodepoint::Ect1, 1500), SimTime::ZERO);
            }
            let s = aqm.dequeue(SimTime::from_nanos(i), &mut rng).unwrap();
            total += u64::from(s.packet.size);
            if s.queue == QueueId::Classic {
                c_bytes += u64::from(s.packet.size);
            }
        }
        let share = c_bytes as f64 / total as f64;
        assert!((0.09..=0.11).contains(&share), "share = {share}");
    }

    #[test]
    fn update_period() {
        let aqm = DualPi2::new(cfg());
        assert_eq!(
            aqm.next_update_at(),
            SimTime::ZERO.advance(Duration::from_millis(16)).unwrap()
        );
    }
}
