use std::time::Duration;

use dualq_core::aqm::{pi2_step, AqmConfig, DualPi2, QueueId, Verdict, MTU};
use dualq_core::{EcnCodepoint, FlowId, Packet, SimRng, SimTime};
use proptest::prelude::*;

#[derive(Debug, Clone)]
enum Op {
    Enqueue(u8, u32),
    Dequeue,
    Update,
    Advance(u32),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        4 => (0u8..4, 64u32..=1500).prop_map(|(e, s)| Op::Enqueue(e, s)),
        3 => Just(Op::Dequeue),
        1 => Just(Op::Update),
        2 => (0u32..20_000).prop_map(Op::Advance),
    ]
}

proptest! {
    #[test]
    fn random_operation_sequences_conserve(ops in prop::collection::vec(op(), 1..400), seed in any::<u64>()) {
        let mut cfg = AqmConfig::for_link_rate(2_000_000);
        cfg.limit_bytes = 30_000;
        let mut aqm = DualPi2::new(cfg);
        let mut rng = SimRng::new(seed);
        let mut now = SimTime::ZERO;
        let mut id = 0;
        let mut prev = *aqm.counters();
        for op in ops {
            match op {
                Op::Enqueue(e, size) => {
                    id += 1;
                    let ecn = EcnCodepoint::from_bits(e).unwrap();
                    let v = aqm.enqueue(Packet::new(id, FlowId(0), id, size, ecn, now), now);
                    if ecn == EcnCodepoint::Ect1 || ecn == EcnCodepoint::Ce {
                        prop_assert_ne!(v, Verdict::EnqueuedC);
                    }
                }
                Op::Dequeue => {
                    if let Some(s) = aqm.dequeue(now, &mut rng) {
                        if s.queue == QueueId::L4s && s.sojourn_ns > 1_000_000 {
                            prop_assert_eq!(s.packet.ecn, EcnCodepoint::Ce);
                        }
                    }
                }
                Op::Update => {
                    let next = aqm.next_update_at();
                    if next > now {
                        now = next;
                    }
                    aqm.pi2_update(now);
                }
                Op::Advance(us) => now = SimTime::from_nanos(now.as_nanos() + u64::from(us) * 1000),
            }
            let c = *aqm.counters();
            prop_assert!(aqm.conservation_holds());
            prop_assert!((0.0..=1.0).contains(&aqm.p_prime()));
            prop_assert!(c.enq_total >= prev.enq_total && c.deq_total >= prev.deq_total);
            prop_assert!(c.drops_total >= prev.drops_total && c.ecn_marks() >= prev.ecn_marks());
            prop_assert_eq!(c.drops_total, c.drops_overflow + c.drops_aqm);
            prev = c;
        }
    }

    #[test]
    fn pi2_step_stays_in_unit_interval(
        p in 0.0..=1.0f64,
        q in 0u64..10_000_000_000,
        prev in 0u64..10_000_000_000,
    ) {
        let cfg = AqmConfig::for_link_rate(12_000_000);
        let next = pi2_step(&cfg, p, q, prev);
        prop_assert!((0.0..=1.0).contains(&next));
    }
}

#[test]
fn pi2_holds_at_target() {
    let cfg = AqmConfig::for_link_rate(50_000_000);
    let target = cfg.target.as_nanos() as u64;
    for start in [0.0, 0.013, 0.5, 1.0] {
        let mut p = start;
        for _ in 0..10_000 {
            p = pi2_step(&cfg, p, target, target);
        }
        assert_eq!(p, start);
    }
}

#[test]
fn pi2_saturates_under_adversarial_delays() {
    let cfg = AqmConfig::for_link_rate(12_000_000);
    let mut rng = SimRng::new(99);
    let mut p = 0.5;
    let mut prev = 0;
    for i in 0..100_000u64 {
        let q = match i % 7 {
            0 => 0,
            1 => u64::MAX / 4,
            _ => rng.next_u64() % 5_000_000_000,
        };
        p = pi2_step(&cfg, p, q, prev);
        assert!((0.0..=1.0).contains(&p), "p {p} at {i}");
        prev = q;
    }
}

#[test]
fn wrr_share_under_saturation() {
    let cfg = AqmConfig::for_link_rate(1_000_000_000);
    let mut aqm = DualPi2::new(cfg);
    let mut rng = SimRng::new(1);
    let now = SimTime::ZERO;
    let mut id = 0;
    let mut bytes = [0u64; 2];
    for _ in 0..1_000_000 {
        while aqm.c_queue().len() < 4 {
            id += 1;
            aqm.enqueue(
                Packet::new(id, FlowId(0), id, MTU, EcnCodepoint::NotEct, now),
                now,
            );
        }
        while aqm.l_queue().len() < 4 {
            id += 1;
            aqm.enqueue(
                Packet::new(id, FlowId(1), id, MTU, EcnCodepoint::Ect1, now),
                now,
            );
        }
        let s = aqm.dequeue(now, &mut rng).unwrap();
        bytes[usize::from(s.queue == QueueId::L4s)] += u64::from(s.packet.size);
    }
    let share = bytes[0] as f64 / (bytes[0] + bytes[1]) as f64;
    assert!((0.09..=0.11).contains(&share), "classic share {share}");
}

#[test]
fn step_threshold_is_strict() {
    let cfg = AqmConfig::for_link_rate(12_000_000);
    let mut aqm = DualPi2::new(cfg);
    let mut rng = SimRng::new(0);
    let t0 = SimTime::ZERO;
    aqm.enqueue(
        Packet::new(1, FlowId(0), 1, MTU, EcnCodepoint::Ect1, t0),
        t0,
    );
    aqm.enqueue(
        Packet::new(2, FlowId(0), 2, MTU, EcnCodepoint::Ect1, t0),
        t0,
    );
    let at = SimTime::ZERO.advance(Duration::from_millis(1)).unwrap();
    assert!(!aqm.dequeue(at, &mut rng).unwrap().marked);
    let later = SimTime::from_nanos(at.as_nanos() + 1);
    assert!(aqm.dequeue(later, &mut rng).unwrap().marked);
}
