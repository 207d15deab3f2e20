use std::collections::VecDeque;

use crate::packet::{EcnCodepoint, FlowId, Packet};
use crate::time::SimTime;

/// Later arrivals needed before a sequence gap is declared lost.
pub const LOSS_THRESHOLD: u32 = 3;

/// Per-packet feedback travelling back to the sender.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ack {
    pub flow: FlowId,
    pub seq: u64,
    pub ce: bool,
    /// Send time of the acknowledged packet, echoed for RTT sampling.
    pub sent_at: SimTime,
    /// Packets newly declared lost by this ACK.
    pub lost: u64,
    /// Highest sequence number among them.
    pub lost_max_seq: Option<u64>,
}

#[derive(Debug, Clone, Copy)]
struct Gap {
    start: u64,
    end: u64,
    later_arrivals: u32,
}

/// Counts received bytes and CE marks, and detects sequence gaps.
#[derive(Debug, Clone)]
pub struct Receiver {
    flow: FlowId,
    expected: u64,
    gaps: VecDeque<Gap>,
    received_bytes: u64,
    total_count: u64,
    ce_count: u64,
    lost_count: u64,
}

impl Receiver {
    pub fn new(flow: FlowId) -> Self {
        Receiver {
            flow,
            expected: 0,
            gaps: VecDeque::new(),
            received_bytes: 0,
            total_count: 0,
            ce_count: 0,
            lost_count: 0,
        }
    }

    pub fn received_bytes(&self) -> u64 {
        self.received_bytes
    }

    pub fn total_count(&self) -> u64 {
        self.total_count
    }

    pub fn ce_count(&self) -> u64 {
        self.ce_count
    }

    pub fn lost_count(&self) -> u64 {
        self.lost_count
    }

    /// Accepts one data packet and returns its immediate ACK.
    pub fn on_packet(&mut self, pkt: &Packet) -> Ack {
        debug_assert_eq!(pkt.flow, self.flow);
        let ce = pkt.ecn == EcnCodepoint::Ce;
        self.received_bytes += u64::from(pkt.size);
        self.total_count += 1;
        self.ce_count += u64::from(ce);

        let mut lost = 0;
        let mut lost_max_seq = None;
        if pkt.seq >= self.expected {
            for gap in self.gaps.iter_mut() {
                gap.later_arrivals += 1;
            }
            while self
                .gaps
                .front()
                .is_some_and(|g| g.later_arrivals >= LOSS_THRESHOLD)
            {
                let gap = self.gaps.pop_front().unwrap();
                lost += gap.end - gap.start;
                lost_max_seq = Some(gap.end - 1);
            }
            if pkt.seq > self.expected {
                self.gaps.push_back(Gap {
                    start: self.expected,
                    end: pkt.seq,
                    later_arrivals: 0,
                });
            }
            self.expected = pkt.seq + 1;
        }
        self.lost_count += lost;
        Ack {
            flow: self.flow,
            seq: pkt.seq,
            ce,
            sent_at: pkt.created_at,
            lost,
            lost_max_seq,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(seq: u64, ecn: EcnCodepoint) -> Packet {
        Packet::new(seq, FlowId(1), seq, 1500, ecn, SimTime::from_millis(seq))
    }

    #[test]
    fn counts_bytes_and_marks() {
        let mut r = Receiver::new(FlowId(1));
        let a = r.on_packet(&data(0, EcnCodepoint::Ect1));
        assert!(!a.ce);
        let b = r.on_packet(&data(1, EcnCodepoint::Ce));
        assert!(b.ce);
        assert_eq!(b.sent_at, SimTime::from_millis(1));
        assert_eq!(r.received_bytes(), 3000);
        assert_eq!((r.ce_count(), r.total_count()), (1, 2));
    }

    #[test]
    fn gap_reported_after_three_later_arrivals() {
        let mut r = Receiver::new(FlowId(1));
        r.on_packet(&data(0, EcnCodepoint::Ect0));
        // 1 and 2 were dropped upstream.
        let acks: Vec<Ack> = (3..7)
            .map(|s| r.on_packet(&data(s, EcnCodepoint::Ect0)))
            .collect();
        assert_eq!(
            acks.iter().map(|a| a.lost).collect::<Vec<_>>(),
            vec![0, 0, 0, 2]
        );
        assert_eq!(acks[3].lost_max_seq, Some(2));
        assert_eq!(r.lost_count(), 2);
    }

    #[test]
    fn separate_gaps_are_reported_separately() {
        let mut r = Receiver::new(FlowId(1));
        let mut lost = Vec::new();
        for s in [0, 2, 4, 5, 6, 7] {
            lost.push(r.on_packet(&data(s, EcnCodepoint::Ect0)).lost);
        }
        assert_eq!(lost, vec![0, 0, 0, 0, 1, 1]);
    }
}
