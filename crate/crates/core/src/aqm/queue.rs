use std::collections::VecDeque;

use crate::packet::Packet;

/// FIFO used for both the C and the L queue.
///
/// Capacity is deliberately not enforced here: the byte limit is shared by
/// both queues and is applied by the AQM.
#[derive(Debug, Default, Clone)]
pub struct PacketFifo {
    packets: VecDeque<Packet>,
    bytes: u64,
}

impl PacketFifo {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, pkt: Packet) {
        self.bytes += u64::from(pkt.size);
        self.packets.push_back(pkt);
    }

    pub fn pop(&mut self) -> Option<Packet> {
        let pkt = self.packets.pop_front()?;
        self.bytes -= u64::from(pkt.size);
        Some(pkt)
    }

    pub fn head(&self) -> Option<&Packet> {
        self.packets.front()
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    pub fn bytes(&self) -> u64 {
        self.bytes
    }
}
