//! The discrete-event loop binding senders, the AQM, the link and receivers.
//!
//! Events are ordered by time and then by class (link service, AQM update,
//! data arrival, ACK processing, timers), with insertion order breaking any
//! remaining tie, so a run is a pure function of its configuration and seed.
//! Events strictly before the run end are processed; the last sample is
//! taken at the end instant.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::aqm::{DualPi2, QueueId, Served, MTU};
use crate::error::{Error, Result};
use crate::link::{constant_rate_trace, DelayElement, DeliveryTrace, Link, LinkMode};
use crate::metrics::{summarize_flows, Diagnostics, FlowTotals, RunRecord, Sampler};
use crate::packet::{EcnCodepoint, FlowId, Packet};
use crate::rng::SimRng;
use crate::scenario::ScenarioConfig;
use crate::time::{nanos, SimTime};
use crate::traffic::{Ack, Receiver, Sender};

#[derive(Debug)]
enum Event {
    LinkService,
    AqmUpdate,
    DataArrival(Packet),
    AckArrival(Ack),
    FlowStart(usize),
    RtoCheck(usize),
}

impl Event {
    fn class(&self) -> u8 {
        match self {
            Event::LinkService => 0,
            Event::AqmUpdate => 1,
            Event::DataArrival(_) => 2,
            Event::AckArrival(_) | Event::FlowStart(_) => 3,
            Event::RtoCheck(_) => 4,
        }
    }
}

#[derive(Debug)]
struct Scheduled {
    key: (u64, u8, u64),
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap.
        other.key.cmp(&self.key)
    }
}

struct FlowState {
    sender: Sender,
    receiver: Receiver,
    active_s: f64,
    rto_pending: bool,
}

/// One emulation run.
pub struct Simulation {
    cfg: ScenarioConfig,
    aqm: DualPi2,
    link: Link,
    delay: DelayElement,
    flows: Vec<FlowState>,
    rng: SimRng,
    heap: BinaryHeap<Scheduled>,
    next_seq: u64,
    next_packet_id: u64,
    end: SimTime,
    step_ns: u64,
    sampler: Sampler,
    diagnostics: Diagnostics,
    served: Vec<Served>,
    pumped: Vec<Packet>,
}

fn link_for(cfg: &ScenarioConfig) -> Result<Link> {
    let trace = match &cfg.link.trace_file {
        Some(path) => Some(DeliveryTrace::from_file(path)?),
        None => None,
    };
    match cfg.link.mode {
        LinkMode::Bursty => {
            let trace = match trace {
                Some(t) => t,
                None => constant_rate_trace(cfg.link.rate_bps, MTU)?,
            };
            Ok(Link::bursty(&trace))
        }
        LinkMode::Smooth => {
            let rate = match trace {
                Some(t) => t.average_rate_bps(MTU).round() as u64,
                None => cfg.link.rate_bps,
            };
            Link::smooth(rate)
        }
    }
}

impl Simulation {
    pub fn new(cfg: &ScenarioConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let end = SimTime::ZERO.advance(cfg.duration)?;
        let mut flows = Vec::with_capacity(cfg.flows.len());
        for (i, f) in cfg.flows.iter().enumerate() {
            let start = SimTime::ZERO.advance(f.start_time)?;
            let stop = match f.duration {
                Some(d) => Some(start.advance(d)?.min(end)),
                None => None,
            };
            let active = stop.unwrap_or(end).nanos_since(start);
            let id = FlowId(i as u32);
            flows.push(FlowState {
                sender: Sender::new(id, f.kind, stop),
                receiver: Receiver::new(id),
                active_s: active as f64 * 1e-9,
                rto_pending: false,
            });
        }
        let mut sim = Simulation {
            aqm: DualPi2::new(cfg.aqm.clone()),
            link: link_for(cfg)?,
            delay: DelayElement::new(cfg.delay.one_way),
            flows,
            rng: SimRng::new(seed),
            heap: BinaryHeap::new(),
            next_seq: 0,
            next_packet_id: 0,
            end,
            step_ns: nanos(cfg.aqm.step_thresh),
            sampler: Sampler::new(),
            diagnostics: Diagnostics::default(),
            served: Vec::new(),
            pumped: Vec::new(),
            cfg: cfg.clone(),
        };
        if let Some(t) = sim.link.first_service() {
            sim.schedule(t, Event::LinkService);
        }
        sim.schedule(sim.aqm.next_update_at(), Event::AqmUpdate);
        for i in 0..sim.flows.len() {
            let start = SimTime::ZERO.advance(sim.cfg.flows[i].start_time)?;
            sim.schedule(start, Event::FlowStart(i));
        }
        Ok(sim)
    }

    fn schedule(&mut self, at: SimTime, event: Event) {
        let key = (at.as_nanos(), event.class(), self.next_seq);
        self.next_seq += 1;
        self.heap.push(Scheduled { key, event });
    }

    pub fn aqm(&self) -> &DualPi2 {
        &self.aqm
    }

    /// Runs to completion and summarizes.
    pub fn run(mut self, run_id: impl Into<String>) -> Result<RunRecord> {
        while let Some(next) = self.heap.peek() {
            if next.key.0 >= self.end.as_nanos() {
                break;
            }
            let Scheduled { key, event } = self.heap.pop().unwrap();
            self.handle(SimTime::from_nanos(key.0), event)?;
            self.diagnostics.events += 1;
            if !self.aqm.conservation_holds() {
                self.diagnostics.conservation_violations += 1;
            }
        }
        if self.aqm.next_update_at() == self.end {
            self.aqm.pi2_update(self.end);
        }
        self.take_sample(self.end);
        self.finish(run_id.into())
    }

    fn take_sample(&mut self, now: SimTime) {
        self.sampler.sample(
            now.as_nanos(),
            self.aqm.queued_packets(),
            self.aqm.queued_bytes(),
            self.aqm.counters(),
        );
    }

    fn handle(&mut self, now: SimTime, event: Event) -> Result<()> {
        match event {
            Event::LinkService => {
                let mut served = std::mem::take(&mut self.served);
                let next = self
                    .link
                    .advance(&mut self.aqm, now, &mut self.rng, &mut served)?;
                if let Some(t) = next {
                    self.schedule(t, Event::LinkService);
                }
                let arrival = self.delay.forward(now)?;
                for s in served.drain(..) {
                    if s.queue == QueueId::L4s && s.sojourn_ns > self.step_ns {
                        self.diagnostics.l_over_step += 1;
                        if s.packet.ecn != EcnCodepoint::Ce {
                            self.diagnostics.step_violations += 1;
                        }
                    }
                    self.schedule(arrival, Event::DataArrival(s.packet));
                }
                self.served = served;
            }
            Event::AqmUpdate => {
                self.aqm.pi2_update(now);
                self.take_sample(now);
                self.schedule(self.aqm.next_update_at(), Event::AqmUpdate);
            }
            Event::DataArrival(pkt) => {
                let flow = &mut self.flows[pkt.flow.0 as usize];
                let ack = flow.receiver.on_packet(&pkt);
                let back = self.delay.forward(now)?;
                self.schedule(back, Event::AckArrival(ack));
            }
            Event::AckArrival(ack) => {
                let i = ack.flow.0 as usize;
                self.flows[i].sender.on_ack(now, &ack);
                self.pump(i, now)?;
            }
            Event::FlowStart(i) => self.pump(i, now)?,
            Event::RtoCheck(i) => {
                self.flows[i].rto_pending = false;
                if self.flows[i].sender.on_rto(now) {
                    self.pump(i, now)?;
                } else {
                    self.arm_rto(i);
                }
            }
        }
        Ok(())
    }

    fn pump(&mut self, i: usize, now: SimTime) -> Result<()> {
        let mut pumped = std::mem::take(&mut self.pumped);
        self.flows[i]
            .sender
            .pump(now, &mut self.next_packet_id, &mut pumped);
        for pkt in pumped.drain(..) {
            self.aqm.enqueue(pkt, now);
            if let Some(t) = self.link.on_enqueue(now) {
                self.schedule(t, Event::LinkService);
            }
        }
        self.pumped = pumped;
        self.arm_rto(i);
        Ok(())
    }

    fn arm_rto(&mut self, i: usize) {
        if self.flows[i].rto_pending {
            return;
        }
        if let Some(deadline) = self.flows[i].sender.rto_deadline() {
            self.flows[i].rto_pending = true;
            self.schedule(deadline, Event::RtoCheck(i));
        }
    }

    fn finish(self, run_id: String) -> Result<RunRecord> {
        let duration_s = self.cfg.duration.as_secs_f64();
        let totals: Vec<FlowTotals> = self
            .flows
            .iter()
            .enumerate()
            .map(|(i, f)| FlowTotals {
                flow_id: i as u32,
                kind: f.sender.kind(),
                active_s: f.active_s,
                bytes: f.receiver.received_bytes(),
                packets_sent: f.sender.packets_sent(),
                packets_received: f.receiver.total_count(),
                ce_received: f.receiver.ce_count(),
                lost: f.receiver.lost_count(),
                reductions: f.sender.reductions(),
                timeouts: f.sender.timeouts(),
            })
            .collect();
        let (avg, flows) = summarize_flows(duration_s, &totals)?;
        if self.sampler.last_counters() != self.aqm.counters() {
            return Err(Error::Record(
                "final sample does not cover all counters".into(),
            ));
        }
        Ok(RunRecord {
            run_id,
            fingerprint: self.cfg.fingerprint(),
            seed: self.rng.seed(),
            rng_algorithm: self.rng.algorithm().to_string(),
            duration_s,
            avg_throughput_mbps: avg,
            flows,
            counters: *self.aqm.counters(),
            queued_at_end: self.aqm.queued_packets(),
            diagnostics: self.diagnostics,
            series: self.sampler.into_samples(),
        })
    }
}

/// Runs one scenario with `seed`.
pub fn run_scenario(
    cfg: &ScenarioConfig,
    seed: u64,
    run_id: impl Into<String>,
) -> Result<RunRecord> {
    Simulation::new(cfg, seed)?.run(run_id)
}
