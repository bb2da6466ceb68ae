//! Deterministic discrete-event network: a time-ordered event queue, one
//! FIFO outbound link per node, seeded delays and drops.
//!
//! Every node owns a single outbound link. A message handed to [`Net::send`]
//! waits in that link's queue; when the link is idle the protocol may veto it
//! ([`Protocol::admit`]), otherwise it occupies the link for
//! `wire_bytes / bandwidth` and arrives after the sampled propagation delay.
//! Small control messages are served before queued block transfers but never
//! interrupt a transfer already on the wire.

pub mod fault;
pub mod topology;
pub mod trace;

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt::Debug;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::error::Error;
use crate::metrics::CostLedger;
use crate::model::{Message, NodeId};

pub use fault::{FaultKind, FaultPlan, LinkEffect, LinkRule, ScriptedFault};
pub use topology::{build_topology, Topology};
pub use trace::Trace;

/// Simulation time in milliseconds.
pub type Time = f64;

#[derive(Clone, Debug)]
pub enum Action<T> {
    Deliver(Message),
    Timer { node: NodeId, incarnation: u64, timer: T },
    Crash(NodeId),
    Recover(NodeId),
    LinkFree(NodeId),
}

#[derive(Debug)]
struct Scheduled<T> {
    at: Time,
    seq: u64,
    action: Action<T>,
}

impl<T> PartialEq for Scheduled<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T> Eq for Scheduled<T> {}

impl<T> PartialOrd for Scheduled<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T> Ord for Scheduled<T> {
    // BinaryHeap is a max-heap; earliest (time, seq) must come out first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .at
            .total_cmp(&self.at)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Clone, Debug, Default)]
struct OutLink {
    busy: bool,
    control: VecDeque<Message>,
    bulk: VecDeque<Message>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetParams {
    pub failure_rate: f64,
    pub delay_lo_ms: f64,
    pub delay_hi_ms: f64,
    pub cloud_delay_ms: f64,
    pub block_size: u64,
    /// Outbound rate per node in bytes per ms; index 0 is the cloud.
    pub rates: Vec<f64>,
    pub horizon_ms: f64,
}

/// Result of putting a message on the wire.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transfer {
    pub finish: Time,
    pub dropped: bool,
}

pub struct Net<T> {
    now: Time,
    seq: u64,
    queue: BinaryHeap<Scheduled<T>>,
    alive: Vec<bool>,
    incarnation: Vec<u64>,
    links: Vec<OutLink>,
    ready: Vec<NodeId>,
    in_ready: Vec<bool>,
    rng: ChaCha8Rng,
    params: NetParams,
    rules: Vec<LinkRule>,
    ledger: CostLedger,
    trace: Option<Trace>,
    events: u64,
}

impl<T: Clone + Debug> Net<T> {
    pub fn new(n: usize, params: NetParams, seed: u64, block_count: u32) -> Self {
        assert_eq!(params.rates.len(), n + 1, "one rate per node including the cloud");
        Net {
            now: 0.0,
            seq: 0,
            queue: BinaryHeap::new(),
            alive: vec![true; n + 1],
            incarnation: vec![0; n + 1],
            links: vec![OutLink::default(); n + 1],
            ready: Vec::new(),
            in_ready: vec![false; n + 1],
            rng: ChaCha8Rng::seed_from_u64(seed),
            params,
            rules: Vec::new(),
            ledger: CostLedger::new(block_count),
            trace: None,
            events: 0,
        }
    }

    /// Builds the network for a run; per-node bandwidths come from the run's
    /// RNG stream so heterogeneous runs stay reproducible.
    pub fn from_config(cfg: &RunConfig, block_count: u32) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut rates = Vec::with_capacity(cfg.n + 1);
        rates.push(cfg.cloud_bandwidth / 1000.0);
        let (lo, hi) = cfg.bw_range;
        for _ in 0..cfg.n {
            let factor = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
            rates.push(cfg.edge_bandwidth * factor / 1000.0);
        }
        let params = NetParams {
            failure_rate: cfg.failure_rate,
            delay_lo_ms: cfg.delay_lo_ms,
            delay_hi_ms: cfg.delay_hi_ms,
            cloud_delay_ms: cfg.cloud_delay_ms,
            block_size: cfg.block_size,
            rates,
            horizon_ms: cfg.horizon_ms,
        };
        let mut net = Net::new(cfg.n, params, cfg.seed, block_count);
        net.rng = rng;
        net
    }

    pub fn now(&self) -> Time {
        self.now
    }

    pub fn node_count(&self) -> usize {
        self.alive.len() - 1
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn params(&self) -> &NetParams {
        &self.params
    }

    /// Outbound rate of `node` in bytes per ms.
    pub fn rate(&self, node: NodeId) -> f64 {
        self.params.rates[node.index()]
    }

    pub fn is_alive(&self, node: NodeId) -> bool {
        self.alive[node.index()]
    }

    pub fn ledger(&self) -> &CostLedger {
        &self.ledger
    }

    pub fn take_ledger(&mut self) -> CostLedger {
        std::mem::take(&mut self.ledger)
    }

    pub fn events_processed(&self) -> u64 {
        self.events
    }

    pub fn enable_trace(&mut self, header: &str) {
        let mut trace = Trace::new();
        trace.header(header);
        self.trace = Some(trace);
    }

    pub fn take_trace(&mut self) -> Option<Trace> {
        self.trace.take()
    }

    pub fn trace_mut(&mut self) -> Option<&mut Trace> {
        self.trace.as_mut()
    }

    pub fn add_rule(&mut self, rule: LinkRule) {
        self.rules.push(rule);
    }

    fn push(&mut self, at: Time, action: Action<T>) {
        let seq = self.seq;
        self.seq += 1;
        self.queue.push(Scheduled { at, seq, action });
    }

    pub fn pending_events(&self) -> usize {
        self.queue.len()
    }

    /// Arms a timer for `node`; it is discarded if the node crashes first.
    pub fn schedule_timer(&mut self, node: NodeId, at: Time, timer: T) {
        let incarnation = self.incarnation[node.index()];
        self.push(at.max(self.now), Action::Timer { node, incarnation, timer });
    }

    pub fn schedule_fault(&mut self, fault: ScriptedFault) {
        let action = match fault.kind {
            FaultKind::Crash => Action::Crash(fault.node),
            FaultKind::Recover => Action::Recover(fault.node),
        };
        self.push(fault.at_ms, action);
    }

    /// Queues `msg` on the sender's outbound link. Crashed senders send
    /// nothing.
    pub fn send(&mut self, msg: Message) {
        let src = msg.src.index();
        if !self.alive[src] {
            return;
        }
        let link = &mut self.links[src];
        if msg.is_bulk() {
            link.bulk.push_back(msg);
        } else {
            link.control.push_back(msg);
        }
        self.mark_ready(NodeId(src as u32));
    }

    fn mark_ready(&mut self, node: NodeId) {
        let i = node.index();
        if !self.links[i].busy && !self.in_ready[i] {
            self.in_ready[i] = true;
            self.ready.push(node);
        }
    }

    /// Messages still waiting on `node`'s outbound link.
    pub fn queued(&self, node: NodeId) -> usize {
        let link = &self.links[node.index()];
        link.control.len() + link.bulk.len()
    }

    fn next_ready(&mut self) -> Option<NodeId> {
        let node = self.ready.pop()?;
        self.in_ready[node.index()] = false;
        Some(node)
    }

    fn pop_queued(&mut self, node: NodeId) -> Option<Message> {
        let link = &mut self.links[node.index()];
        if link.busy {
            return None;
        }
        link.control.pop_front().or_else(|| link.bulk.pop_front())
    }

    fn sample_delay(&mut self, msg: &Message) -> f64 {
        let kind = msg.kind();
        if let Some(fixed) = self.rules.iter().find_map(|r| match r.effect {
            LinkEffect::Delay(d) if r.matches(self.now, msg.src, msg.dst, kind) => Some(d),
            _ => None,
        }) {
            return fixed;
        }
        if msg.src.is_cloud() || msg.dst.is_cloud() {
            return self.params.cloud_delay_ms;
        }
        let (lo, hi) = (self.params.delay_lo_ms, self.params.delay_hi_ms);
        if hi > lo {
            self.rng.gen_range(lo..=hi)
        } else {
            lo
        }
    }

    fn start_transfer(&mut self, msg: Message) -> Transfer {
        let src = msg.src;
        let bytes = msg.wire_bytes(self.params.block_size);
        let finish = self.now + bytes as f64 / self.params.rates[src.index()];
        self.links[src.index()].busy = true;
        self.push(finish, Action::LinkFree(src));

        let kind = msg.kind();
        let blocked = self.rules.iter().any(|r| {
            matches!(r.effect, LinkEffect::Block) && r.matches(self.now, src, msg.dst, kind)
        });
        let dropped = blocked
            || (msg.is_bulk()
                && self.params.failure_rate > 0.0
                && self.rng.gen::<f64>() < self.params.failure_rate);
        self.ledger.record(self.now, &msg, bytes, dropped);
        if let Some(trace) = self.trace.as_mut() {
            let extra = format!("payload={} bytes={bytes}", msg.payload_blocks().len());
            trace.message(self.now, if dropped { "drop" } else { "send" }, &msg, &extra);
        }
        if !dropped {
            let delay = self.sample_delay(&msg);
            self.push(finish + delay, Action::Deliver(msg));
        }
        Transfer { finish, dropped }
    }
}

/// Behaviour plugged into the engine.
pub trait Protocol {
    type Timer: Clone + Debug;

    fn start(&mut self, net: &mut Net<Self::Timer>);
    fn on_message(&mut self, net: &mut Net<Self::Timer>, msg: Message);
    fn on_timer(&mut self, net: &mut Net<Self::Timer>, node: NodeId, timer: Self::Timer);

    fn on_crash(&mut self, _net: &mut Net<Self::Timer>, _node: NodeId) {}
    fn on_recover(&mut self, _net: &mut Net<Self::Timer>, _node: NodeId) {}

    /// Last chance to skip a queued message as its link frees up.
    fn admit(&mut self, _net: &Net<Self::Timer>, _msg: &Message) -> bool {
        true
    }

    /// Called once a message is on the wire.
    fn on_transfer(&mut self, _net: &mut Net<Self::Timer>, _msg: &Message, _transfer: Transfer) {}

    /// True once the protocol's goal is reached.
    fn done(&self) -> bool;
}

pub struct Sim<P: Protocol> {
    pub net: Net<P::Timer>,
    pub proto: P,
    started: bool,
}

impl<P: Protocol> Sim<P> {
    pub fn new(mut net: Net<P::Timer>, proto: P, faults: &FaultPlan) -> Self {
        for f in &faults.scripted {
            net.schedule_fault(*f);
        }
        for r in &faults.link_rules {
            net.add_rule(*r);
        }
        Sim {
            net,
            proto,
            started: false,
        }
    }

    fn ensure_started(&mut self) {
        if !self.started {
            self.started = true;
            self.proto.start(&mut self.net);
            self.service_links();
        }
    }

    fn service_links(&mut self) {
        while let Some(node) = self.net.next_ready() {
            while let Some(msg) = self.net.pop_queued(node) {
                if !self.proto.admit(&self.net, &msg) {
                    continue;
                }
                let transfer = self.net.start_transfer(msg.clone());
                self.proto.on_transfer(&mut self.net, &msg, transfer);
            }
        }
    }

    /// Processes the next event. Returns false when the queue is empty.
    pub fn step(&mut self) -> bool {
        self.ensure_started();
        let Some(ev) = self.net.queue.pop() else {
            return false;
        };
        self.net.now = ev.at;
        self.net.events += 1;
        let net = &mut self.net;
        match ev.action {
            Action::Deliver(msg) => {
                if net.alive[msg.dst.index()] {
                    if let Some(t) = net.trace.as_mut() {
                        t.message(net.now, "deliver", &msg, "");
                    }
                    self.proto.on_message(net, msg);
                } else if let Some(t) = net.trace.as_mut() {
                    t.message(net.now, "discard", &msg, "");
                }
            }
            Action::Timer {
                node,
                incarnation,
                timer,
            } => {
                if net.alive[node.index()] && net.incarnation[node.index()] == incarnation {
                    if let Some(t) = net.trace.as_mut() {
                        t.line(net.now, "timer", node, node, "-", &format!("{timer:?}"));
                    }
                    self.proto.on_timer(net, node, timer);
                }
            }
            Action::Crash(node) => {
                let i = node.index();
                if net.alive[i] && !node.is_cloud() {
                    net.alive[i] = false;
                    net.incarnation[i] += 1;
                    net.links[i].control.clear();
                    net.links[i].bulk.clear();
                    if let Some(t) = net.trace.as_mut() {
                        t.line(net.now, "crash", node, node, "-", "");
                    }
                    self.proto.on_crash(net, node);
                }
            }
            Action::Recover(node) => {
                let i = node.index();
                if !net.alive[i] {
                    net.alive[i] = true;
                    if let Some(t) = net.trace.as_mut() {
                        t.line(net.now, "recover", node, node, "-", "");
                    }
                    self.proto.on_recover(net, node);
                }
            }
            Action::LinkFree(node) => {
                net.links[node.index()].busy = false;
                net.mark_ready(node);
            }
        }
        self.service_links();
        true
    }

    /// Runs until `until` holds. Fails with [`Error::Stalled`] if the queue
    /// drains or the horizon passes first.
    pub fn run(&mut self, mut until: impl FnMut(&P, &Net<P::Timer>) -> bool) -> Result<Time, Error> {
        self.ensure_started();
        loop {
            if until(&self.proto, &self.net) {
                return Ok(self.net.now);
            }
            if self.net.now > self.net.params.horizon_ms {
                return Err(Error::Stalled {
                    at_ms: self.net.now,
                    reason: "horizon reached".into(),
                });
            }
            if !self.step() {
                return Err(Error::Stalled {
                    at_ms: self.net.now,
                    reason: "no pending events".into(),
                });
            }
        }
    }

    /// Runs until the protocol reports done.
    pub fn run_to_completion(&mut self) -> Result<Time, Error> {
        self.run(|p, _| p.done())
    }

    /// Processes every event scheduled at or before `t`, then sets the clock
    /// to `t`.
    pub fn run_until_time(&mut self, t: Time) {
        self.ensure_started();
        while self.net.queue.peek().is_some_and(|e| e.at <= t) {
            self.step();
        }
        self.net.now = self.net.now.max(t);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BlockId, Body};

    #[derive(Default)]
    struct Echo {
        delivered: Vec<(Time, Message)>,
        fired: Vec<(Time, NodeId, u32)>,
        goal: usize,
    }

    impl Protocol for Echo {
        type Timer = u32;
        fn start(&mut self, _net: &mut Net<u32>) {}
        fn on_message(&mut self, net: &mut Net<u32>, msg: Message) {
            self.delivered.push((net.now(), msg));
        }
        fn on_timer(&mut self, net: &mut Net<u32>, node: NodeId, timer: u32) {
            self.fired.push((net.now(), node, timer));
        }
        fn done(&self) -> bool {
            self.delivered.len() >= self.goal
        }
    }

    fn params(n: usize, rate: f64, delay: f64) -> NetParams {
        NetParams {
            failure_rate: 0.0,
            delay_lo_ms: delay,
            delay_hi_ms: delay,
            cloud_delay_ms: 100.0,
            block_size: 1000,
            rates: vec![rate; n + 1],
            horizon_ms: 1e9,
        }
    }

    fn block(src: u32, dst: u32, b: u32) -> Message {
        Message::new(NodeId(src), NodeId(dst), Body::BlockTransmission { block: BlockId(b) })
    }

    #[test]
    fn empty_system_is_done_at_zero() {
        let net = Net::new(2, params(2, 1.0, 1.0), 1, 1);
        let mut sim = Sim::new(net, Echo::default(), &FaultPlan::default());
        assert_eq!(sim.run_to_completion().unwrap(), 0.0);
    }

    #[test]
    fn timer_fires_at_its_time() {
        let net = Net::new(2, params(2, 1.0, 1.0), 1, 1);
        let mut sim = Sim::new(net, Echo::default(), &FaultPlan::default());
        sim.net.schedule_timer(NodeId(1), 50.0, 7);
        let t = sim.run(|p, _| !p.fired.is_empty()).unwrap();
        assert_eq!(t, 50.0);
    }

    #[test]
    fn link_serialises_transfers() {
        // 1012 bytes at 101.2 bytes/ms is 10 ms on the wire, plus 5 ms delay.
        let net = Net::new(3, params(3, 101.2, 5.0), 1, 4);
        let mut sim = Sim::new(net, Echo { goal: 2, ..Default::default() }, &FaultPlan::default());
        sim.net.send(block(1, 2, 1));
        sim.net.send(block(1, 3, 2));
        sim.run_to_completion().unwrap();
        let times: Vec<f64> = sim.proto.delivered.iter().map(|(t, _)| *t).collect();
        assert!((times[0] - 15.0).abs() < 1e-9);
        assert!((times[1] - 25.0).abs() < 1e-9);
    }

    #[test]
    fn control_overtakes_queued_blocks() {
        let net = Net::new(3, params(3, 101.2, 5.0), 1, 4);
        let mut sim = Sim::new(net, Echo { goal: 3, ..Default::default() }, &FaultPlan::default());
        sim.net.send(block(1, 2, 1));
        sim.run_until_time(0.0);
        sim.net.send(block(1, 2, 2));
        sim.net.send(Message::new(
            NodeId(1),
            NodeId(2),
            Body::DistributionCompletion { block: BlockId(1) },
        ));
        sim.run_to_completion().unwrap();
        let kinds: Vec<_> = sim.proto.delivered.iter().map(|(_, m)| m.kind()).collect();
        use crate::model::MessageKind::*;
        assert_eq!(kinds, vec![BlockTransmission, DistributionCompletion, BlockTransmission]);
    }

    #[test]
    fn crashed_node_drops_timers_and_deliveries() {
        let net = Net::new(2, params(2, 1e9, 5.0), 1, 4);
        let plan = FaultPlan::default().crash(1.0, 2);
        let mut sim = Sim::new(net, Echo::default(), &plan);
        sim.net.schedule_timer(NodeId(2), 10.0, 1);
        sim.net.send(block(1, 2, 1));
        sim.run_until_time(100.0);
        assert!(sim.proto.delivered.is_empty());
        assert!(sim.proto.fired.is_empty());
        assert_eq!(sim.net.ledger().entries.len(), 1);
    }

    #[test]
    fn equal_times_keep_insertion_order() {
        let net = Net::new(2, params(2, 1.0, 1.0), 1, 1);
        let mut sim = Sim::new(net, Echo::default(), &FaultPlan::default());
        for i in 0..5 {
            sim.net.schedule_timer(NodeId(1), 10.0, i);
        }
        sim.run_until_time(10.0);
        let order: Vec<u32> = sim.proto.fired.iter().map(|f| f.2).collect();
        assert_eq!(order, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn stalls_when_queue_drains() {
        let net = Net::new(2, params(2, 1.0, 1.0), 1, 1);
        let mut sim = Sim::new(net, Echo { goal: 1, ..Default::default() }, &FaultPlan::default());
        assert!(matches!(sim.run_to_completion(), Err(Error::Stalled { .. })));
    }
}
