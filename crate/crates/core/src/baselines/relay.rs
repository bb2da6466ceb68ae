//! Cloud stop-and-wait streams plus hop-by-hop acknowledged forwarding.
//! DataSync, Gossip and EDD-A differ only in how streams are laid out and
//! where an edge server forwards a block it has just received.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::metrics::Counters;
use crate::model::{BlockId, BlockSet, Body, Message, NodeId};
use crate::simnet::{Net, Protocol, Topology, Transfer};

const EPS: f64 = 1e-9;

#[derive(Clone, Debug)]
pub enum Forwarding {
    /// Edge servers keep what they get.
    None,
    /// Push to every topology neighbour except the one it came from.
    Neighbors(Topology),
    /// Push to tree children; index 0 is unused.
    Tree(Vec<Vec<NodeId>>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StreamTarget {
    Fixed(NodeId),
    /// A fresh uniformly random server for every block.
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct InFlight {
    block: BlockId,
    node: NodeId,
    deadline: f64,
}

#[derive(Clone, Debug)]
struct Stream {
    target: StreamTarget,
    next: u32,
    in_flight: Option<InFlight>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Timer {
    CloudRetry { stream: usize, block: BlockId },
    HopRetry { to: NodeId, block: BlockId },
}

#[derive(Clone, Copy, Debug, Default)]
struct Due {
    at: f64,
    armed: bool,
}

type Hop = (u32, u32, u32);

fn hop(from: NodeId, to: NodeId, block: BlockId) -> Hop {
    (from.0, to.0, block.0)
}

pub struct Relay {
    n: usize,
    block_count: u32,
    distribution_timeout_ms: f64,
    transmission_timeout_ms: f64,
    forwarding: Forwarding,
    /// Skip a hop when the neighbour already started sending the block back.
    skip_reverse: bool,
    streams: Vec<Stream>,
    have: Vec<BlockSet>,
    /// Forwards queued but not yet on the wire.
    intended: BTreeSet<Hop>,
    started: BTreeSet<Hop>,
    acked: BTreeSet<Hop>,
    due: BTreeMap<Hop, Due>,
    complete: usize,
    finish: Option<f64>,
    counters: Counters,
}

impl Relay {
    pub fn new(
        n: usize,
        block_count: u32,
        distribution_timeout_ms: f64,
        transmission_timeout_ms: f64,
        targets: Vec<StreamTarget>,
        forwarding: Forwarding,
        skip_reverse: bool,
    ) -> Self {
        let streams = targets
            .into_iter()
            .map(|target| Stream {
                target,
                next: 1,
                in_flight: None,
            })
            .collect();
        let have = (0..=n)
            .map(|i| BlockSet::new(if i == 0 { 0 } else { block_count }))
            .collect();
        Relay {
            n,
            block_count,
            distribution_timeout_ms,
            transmission_timeout_ms,
            forwarding,
            skip_reverse,
            streams,
            have,
            intended: BTreeSet::new(),
            started: BTreeSet::new(),
            acked: BTreeSet::new(),
            due: BTreeMap::new(),
            complete: 0,
            finish: None,
            counters: Counters::default(),
        }
    }

    pub fn finish(&self) -> Option<f64> {
        self.finish
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn holds(&self, node: NodeId, block: BlockId) -> bool {
        self.have[node.index()].contains(block)
    }

    fn stream_send(&mut self, net: &mut Net<Timer>, s: usize) {
        let stream = &mut self.streams[s];
        if stream.in_flight.is_some() || stream.next > self.block_count {
            return;
        }
        let block = BlockId(stream.next);
        stream.next += 1;
        let node = match stream.target {
            StreamTarget::Fixed(node) => node,
            StreamTarget::Random => NodeId(net.rng().gen_range(1..=self.n as u32)),
        };
        stream.in_flight = Some(InFlight {
            block,
            node,
            deadline: f64::INFINITY,
        });
        net.send(Message::new(
            NodeId::CLOUD,
            node,
            Body::DataBlockDistribution { block },
        ));
    }

    fn forward(&mut self, net: &mut Net<Timer>, node: NodeId, from: NodeId, block: BlockId) {
        let targets: Vec<NodeId> = match &self.forwarding {
            Forwarding::None => Vec::new(),
            Forwarding::Neighbors(topo) => topo.neighbors(node).filter(|&v| v != from).collect(),
            Forwarding::Tree(children) => children[node.index()].clone(),
        };
        for to in targets {
            self.intended.insert(hop(node, to, block));
            net.send(Message::new(node, to, Body::BlockTransmission { block }));
        }
    }

    fn arm_hop(&mut self, net: &mut Net<Timer>, key: Hop, at: f64) {
        let due = self.due.entry(key).or_default();
        due.at = due.at.max(at);
        if !due.armed {
            due.armed = true;
            net.schedule_timer(
                NodeId(key.0),
                at,
                Timer::HopRetry {
                    to: NodeId(key.1),
                    block: BlockId(key.2),
                },
            );
        }
    }
}

impl Protocol for Relay {
    type Timer = Timer;

    fn start(&mut self, net: &mut Net<Timer>) {
        for s in 0..self.streams.len() {
            self.stream_send(net, s);
        }
    }

    fn on_message(&mut self, net: &mut Net<Timer>, msg: Message) {
        let now = net.now();
        let (src, dst) = (msg.src, msg.dst);
        match msg.body {
            Body::BlockReceipt { block, .. } if dst.is_cloud() => {
                let s = self.streams.iter().position(|s| {
                    s.in_flight
                        .is_some_and(|f| f.block == block && f.node == src)
                });
                if let Some(s) = s {
                    self.streams[s].in_flight = None;
                    self.stream_send(net, s);
                }
            }
            Body::BlockReceipt { block, .. } => {
                self.acked.insert(hop(dst, src, block));
            }
            Body::DataBlockDistribution { block } | Body::BlockTransmission { block } => {
                net.send(Message::new(
                    dst,
                    src,
                    Body::BlockReceipt {
                        block,
                        status: true,
                    },
                ));
                if self.have[dst.index()].insert(block) {
                    if self.have[dst.index()].is_full() {
                        self.complete += 1;
                        if self.complete == self.n {
                            self.finish = Some(now);
                        }
                    }
                    self.forward(net, dst, src, block);
                }
            }
            _ => {}
        }
    }

    fn on_timer(&mut self, net: &mut Net<Timer>, node: NodeId, timer: Timer) {
        let now = net.now();
        match timer {
            Timer::CloudRetry { stream, block } => {
                let Some(f) = self.streams[stream].in_flight else {
                    return;
                };
                if f.block != block || f.deadline > now + EPS {
                    return;
                }
                self.counters.retransmits += 1;
                net.send(Message::new(
                    NodeId::CLOUD,
                    f.node,
                    Body::DataBlockDistribution { block },
                ));
            }
            Timer::HopRetry { to, block } => {
                let key = hop(node, to, block);
                if self.acked.contains(&key) {
                    self.due.remove(&key);
                    return;
                }
                let Some(due) = self.due.get_mut(&key) else {
                    return;
                };
                due.armed = false;
                if now + EPS < due.at {
                    let at = due.at;
                    self.arm_hop(net, key, at);
                    return;
                }
                self.counters.retransmits += 1;
                net.send(Message::new(node, to, Body::BlockTransmission { block }));
            }
        }
    }

    fn on_recover(&mut self, net: &mut Net<Timer>, node: NodeId) {
        // Forwarding duty survives a crash; re-queue what was lost with the
        // link queue and re-arm retries.
        let lo = (node.0, 0, 0);
        let hi = (node.0, u32::MAX, u32::MAX);
        let queued: Vec<Hop> = self.intended.range(lo..=hi).copied().collect();
        for (_, to, b) in queued {
            net.send(Message::new(node, NodeId(to), Body::BlockTransmission { block: BlockId(b) }));
        }
        let unacked: Vec<Hop> = self
            .due
            .range(lo..=hi)
            .map(|(k, _)| *k)
            .filter(|k| !self.acked.contains(k))
            .collect();
        let now = net.now();
        for key in unacked {
            if let Some(d) = self.due.get_mut(&key) {
                d.armed = false;
            }
            self.arm_hop(net, key, now + self.transmission_timeout_ms);
        }
    }

    fn admit(&mut self, _net: &Net<Timer>, msg: &Message) -> bool {
        let Body::BlockTransmission { block } = msg.body else {
            return true;
        };
        let key = hop(msg.src, msg.dst, block);
        if self.started.contains(&key) {
            return !self.acked.contains(&key);
        }
        if self.skip_reverse && self.started.contains(&hop(msg.dst, msg.src, block)) {
            self.intended.remove(&key);
            return false;
        }
        true
    }

    fn on_transfer(&mut self, net: &mut Net<Timer>, msg: &Message, transfer: Transfer) {
        match msg.body {
            Body::BlockTransmission { block } => {
                let key = hop(msg.src, msg.dst, block);
                self.intended.remove(&key);
                self.started.insert(key);
                self.arm_hop(net, key, transfer.finish + self.transmission_timeout_ms);
            }
            Body::DataBlockDistribution { block } => {
                let deadline = transfer.finish + self.distribution_timeout_ms;
                let s = self.streams.iter().position(|s| {
                    s.in_flight
                        .is_some_and(|f| f.block == block && f.node == msg.dst)
                });
                if let Some(s) = s {
                    if let Some(f) = self.streams[s].in_flight.as_mut() {
                        f.deadline = deadline;
                    }
                    net.schedule_timer(NodeId::CLOUD, deadline, Timer::CloudRetry { stream: s, block });
                }
            }
            _ => {}
        }
    }

    fn done(&self) -> bool {
        self.finish.is_some()
    }
}
