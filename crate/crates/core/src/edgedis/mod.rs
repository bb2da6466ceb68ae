//! The EdgeDis protocol: cloud dispatch to entry servers, majority-committed
//! fan-out, heartbeat-driven repair and coordinator election.

pub mod cloud;
pub mod monitor;
pub mod node;

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::config::RunConfig;
use crate::metrics::Counters;
use crate::model::{majority, BlockId, Body, Message, NodeId, Role, TermId};
use crate::simnet::{Net, Protocol, Transfer};

pub use cloud::{entry_count, select_entry_servers, CloudState, EntrySelection};
pub use monitor::{SafetyMonitor, Violation};
pub use node::{NodeState, RepairTiming};

const EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeDisConfig {
    pub n: usize,
    pub block_size: u64,
    pub coordinator_timeout_ms: f64,
    pub heartbeat_ms: f64,
    pub distribution_timeout_ms: f64,
    pub transmission_timeout_ms: f64,
    pub entry_fraction: f64,
    pub entries: EntrySelection,
    /// Wait between planning a supplement and sending it.
    pub grace_ms: f64,
    /// How long a block may stay in flight before the coordinator treats it
    /// as lost.
    pub stall_ms: f64,
    /// Expected time from a block leaving the cloud to its completion
    /// arriving back, on top of which the distribution timeout runs.
    pub commit_allowance_ms: f64,
    /// When false the cloud stays idle and only elections run.
    pub disseminate: bool,
    pub monitor: bool,
}

impl EdgeDisConfig {
    pub fn from_run(cfg: &RunConfig, entries: EntrySelection) -> Self {
        let tx = cfg.block_tx_max_ms();
        let fanout = cfg.n.saturating_sub(1) as f64 * tx;
        EdgeDisConfig {
            n: cfg.n,
            block_size: cfg.block_size,
            coordinator_timeout_ms: cfg.coordinator_timeout_ms,
            heartbeat_ms: cfg.heartbeat_ms,
            distribution_timeout_ms: cfg.distribution_timeout_ms,
            transmission_timeout_ms: cfg.transmission_timeout_ms,
            entry_fraction: cfg.entry_fraction,
            entries,
            grace_ms: 2.0 * cfg.delay_hi_ms,
            stall_ms: 3.0 * fanout + 3.0 * cfg.delay_hi_ms + 2.0 * cfg.heartbeat_ms,
            commit_allowance_ms: 2.0 * cfg.cloud_delay_ms
                + (majority(cfg.n) - 1) as f64 * tx
                + 2.0 * cfg.delay_hi_ms,
            disseminate: true,
            monitor: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Timer {
    Election,
    Heartbeat { term: TermId },
    Retransmit(BlockId),
    Supply(NodeId),
    Distribution(BlockId),
    /// Scripted: the named server behaves as if its election timer expired.
    /// Kept on the cloud's clock so that it survives the server's crashes.
    ForceTimeout(NodeId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cause {
    Start,
    Timeout,
    Heartbeat,
    HeartbeatReceipt,
    VoteRequest,
    VoteResponse,
    Crash,
    Recover,
}

/// A change in a node's (role, term).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoleChange {
    pub at_ms: f64,
    pub node: NodeId,
    pub term: TermId,
    pub role: Role,
    pub cause: Cause,
}

/// Initial role assignment for scripted scenarios.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeSetup {
    pub node: NodeId,
    pub role: Role,
    pub term: TermId,
    pub supported: Option<NodeId>,
    pub coordinator: Option<NodeId>,
}

#[derive(Clone, Copy, Debug, Default)]
struct Due {
    at: f64,
    armed: bool,
}

pub struct EdgeDis {
    cfg: EdgeDisConfig,
    block_count: u32,
    nodes: Vec<NodeState>,
    cloud: CloudState,
    election_armed: Vec<bool>,
    retransmits: Vec<BTreeMap<BlockId, Due>>,
    supply_armed: Vec<BTreeSet<NodeId>>,
    snapshot: Vec<(Role, TermId)>,
    completed_at: Vec<Option<f64>>,
    complete: usize,
    finish: Option<f64>,
    counters: Counters,
    log: Vec<RoleChange>,
    first_heartbeats: Vec<(f64, NodeId, TermId)>,
    monitor: SafetyMonitor,
    setup: Vec<NodeSetup>,
    script: Vec<(f64, NodeId)>,
}

impl EdgeDis {
    pub fn new(cfg: EdgeDisConfig, block_count: u32) -> Self {
        let n = cfg.n;
        let nodes = (0..=n as u32)
            .map(|i| NodeState::new(NodeId(i), n, if i == 0 { 0 } else { block_count }))
            .collect();
        EdgeDis {
            cfg,
            block_count,
            nodes,
            cloud: CloudState::new(block_count, Vec::new()),
            election_armed: vec![false; n + 1],
            retransmits: vec![BTreeMap::new(); n + 1],
            supply_armed: vec![BTreeSet::new(); n + 1],
            snapshot: vec![(Role::Follower, 0); n + 1],
            completed_at: vec![None; n + 1],
            complete: 0,
            finish: None,
            counters: Counters::default(),
            log: Vec::new(),
            first_heartbeats: Vec::new(),
            monitor: SafetyMonitor::default(),
            setup: Vec::new(),
            script: Vec::new(),
        }
    }

    /// Overrides the starting role and term of some nodes.
    pub fn with_setup(mut self, setup: Vec<NodeSetup>) -> Self {
        self.setup = setup;
        self
    }

    /// Forces an election timeout on `node` at `at_ms`.
    pub fn force_timeout(mut self, at_ms: f64, node: NodeId) -> Self {
        self.script.push((at_ms, node));
        self
    }

    pub fn config(&self) -> &EdgeDisConfig {
        &self.cfg
    }

    pub fn node(&self, id: NodeId) -> &NodeState {
        &self.nodes[id.index()]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeState> {
        self.nodes.iter().skip(1)
    }

    pub fn cloud(&self) -> &CloudState {
        &self.cloud
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn finish(&self) -> Option<f64> {
        self.finish
    }

    pub fn completed_at(&self, id: NodeId) -> Option<f64> {
        self.completed_at[id.index()]
    }

    pub fn role_log(&self) -> &[RoleChange] {
        &self.log
    }

    /// (time, node, term) of the first heartbeat round of every tenure.
    pub fn first_heartbeats(&self) -> &[(f64, NodeId, TermId)] {
        &self.first_heartbeats
    }

    pub fn violations(&self) -> &[Violation] {
        &self.monitor.violations
    }

    pub fn coordinators(&self) -> Vec<(NodeId, TermId)> {
        self.nodes()
            .filter(|s| s.role == Role::Coordinator)
            .map(|s| (s.id, s.term))
            .collect()
    }

    fn repair_timing(&self, net: &Net<Timer>, node: NodeId) -> RepairTiming {
        RepairTiming {
            grace_ms: self.cfg.grace_ms,
            stall_ms: self.cfg.stall_ms,
            block_tx_ms: (self.cfg.block_size + crate::model::HEADER_BYTES) as f64 / net.rate(node),
        }
    }

    fn send_all(&mut self, net: &mut Net<Timer>, msgs: Vec<Message>) {
        for m in msgs {
            net.send(m);
        }
    }

    fn dispatch(&mut self, net: &mut Net<Timer>) {
        let msgs = self.cloud.dispatch();
        self.send_all(net, msgs);
    }

    fn fresh_deadline(&self, net: &mut Net<Timer>) -> f64 {
        let t = self.cfg.coordinator_timeout_ms;
        net.now() + net.rng().gen_range(t..=2.0 * t)
    }

    fn reset_deadline(&mut self, net: &mut Net<Timer>, id: NodeId) {
        let deadline = self.fresh_deadline(net);
        self.nodes[id.index()].election_deadline = deadline;
        self.ensure_election_timer(net, id);
    }

    fn ensure_election_timer(&mut self, net: &mut Net<Timer>, id: NodeId) {
        let i = id.index();
        if !self.election_armed[i] && self.nodes[i].role != Role::Coordinator && net.is_alive(id) {
            self.election_armed[i] = true;
            net.schedule_timer(id, self.nodes[i].election_deadline, Timer::Election);
        }
    }

    fn after_store(&mut self, id: NodeId, now: f64) {
        let i = id.index();
        if self.completed_at[i].is_none() && self.nodes[i].is_complete() {
            self.completed_at[i] = Some(now);
            self.complete += 1;
            if self.complete == self.cfg.n {
                self.finish = Some(now);
            }
        }
    }

    fn check_completions(&mut self, now: f64, sender: NodeId, msgs: &[Message]) {
        if !self.cfg.monitor {
            return;
        }
        for m in msgs {
            if let Body::DistributionCompletion { block } = m.body {
                let holders = self.nodes().filter(|s| s.holds(block)).count();
                self.monitor
                    .completion_emitted(now, sender, holders, majority(self.cfg.n));
            }
        }
    }

    /// Records role/term changes and keeps the election timer consistent.
    fn observe(&mut self, net: &mut Net<Timer>, id: NodeId, cause: Cause) {
        let i = id.index();
        let (role, term) = (self.nodes[i].role, self.nodes[i].term);
        let (prev_role, prev_term) = self.snapshot[i];
        if (role, term) != (prev_role, prev_term) {
            let now = net.now();
            self.snapshot[i] = (role, term);
            self.log.push(RoleChange {
                at_ms: now,
                node: id,
                term,
                role,
                cause,
            });
            self.monitor.term_changed(now, id, prev_term, term);
            if role == Role::Coordinator && prev_role != Role::Coordinator {
                let others: Vec<(NodeId, Role, TermId)> =
                    self.nodes().map(|s| (s.id, s.role, s.term)).collect();
                self.monitor.became_coordinator(now, id, term, others.into_iter());
                self.start_heartbeats(net, id);
            }
            if prev_role == Role::Coordinator && role != Role::Coordinator && net.is_alive(id) {
                self.reset_deadline(net, id);
            }
        }
        if net.is_alive(id) {
            self.ensure_election_timer(net, id);
        }
    }

    fn start_heartbeats(&mut self, net: &mut Net<Timer>, id: NodeId) {
        let term = self.nodes[id.index()].term;
        self.first_heartbeats.push((net.now(), id, term));
        self.heartbeat_round(net, id, term);
    }

    fn heartbeat_round(&mut self, net: &mut Net<Timer>, id: NodeId, term: TermId) {
        let msgs = self.nodes[id.index()].heartbeats();
        self.send_all(net, msgs);
        let next = net.now() + self.cfg.heartbeat_ms;
        net.schedule_timer(id, next, Timer::Heartbeat { term });
    }

    fn election_timeout(&mut self, net: &mut Net<Timer>, id: NodeId) {
        let i = id.index();
        if self.nodes[i].role == Role::Coordinator {
            return;
        }
        self.counters.elections += 1;
        let next = self.fresh_deadline(net);
        let msgs = self.nodes[i].on_coordinator_timeout(next);
        if self.cfg.monitor {
            let term = self.nodes[i].term;
            self.monitor.vote_granted(net.now(), id, term, id);
        }
        self.send_all(net, msgs);
        self.observe(net, id, Cause::Timeout);
    }
}

impl Protocol for EdgeDis {
    type Timer = Timer;

    fn start(&mut self, net: &mut Net<Timer>) {
        let bandwidths: Vec<(NodeId, f64)> = (1..=self.cfg.n as u32)
            .map(|i| (NodeId(i), net.rate(NodeId(i))))
            .collect();
        let entries = select_entry_servers(
            &bandwidths,
            self.cfg.entry_fraction,
            self.cfg.entries,
            net.rng(),
        );
        self.cloud = CloudState::new(self.block_count, entries);

        for s in std::mem::take(&mut self.setup) {
            let node = &mut self.nodes[s.node.index()];
            node.role = s.role;
            node.term = s.term;
            node.supported = s.supported;
            node.coordinator = s.coordinator;
            self.snapshot[s.node.index()] = (s.role, s.term);
            if s.role == Role::Coordinator {
                self.first_heartbeats.push((0.0, s.node, s.term));
                self.heartbeat_round(net, s.node, s.term);
            }
        }
        for i in 1..=self.cfg.n as u32 {
            self.reset_deadline(net, NodeId(i));
        }
        for (at, node) in std::mem::take(&mut self.script) {
            net.schedule_timer(NodeId::CLOUD, at, Timer::ForceTimeout(node));
        }
        if self.cfg.disseminate {
            self.dispatch(net);
        }
    }

    fn on_message(&mut self, net: &mut Net<Timer>, msg: Message) {
        let now = net.now();
        let (src, dst) = (msg.src, msg.dst);
        if dst.is_cloud() {
            if let Body::DistributionCompletion { block } = msg.body {
                self.cloud.on_completion(block);
                self.dispatch(net);
            }
            return;
        }
        let i = dst.index();
        let mut cause = None;
        match msg.body {
            Body::DataBlockDistribution { block } => {
                let out = self.nodes[i].sender_on_block(block, now);
                self.check_completions(now, dst, &out);
                self.send_all(net, out);
                self.after_store(dst, now);
            }
            Body::BlockTransmission { block } => {
                let receipt = self.nodes[i].receiver_on_block(src, block, now);
                net.send(receipt);
                self.after_store(dst, now);
            }
            Body::BlockReceipt { block, .. } => {
                if let Some(done) = self.nodes[i].sender_on_receipt(src, block) {
                    self.check_completions(now, dst, std::slice::from_ref(&done));
                    net.send(done);
                }
            }
            Body::Heartbeat {
                max_block,
                term,
                coordinator,
            } => {
                let before = (self.nodes[i].role, self.nodes[i].term);
                let (receipt, accepted) =
                    self.nodes[i].follower_on_heartbeat(src, max_block, term, coordinator, now);
                if self.cfg.monitor
                    && before.0 == Role::Coordinator
                    && term > before.1
                    && self.nodes[i].role == Role::Coordinator
                {
                    self.monitor.stale_coordinator(now, dst, term, before.1);
                }
                if accepted {
                    self.reset_deadline(net, dst);
                }
                net.send(receipt);
                cause = Some(Cause::Heartbeat);
            }
            Body::HeartbeatReceipt {
                max_block,
                missing,
                term,
            } => {
                let timing = self.repair_timing(net, dst);
                let before = self.nodes[i].term;
                let effect =
                    self.nodes[i].coordinator_on_receipt(src, max_block, &missing, term, now, &timing);
                if self.cfg.monitor
                    && term > before
                    && self.nodes[i].role == Role::Coordinator
                {
                    self.monitor.stale_coordinator(now, dst, term, before);
                }
                if let Some(req) = effect.request {
                    net.send(req);
                }
                if let Some(at) = effect.supply_at {
                    if self.supply_armed[i].insert(src) {
                        net.schedule_timer(dst, at, Timer::Supply(src));
                    }
                }
                cause = Some(Cause::HeartbeatReceipt);
            }
            Body::BlockRequest { blocks } => {
                let resp = self.nodes[i].on_block_request(src, &blocks);
                net.send(resp);
            }
            Body::BlockResponse { blocks } | Body::BlockSupplement { blocks } => {
                self.nodes[i].store_all(&blocks, now);
                self.after_store(dst, now);
            }
            Body::VoteRequest {
                term,
                candidate,
                total_blocks,
            } => {
                let (resp, granted) = self.nodes[i].on_vote_request(term, candidate, total_blocks);
                if granted {
                    if self.cfg.monitor {
                        self.monitor.vote_granted(now, dst, term, candidate);
                    }
                    self.reset_deadline(net, dst);
                }
                net.send(resp);
                cause = Some(Cause::VoteRequest);
            }
            Body::VoteResponse { supported, term } => {
                self.nodes[i].on_vote_response(src, supported, term);
                cause = Some(Cause::VoteResponse);
            }
            Body::DistributionCompletion { .. } => {}
        }
        if let Some(cause) = cause {
            self.observe(net, dst, cause);
        }
    }

    fn on_timer(&mut self, net: &mut Net<Timer>, id: NodeId, timer: Timer) {
        let now = net.now();
        let i = id.index();
        match timer {
            Timer::Election => {
                self.election_armed[i] = false;
                if self.nodes[i].role == Role::Coordinator {
                    return;
                }
                if now + EPS < self.nodes[i].election_deadline {
                    self.ensure_election_timer(net, id);
                } else {
                    self.election_timeout(net, id);
                }
            }
            Timer::ForceTimeout(target) => {
                if net.is_alive(target) {
                    self.election_timeout(net, target);
                }
            }
            Timer::Heartbeat { term } => {
                let node = &self.nodes[i];
                if node.role == Role::Coordinator && node.term == term {
                    self.heartbeat_round(net, id, term);
                }
            }
            Timer::Retransmit(block) => {
                let Some(due) = self.retransmits[i].get_mut(&block) else {
                    return;
                };
                due.armed = false;
                if now + EPS < due.at {
                    due.armed = true;
                    let at = due.at;
                    net.schedule_timer(id, at, Timer::Retransmit(block));
                    return;
                }
                let msgs = self.nodes[i].retransmit_tick(block);
                if msgs.is_empty() {
                    self.retransmits[i].remove(&block);
                    return;
                }
                self.counters.retransmits += msgs.len() as u64;
                self.send_all(net, msgs);
            }
            Timer::Supply(follower) => {
                self.supply_armed[i].remove(&follower);
                let timing = self.repair_timing(net, id);
                if let Some(msg) = self.nodes[i].coordinator_supplement(follower, now, &timing) {
                    self.counters.supplements += 1;
                    net.send(msg);
                }
            }
            Timer::Distribution(block) => {
                if self.cloud.is_confirmed(block) {
                    return;
                }
                let expired = self
                    .cloud
                    .in_flight(block)
                    .is_some_and(|f| f.deadline <= now + EPS);
                if !expired {
                    return;
                }
                if let Some(msg) =
                    self.cloud
                        .on_distribution_timeout(block, self.cfg.n, net.rng())
                {
                    self.counters.retransmits += 1;
                    net.send(msg);
                }
                self.dispatch(net);
            }
        }
    }

    fn on_crash(&mut self, net: &mut Net<Timer>, id: NodeId) {
        let i = id.index();
        self.nodes[i].crash();
        self.election_armed[i] = false;
        self.retransmits[i].clear();
        self.supply_armed[i].clear();
        self.observe(net, id, Cause::Crash);
    }

    fn on_recover(&mut self, net: &mut Net<Timer>, id: NodeId) {
        self.reset_deadline(net, id);
        self.observe(net, id, Cause::Recover);
    }

    fn admit(&mut self, _net: &Net<Timer>, msg: &Message) -> bool {
        match msg.body {
            Body::BlockTransmission { block } => {
                self.nodes[msg.src.index()].fanout_pending(block, msg.dst)
            }
            Body::DataBlockDistribution { block } => !self.cloud.is_confirmed(block),
            _ => true,
        }
    }

    fn on_transfer(&mut self, net: &mut Net<Timer>, msg: &Message, transfer: Transfer) {
        match msg.body {
            Body::BlockTransmission { block } => {
                let s = msg.src;
                let due_at = transfer.finish + self.cfg.transmission_timeout_ms;
                let due = self.retransmits[s.index()].entry(block).or_default();
                due.at = due.at.max(due_at);
                if !due.armed {
                    due.armed = true;
                    net.schedule_timer(s, due_at, Timer::Retransmit(block));
                }
            }
            Body::DataBlockDistribution { block } if msg.src.is_cloud() => {
                let deadline = transfer.finish
                    + self.cfg.commit_allowance_ms
                    + self.cfg.distribution_timeout_ms;
                self.cloud.set_deadline(block, msg.dst, deadline);
                net.schedule_timer(NodeId::CLOUD, deadline, Timer::Distribution(block));
            }
            _ => {}
        }
    }

    fn done(&self) -> bool {
        self.finish.is_some()
    }
}
