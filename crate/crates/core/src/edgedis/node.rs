//! Per-server EdgeDis state and its message handlers.
//!
//! Handlers are plain state transitions that return the messages to send;
//! timers, randomness and delivery are the driver's business.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::{majority, BlockId, BlockSet, Body, Message, NodeId, Role, TermId};

/// Sender-side bookkeeping for one block this node is fanning out.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Fanout {
    pub pending: BTreeSet<NodeId>,
    pub acked: BTreeSet<NodeId>,
    pub committed: bool,
}

/// Latest receipt from one follower, as seen by the coordinator.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FollowerView {
    pub max_block: u32,
    pub missing: BTreeSet<BlockId>,
}

impl FollowerView {
    pub fn holds(&self, block: BlockId) -> bool {
        block.0 <= self.max_block && !self.missing.contains(&block)
    }
}

/// Coordinator-only state; cleared whenever the role is lost.
#[derive(Clone, Debug, Default)]
pub struct CoordinatorState {
    pub views: BTreeMap<NodeId, FollowerView>,
    /// Blocks asked for, with the time a new request becomes allowed.
    pub requested: BTreeMap<BlockId, f64>,
    /// Supplements waiting for their grace period, per follower.
    pub plans: BTreeMap<NodeId, BTreeSet<BlockId>>,
    /// No second supplement of a block to a follower before this time.
    pub supplied_until: BTreeMap<(NodeId, BlockId), f64>,
}

/// Waiting periods the coordinator applies before repairing a follower.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RepairTiming {
    /// Delay between planning a supplement and sending it.
    pub grace_ms: f64,
    /// How long a block must have been known before it counts as lost.
    pub stall_ms: f64,
    /// Wire time of one block on this node's link.
    pub block_tx_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReceiptEffect {
    pub request: Option<Message>,
    /// Send a supplement to the receipt's author at this time.
    pub supply_at: Option<f64>,
    pub stepped_down: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VoteOutcome {
    Nothing,
    Elected,
    SteppedDown,
}

#[derive(Clone, Debug)]
pub struct NodeState {
    pub id: NodeId,
    pub n: usize,
    pub role: Role,
    pub term: TermId,
    pub supported: Option<NodeId>,
    pub coordinator: Option<NodeId>,
    pub blocks: BlockSet,
    /// Largest block id this node knows to exist.
    pub max_block: u32,
    /// Ids up to `max_block` that are not held yet.
    pub missing: BTreeSet<BlockId>,
    perceived_at: Vec<f64>,
    pub fanouts: BTreeMap<BlockId, Fanout>,
    pub votes: BTreeSet<NodeId>,
    pub coord: CoordinatorState,
    pub election_deadline: f64,
}

impl NodeState {
    pub fn new(id: NodeId, n: usize, block_count: u32) -> Self {
        NodeState {
            id,
            n,
            role: Role::Follower,
            term: 0,
            supported: None,
            coordinator: None,
            blocks: BlockSet::new(block_count),
            max_block: 0,
            missing: BTreeSet::new(),
            perceived_at: vec![f64::INFINITY; block_count as usize],
            fanouts: BTreeMap::new(),
            votes: BTreeSet::new(),
            coord: CoordinatorState::default(),
            election_deadline: f64::INFINITY,
        }
    }

    pub fn holds(&self, block: BlockId) -> bool {
        self.blocks.contains(block)
    }

    pub fn total_blocks(&self) -> u32 {
        self.blocks.held()
    }

    pub fn is_complete(&self) -> bool {
        self.blocks.is_full()
    }

    fn others(&self) -> impl Iterator<Item = NodeId> + '_ {
        (1..=self.n as u32).map(NodeId).filter(move |&v| v != self.id)
    }

    /// Records that blocks up to `max` exist.
    pub fn perceive(&mut self, max: u32, now: f64) {
        let max = max.min(self.blocks.capacity());
        if max <= self.max_block {
            return;
        }
        for id in self.max_block + 1..=max {
            let b = BlockId(id);
            self.perceived_at[b.index()] = now;
            if !self.blocks.contains(b) {
                self.missing.insert(b);
            }
        }
        self.max_block = max;
    }

    /// When `block` was first known to exist; infinity if never.
    pub fn perceived_at(&self, block: BlockId) -> f64 {
        self.perceived_at
            .get(block.index())
            .copied()
            .unwrap_or(f64::INFINITY)
    }

    /// Returns true when the block is new to this node.
    pub fn store(&mut self, block: BlockId, now: f64) -> bool {
        if block.0 == 0 || block.0 > self.blocks.capacity() {
            return false;
        }
        self.perceive(block.0, now);
        self.missing.remove(&block);
        self.blocks.insert(block)
    }

    fn completion(&self, block: BlockId) -> Message {
        Message::new(self.id, NodeId::CLOUD, Body::DistributionCompletion { block })
    }

    fn transmission(&self, dst: NodeId, block: BlockId) -> Message {
        Message::new(self.id, dst, Body::BlockTransmission { block })
    }

    /// The node received a block straight from the cloud and now owns its
    /// fan-out.
    pub fn sender_on_block(&mut self, block: BlockId, now: f64) -> Vec<Message> {
        self.store(block, now);
        if let Some(f) = self.fanouts.get(&block) {
            if f.committed {
                return vec![self.completion(block)];
            }
            return f.pending.iter().map(|&d| self.transmission(d, block)).collect();
        }
        let pending: BTreeSet<NodeId> = self.others().collect();
        let mut out: Vec<Message> = pending.iter().map(|&d| self.transmission(d, block)).collect();
        let committed = majority(self.n) <= 1;
        if committed {
            out.push(self.completion(block));
        }
        self.fanouts.insert(
            block,
            Fanout {
                pending,
                acked: BTreeSet::new(),
                committed,
            },
        );
        out
    }

    /// Counts a receipt; emits the completion once a majority holds the block.
    pub fn sender_on_receipt(&mut self, from: NodeId, block: BlockId) -> Option<Message> {
        let need = majority(self.n) - 1;
        let f = self.fanouts.get_mut(&block)?;
        f.pending.remove(&from);
        f.acked.insert(from);
        if !f.committed && f.acked.len() >= need {
            f.committed = true;
            return Some(self.completion(block));
        }
        None
    }

    /// Resends `block` to every server that has not acknowledged it.
    pub fn retransmit_tick(&mut self, block: BlockId) -> Vec<Message> {
        match self.fanouts.get(&block) {
            Some(f) => f.pending.iter().map(|&d| self.transmission(d, block)).collect(),
            None => Vec::new(),
        }
    }

    pub fn fanout_pending(&self, block: BlockId, dst: NodeId) -> bool {
        self.fanouts
            .get(&block)
            .is_none_or(|f| f.pending.contains(&dst))
    }

    pub fn receiver_on_block(&mut self, from: NodeId, block: BlockId, now: f64) -> Message {
        self.store(block, now);
        Message::new(
            self.id,
            from,
            Body::BlockReceipt {
                block,
                status: true,
            },
        )
    }

    pub fn store_all(&mut self, blocks: &[BlockId], now: f64) {
        for &b in blocks {
            self.store(b, now);
        }
    }

    pub fn heartbeats(&self) -> Vec<Message> {
        if self.role != Role::Coordinator {
            return Vec::new();
        }
        self.others()
            .map(|d| {
                Message::new(
                    self.id,
                    d,
                    Body::Heartbeat {
                        max_block: self.max_block,
                        term: self.term,
                        coordinator: self.id,
                    },
                )
            })
            .collect()
    }

    fn adopt_term(&mut self, term: TermId) {
        if term > self.term {
            self.term = term;
            self.supported = None;
        }
    }

    fn step_down(&mut self) {
        self.role = Role::Follower;
        self.votes.clear();
        self.coord = CoordinatorState::default();
    }

    /// Returns the receipt and whether the heartbeat was accepted as coming
    /// from a legitimate coordinator.
    pub fn follower_on_heartbeat(
        &mut self,
        from: NodeId,
        max_block: u32,
        term: TermId,
        coordinator: NodeId,
        now: f64,
    ) -> (Message, bool) {
        self.perceive(max_block, now);
        let accepted = term >= self.term;
        if accepted {
            let newer = term > self.term;
            self.adopt_term(term);
            if self.role == Role::Candidate || (newer && self.role == Role::Coordinator) {
                self.step_down();
            }
            if self.role != Role::Coordinator {
                self.coordinator = Some(coordinator);
            }
        }
        let receipt = Message::new(
            self.id,
            from,
            Body::HeartbeatReceipt {
                max_block: self.max_block,
                missing: self.missing.iter().copied().collect(),
                term: self.term,
            },
        );
        (receipt, accepted)
    }

    pub fn coordinator_on_receipt(
        &mut self,
        from: NodeId,
        max_block: u32,
        missing: &[BlockId],
        term: TermId,
        now: f64,
        timing: &RepairTiming,
    ) -> ReceiptEffect {
        let mut effect = ReceiptEffect::default();
        if term > self.term {
            effect.stepped_down = self.role == Role::Coordinator;
            self.adopt_term(term);
            if self.role != Role::Follower {
                self.step_down();
            }
            self.coordinator = None;
            return effect;
        }
        if self.role != Role::Coordinator {
            return effect;
        }
        self.perceive(max_block, now);
        let view = FollowerView {
            max_block,
            missing: missing.iter().copied().collect(),
        };

        let mut wanted = Vec::new();
        for &b in &self.missing {
            if b.0 > max_block {
                break;
            }
            let overdue = now >= self.perceived_at(b) + timing.stall_ms;
            let retry_ok = self.coord.requested.get(&b).is_none_or(|&t| now >= t);
            if overdue && retry_ok && view.holds(b) {
                wanted.push(b);
            }
        }
        if !wanted.is_empty() {
            for &b in &wanted {
                self.coord.requested.insert(b, now + timing.stall_ms);
            }
            effect.request = Some(Message::new(
                self.id,
                from,
                Body::BlockRequest { blocks: wanted },
            ));
        }

        let mut planned = Vec::new();
        for &b in &view.missing {
            if b.0 > self.max_block {
                break;
            }
            let overdue = now >= self.perceived_at(b) + timing.stall_ms;
            let resupply_ok = self
                .coord
                .supplied_until
                .get(&(from, b))
                .is_none_or(|&t| now >= t);
            if self.holds(b) && overdue && resupply_ok {
                planned.push(b);
            }
        }
        if !planned.is_empty() {
            let plan = self.coord.plans.entry(from).or_default();
            if plan.is_empty() {
                effect.supply_at = Some(now + timing.grace_ms);
            }
            plan.extend(planned);
        }
        self.coord.views.insert(from, view);
        effect
    }

    /// Sends the planned blocks the follower still reports missing.
    pub fn coordinator_supplement(
        &mut self,
        follower: NodeId,
        now: f64,
        timing: &RepairTiming,
    ) -> Option<Message> {
        if self.role != Role::Coordinator {
            return None;
        }
        let plan = self.coord.plans.remove(&follower)?;
        let view = self.coord.views.get(&follower)?;
        let blocks: Vec<BlockId> = plan
            .into_iter()
            .filter(|b| view.missing.contains(b) && self.blocks.contains(*b))
            .collect();
        if blocks.is_empty() {
            return None;
        }
        let busy_until = now + blocks.len() as f64 * timing.block_tx_ms + timing.stall_ms;
        for &b in &blocks {
            self.coord.supplied_until.insert((follower, b), busy_until);
        }
        Some(Message::new(
            self.id,
            follower,
            Body::BlockSupplement { blocks },
        ))
    }

    pub fn on_block_request(&self, from: NodeId, blocks: &[BlockId]) -> Message {
        let held = blocks.iter().copied().filter(|&b| self.holds(b)).collect();
        Message::new(self.id, from, Body::BlockResponse { blocks: held })
    }

    /// Starts an election for the next term. `next_deadline` is when the
    /// candidacy itself times out.
    pub fn on_coordinator_timeout(&mut self, next_deadline: f64) -> Vec<Message> {
        if self.role == Role::Coordinator {
            return Vec::new();
        }
        self.role = Role::Candidate;
        self.term += 1;
        self.supported = Some(self.id);
        self.coordinator = None;
        self.votes = BTreeSet::from([self.id]);
        self.election_deadline = next_deadline;
        if self.votes.len() >= majority(self.n) {
            self.become_coordinator();
            return Vec::new();
        }
        let request = Body::VoteRequest {
            term: self.term,
            candidate: self.id,
            total_blocks: self.total_blocks(),
        };
        self.others()
            .map(|d| Message::new(self.id, d, request.clone()))
            .collect()
    }

    fn become_coordinator(&mut self) {
        self.role = Role::Coordinator;
        self.coordinator = Some(self.id);
        self.coord = CoordinatorState::default();
    }

    /// Returns the response and whether the vote was granted.
    pub fn on_vote_request(
        &mut self,
        term: TermId,
        candidate: NodeId,
        total_blocks: u32,
    ) -> (Message, bool) {
        if term > self.term {
            self.adopt_term(term);
            if self.role != Role::Follower {
                self.step_down();
            }
            self.coordinator = None;
        }
        let granted = term == self.term
            && self.supported.is_none_or(|s| s == candidate)
            && total_blocks >= self.total_blocks();
        if granted {
            self.supported = Some(candidate);
        }
        let response = Message::new(
            self.id,
            candidate,
            Body::VoteResponse {
                supported: granted,
                term: self.term,
            },
        );
        (response, granted)
    }

    pub fn on_vote_response(&mut self, from: NodeId, supported: bool, term: TermId) -> VoteOutcome {
        if term > self.term {
            let was = self.role;
            self.adopt_term(term);
            self.step_down();
            self.coordinator = None;
            return if was == Role::Follower {
                VoteOutcome::Nothing
            } else {
                VoteOutcome::SteppedDown
            };
        }
        if self.role == Role::Candidate && term == self.term && supported {
            self.votes.insert(from);
            if self.votes.len() >= majority(self.n) {
                self.become_coordinator();
                return VoteOutcome::Elected;
            }
        }
        VoteOutcome::Nothing
    }

    /// Drops everything that does not survive a crash. Blocks, term and the
    /// vote cast in that term are kept.
    pub fn crash(&mut self) {
        self.role = Role::Follower;
        self.coordinator = None;
        self.fanouts.clear();
        self.votes.clear();
        self.coord = CoordinatorState::default();
        self.election_deadline = f64::INFINITY;
    }
}
