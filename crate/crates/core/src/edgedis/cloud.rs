//! Cloud-side dispatch: one block in flight per entry server.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::model::{BlockId, Body, Message, NodeId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntrySelection {
    /// Highest-bandwidth servers, ties broken by id.
    Bandwidth,
    /// A uniform random sample of the same size.
    Random,
    /// One uniformly chosen server.
    SingleRandom,
}

/// Number of entry servers for `n` servers and the given fraction.
pub fn entry_count(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n.max(1))
}

/// Picks the entry servers. `bandwidths` lists every edge server.
pub fn select_entry_servers<R: Rng>(
    bandwidths: &[(NodeId, f64)],
    fraction: f64,
    selection: EntrySelection,
    rng: &mut R,
) -> Vec<NodeId> {
    let k = entry_count(bandwidths.len(), fraction);
    match selection {
        EntrySelection::Bandwidth => {
            let mut ranked = bandwidths.to_vec();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            ranked.into_iter().take(k).map(|(id, _)| id).collect()
        }
        EntrySelection::Random => {
            let mut ids: Vec<NodeId> = bandwidths.iter().map(|(id, _)| *id).collect();
            ids.shuffle(rng);
            ids.truncate(k);
            ids
        }
        EntrySelection::SingleRandom => {
            let pick = rng.gen_range(0..bandwidths.len());
            vec![bandwidths[pick].0]
        }
    }
}

/// A block the cloud is waiting to hear back about.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InFlight {
    pub block: BlockId,
    pub node: NodeId,
    pub deadline: f64,
}

#[derive(Clone, Debug)]
pub struct CloudState {
    confirmed: Vec<bool>,
    confirmed_count: u32,
    next_block: u32,
    pub entries: Vec<NodeId>,
    /// Block currently assigned to each entry.
    slots: BTreeMap<NodeId, Option<InFlight>>,
    /// Blocks resent to a random server after a timeout.
    reassigned: BTreeMap<BlockId, InFlight>,
}

impl CloudState {
    pub fn new(block_count: u32, entries: Vec<NodeId>) -> Self {
        let slots = entries.iter().map(|&e| (e, None)).collect();
        CloudState {
            confirmed: vec![false; block_count as usize],
            confirmed_count: 0,
            next_block: 1,
            entries,
            slots,
            reassigned: BTreeMap::new(),
        }
    }

    pub fn block_count(&self) -> u32 {
        self.confirmed.len() as u32
    }

    pub fn is_confirmed(&self, block: BlockId) -> bool {
        self.confirmed[block.index()]
    }

    pub fn confirmed_count(&self) -> u32 {
        self.confirmed_count
    }

    pub fn all_confirmed(&self) -> bool {
        self.confirmed_count == self.block_count()
    }

    /// Assigns the lowest unassigned blocks to idle entries, in entry order.
    /// Deadlines stay open until the transfer actually starts.
    pub fn dispatch(&mut self) -> Vec<Message> {
        let mut out = Vec::new();
        for &entry in &self.entries {
            if self.next_block > self.block_count() {
                break;
            }
            let slot = self.slots.get_mut(&entry).expect("entry has a slot");
            if slot.is_some() {
                continue;
            }
            let block = BlockId(self.next_block);
            self.next_block += 1;
            *slot = Some(InFlight {
                block,
                node: entry,
                deadline: f64::INFINITY,
            });
            out.push(Message::new(
                NodeId::CLOUD,
                entry,
                Body::DataBlockDistribution { block },
            ));
        }
        out
    }

    pub fn in_flight(&self, block: BlockId) -> Option<InFlight> {
        if let Some(r) = self.reassigned.get(&block) {
            return Some(*r);
        }
        self.slots.values().flatten().find(|f| f.block == block).copied()
    }

    pub fn set_deadline(&mut self, block: BlockId, node: NodeId, deadline: f64) {
        if let Some(r) = self.reassigned.get_mut(&block) {
            if r.node == node {
                r.deadline = deadline;
            }
            return;
        }
        if let Some(Some(f)) = self.slots.get_mut(&node) {
            if f.block == block {
                f.deadline = deadline;
            }
        }
    }

    fn release(&mut self, block: BlockId) {
        self.reassigned.remove(&block);
        for slot in self.slots.values_mut() {
            if slot.is_some_and(|f| f.block == block) {
                *slot = None;
            }
        }
    }

    /// Marks a block as safely held by a majority. Idempotent.
    pub fn on_completion(&mut self, block: BlockId) -> bool {
        self.release(block);
        let seen = &mut self.confirmed[block.index()];
        if *seen {
            return false;
        }
        *seen = true;
        self.confirmed_count += 1;
        true
    }

    /// Gives up on the current holder of `block` and resends it to a random
    /// other edge server. The entry whose slot held it takes new work.
    pub fn on_distribution_timeout<R: Rng>(
        &mut self,
        block: BlockId,
        n: usize,
        rng: &mut R,
    ) -> Option<Message> {
        if self.is_confirmed(block) {
            return None;
        }
        let current = self.in_flight(block)?;
        self.release(block);
        let target = if n <= 1 {
            current.node
        } else {
            let mut pick = NodeId(rng.gen_range(1..n as u32));
            if pick >= current.node {
                pick = NodeId(pick.0 + 1);
            }
            pick
        };
        self.reassigned.insert(
            block,
            InFlight {
                block,
                node: target,
                deadline: f64::INFINITY,
            },
        );
        Some(Message::new(
            NodeId::CLOUD,
            target,
            Body::DataBlockDistribution { block },
        ))
    }
}
