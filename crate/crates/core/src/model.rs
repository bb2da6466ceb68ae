//! Identifiers, messages and the data-block model shared by every scheme.

use std::fmt;

use crate::error::Error;

/// Fixed per-message header, in bytes.
pub const HEADER_BYTES: u64 = 12;
/// Size of one block id inside a heartbeat receipt's missing list.
pub const BLOCK_ID_BYTES: u64 = 4;

/// Node 0 is the cloud server; edge servers are 1..=n.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub const CLOUD: NodeId = NodeId(0);

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_cloud(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Blocks are numbered from 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockId(pub u32);

impl BlockId {
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub type TermId = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Follower,
    Candidate,
    Coordinator,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Role::Follower => "Follower",
            Role::Candidate => "Candidate",
            Role::Coordinator => "Coordinator",
        };
        f.write_str(s)
    }
}

/// A data set split into fixed-size blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DataSpec {
    pub data_size: u64,
    pub block_size: u64,
    pub block_count: u32,
}

impl DataSpec {
    pub fn new(data_size: u64, block_size: u64) -> Result<Self, Error> {
        let block_count = partition(data_size, block_size)?;
        Ok(DataSpec {
            data_size,
            block_size,
            block_count,
        })
    }

    pub fn blocks(&self) -> impl Iterator<Item = BlockId> {
        (1..=self.block_count).map(BlockId)
    }
}

/// Number of blocks needed to hold `data_size` bytes.
pub fn partition(data_size: u64, block_size: u64) -> Result<u32, Error> {
    if data_size == 0 || block_size == 0 {
        return Err(Error::InvalidParameter(format!(
            "data size and block size must be positive (got {data_size}, {block_size})"
        )));
    }
    let count = data_size.div_ceil(block_size);
    u32::try_from(count)
        .map_err(|_| Error::InvalidParameter(format!("{count} blocks is too many")))
}

/// Smallest strict majority of `n` edge servers.
pub fn majority(n: usize) -> usize {
    (n + 2) / 2
}

/// [`majority`] that rejects an empty system.
pub fn checked_majority(n: usize) -> Result<usize, Error> {
    if n == 0 {
        return Err(Error::InvalidParameter("majority of zero servers".into()));
    }
    Ok(majority(n))
}

/// Which blocks a node holds, plus the running count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockSet {
    bits: Vec<bool>,
    held: u32,
}

impl BlockSet {
    pub fn new(block_count: u32) -> Self {
        BlockSet {
            bits: vec![false; block_count as usize],
            held: 0,
        }
    }

    pub fn full(block_count: u32) -> Self {
        BlockSet {
            bits: vec![true; block_count as usize],
            held: block_count,
        }
    }

    pub fn contains(&self, block: BlockId) -> bool {
        self.bits.get(block.index()).copied().unwrap_or(false)
    }

    /// Returns true when the block was not held before.
    pub fn insert(&mut self, block: BlockId) -> bool {
        match self.bits.get_mut(block.index()) {
            Some(slot) if !*slot => {
                *slot = true;
                self.held += 1;
                true
            }
            _ => false,
        }
    }

    pub fn held(&self) -> u32 {
        self.held
    }

    pub fn capacity(&self) -> u32 {
        self.bits.len() as u32
    }

    pub fn is_full(&self) -> bool {
        self.held as usize == self.bits.len()
    }

    /// Ids in 1..=upto that are not held.
    pub fn missing_upto(&self, upto: u32) -> Vec<BlockId> {
        let upto = (upto as usize).min(self.bits.len());
        self.bits[..upto]
            .iter()
            .enumerate()
            .filter(|(_, held)| !**held)
            .map(|(i, _)| BlockId(i as u32 + 1))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MessageKind {
    DataBlockDistribution,
    DistributionCompletion,
    BlockTransmission,
    BlockReceipt,
    Heartbeat,
    HeartbeatReceipt,
    BlockRequest,
    BlockResponse,
    BlockSupplement,
    VoteRequest,
    VoteResponse,
}

impl MessageKind {
    pub const ALL: [MessageKind; 11] = [
        MessageKind::DataBlockDistribution,
        MessageKind::DistributionCompletion,
        MessageKind::BlockTransmission,
        MessageKind::BlockReceipt,
        MessageKind::Heartbeat,
        MessageKind::HeartbeatReceipt,
        MessageKind::BlockRequest,
        MessageKind::BlockResponse,
        MessageKind::BlockSupplement,
        MessageKind::VoteRequest,
        MessageKind::VoteResponse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MessageKind::DataBlockDistribution => "DataBlockDistribution",
            MessageKind::DistributionCompletion => "DistributionCompletion",
            MessageKind::BlockTransmission => "BlockTransmission",
            MessageKind::BlockReceipt => "BlockReceipt",
            MessageKind::Heartbeat => "Heartbeat",
            MessageKind::HeartbeatReceipt => "HeartbeatReceipt",
            MessageKind::BlockRequest => "BlockRequest",
            MessageKind::BlockResponse => "BlockResponse",
            MessageKind::BlockSupplement => "BlockSupplement",
            MessageKind::VoteRequest => "VoteRequest",
            MessageKind::VoteResponse => "VoteResponse",
        }
    }

    pub fn from_name(name: &str) -> Option<MessageKind> {
        MessageKind::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Kinds whose wire size includes block payload.
    pub fn carries_blocks(self) -> bool {
        matches!(
            self,
            MessageKind::DataBlockDistribution
                | MessageKind::BlockTransmission
                | MessageKind::BlockSupplement
                | MessageKind::BlockResponse
        )
    }

    pub fn is_heartbeat(self) -> bool {
        matches!(self, MessageKind::Heartbeat | MessageKind::HeartbeatReceipt)
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Body {
    DataBlockDistribution { block: BlockId },
    DistributionCompletion { block: BlockId },
    BlockTransmission { block: BlockId },
    BlockReceipt { block: BlockId, status: bool },
    Heartbeat { max_block: u32, term: TermId, coordinator: NodeId },
    HeartbeatReceipt { max_block: u32, missing: Vec<BlockId>, term: TermId },
    BlockRequest { blocks: Vec<BlockId> },
    BlockResponse { blocks: Vec<BlockId> },
    BlockSupplement { blocks: Vec<BlockId> },
    VoteRequest { term: TermId, candidate: NodeId, total_blocks: u32 },
    VoteResponse { supported: bool, term: TermId },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message {
    pub src: NodeId,
    pub dst: NodeId,
    pub body: Body,
}

impl Message {
    pub fn new(src: NodeId, dst: NodeId, body: Body) -> Self {
        Message { src, dst, body }
    }

    pub fn kind(&self) -> MessageKind {
        match &self.body {
            Body::DataBlockDistribution { .. } => MessageKind::DataBlockDistribution,
            Body::DistributionCompletion { .. } => MessageKind::DistributionCompletion,
            Body::BlockTransmission { .. } => MessageKind::BlockTransmission,
            Body::BlockReceipt { .. } => MessageKind::BlockReceipt,
            Body::Heartbeat { .. } => MessageKind::Heartbeat,
            Body::HeartbeatReceipt { .. } => MessageKind::HeartbeatReceipt,
            Body::BlockRequest { .. } => MessageKind::BlockRequest,
            Body::BlockResponse { .. } => MessageKind::BlockResponse,
            Body::BlockSupplement { .. } => MessageKind::BlockSupplement,
            Body::VoteRequest { .. } => MessageKind::VoteRequest,
            Body::VoteResponse { .. } => MessageKind::VoteResponse,
        }
    }

    /// Blocks whose payload travels with this message.
    pub fn payload_blocks(&self) -> &[BlockId] {
        match &self.body {
            Body::DataBlockDistribution { block } | Body::BlockTransmission { block } => {
                std::slice::from_ref(block)
            }
            Body::BlockResponse { blocks } | Body::BlockSupplement { blocks } => blocks,
            _ => &[],
        }
    }

    /// True when the message carries at least one block of payload.
    pub fn is_bulk(&self) -> bool {
        !self.payload_blocks().is_empty()
    }

    pub fn wire_bytes(&self, block_size: u64) -> u64 {
        let extra = match &self.body {
            Body::HeartbeatReceipt { missing, .. } => BLOCK_ID_BYTES * missing.len() as u64,
            _ => block_size * self.payload_blocks().len() as u64,
        };
        HEADER_BYTES + extra
    }

    /// Short `key=value` rendering of the payload fields, used in traces.
    pub fn fields(&self) -> String {
        fn ids(blocks: &[BlockId]) -> String {
            let parts: Vec<String> = blocks.iter().map(|b| b.0.to_string()).collect();
            parts.join(",")
        }
        match &self.body {
            Body::DataBlockDistribution { block }
            | Body::DistributionCompletion { block }
            | Body::BlockTransmission { block } => format!("block={block}"),
            Body::BlockReceipt { block, status } => format!("block={block} status={status}"),
            Body::Heartbeat {
                max_block,
                term,
                coordinator,
            } => format!("max={max_block} term={term} coordinator={coordinator}"),
            Body::HeartbeatReceipt {
                max_block,
                missing,
                term,
            } => format!("max={max_block} term={term} missing={}", ids(missing)),
            Body::BlockRequest { blocks } => format!("request={}", ids(blocks)),
            Body::BlockResponse { blocks } | Body::BlockSupplement { blocks } => {
                format!("blocks={}", ids(blocks))
            }
            Body::VoteRequest {
                term,
                candidate,
                total_blocks,
            } => format!("term={term} candidate={candidate} total={total_blocks}"),
            Body::VoteResponse { supported, term } => {
                format!("supported={supported} term={term}")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_rounds_up() {
        assert_eq!(partition(1 << 30, 512 * 1024).unwrap(), 2048);
        assert_eq!(partition(1000, 300).unwrap(), 4);
        assert!(partition(0, 512).is_err());
        assert!(partition(512, 0).is_err());
    }

    #[test]
    fn majority_values() {
        assert_eq!(majority(1), 1);
        assert_eq!(majority(2), 2);
        assert_eq!(majority(5), 3);
        assert_eq!(majority(8), 5);
        assert_eq!(majority(32), 17);
    }

    #[test]
    fn wire_sizes() {
        let bs = 512 * 1024;
        let hb = Message::new(
            NodeId(1),
            NodeId(2),
            Body::Heartbeat {
                max_block: 3,
                term: 1,
                coordinator: NodeId(1),
            },
        );
        assert_eq!(hb.wire_bytes(bs), 12);
        let receipt = Message::new(
            NodeId(2),
            NodeId(1),
            Body::HeartbeatReceipt {
                max_block: 9,
                missing: vec![BlockId(3), BlockId(7)],
                term: 1,
            },
        );
        assert_eq!(receipt.wire_bytes(bs), 20);
        let supp = Message::new(
            NodeId(1),
            NodeId(2),
            Body::BlockSupplement {
                blocks: vec![BlockId(1), BlockId(2), BlockId(3)],
            },
        );
        assert_eq!(supp.wire_bytes(bs), 12 + 3 * bs);
        let req = Message::new(
            NodeId(1),
            NodeId(2),
            Body::BlockRequest {
                blocks: vec![BlockId(1), BlockId(2)],
            },
        );
        assert_eq!(req.wire_bytes(bs), 12);
        let empty = Message::new(NodeId(1), NodeId(2), Body::BlockResponse { blocks: vec![] });
        assert_eq!(empty.wire_bytes(bs), 12);
        assert!(!empty.is_bulk());
    }

    #[test]
    fn block_set_tracks_missing() {
        let mut set = BlockSet::new(6);
        assert!(set.insert(BlockId(2)));
        assert!(!set.insert(BlockId(2)));
        set.insert(BlockId(4));
        assert_eq!(set.held(), 2);
        assert_eq!(set.missing_upto(5), vec![BlockId(1), BlockId(3), BlockId(5)]);
        assert_eq!(set.missing_upto(99).len(), 4);
        assert!(!set.insert(BlockId(7)));
    }

    #[test]
    fn kind_names_roundtrip() {
        for kind in MessageKind::ALL {
            assert_eq!(MessageKind::from_name(kind.name()), Some(kind));
        }
    }
}
