//! Transmission ledger and the cost/overhead measures computed from it.

use crate::model::{Message, MessageKind, NodeId, HEADER_BYTES};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HopClass {
    /// Cloud to edge.
    Backhaul,
    /// Edge to edge or edge to cloud.
    Edge,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LedgerEntry {
    pub at_ms: f64,
    pub src: NodeId,
    pub dst: NodeId,
    pub kind: MessageKind,
    pub hop: HopClass,
    pub blocks: u32,
    pub wire_bytes: u64,
    pub dropped: bool,
}

/// Append-only record of every transmission that started on a link.
#[derive(Clone, Debug, Default)]
pub struct CostLedger {
    pub block_count: u32,
    pub entries: Vec<LedgerEntry>,
}

impl CostLedger {
    pub fn new(block_count: u32) -> Self {
        CostLedger {
            block_count,
            entries: Vec::new(),
        }
    }

    pub fn record(&mut self, at_ms: f64, msg: &Message, wire_bytes: u64, dropped: bool) {
        let hop = if msg.src.is_cloud() {
            HopClass::Backhaul
        } else {
            HopClass::Edge
        };
        self.entries.push(LedgerEntry {
            at_ms,
            src: msg.src,
            dst: msg.dst,
            kind: msg.kind(),
            hop,
            blocks: msg.payload_blocks().len() as u32,
            wire_bytes,
            dropped,
        });
    }

    pub fn count(&self, kind: MessageKind) -> usize {
        self.entries.iter().filter(|e| e.kind == kind).count()
    }
}

/// Data-transmission cost in units of one full data set over one edge link.
/// Dropped transfers are charged: the bytes left the sender.
pub fn cost_of(ledger: &CostLedger, cost_ratio: f64) -> f64 {
    if ledger.block_count == 0 {
        return 0.0;
    }
    let mut backhaul = 0u64;
    let mut edge = 0u64;
    for e in &ledger.entries {
        match e.hop {
            HopClass::Backhaul => backhaul += e.blocks as u64,
            HopClass::Edge => edge += e.blocks as u64,
        }
    }
    (cost_ratio * backhaul as f64 + edge as f64) / ledger.block_count as f64
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Overhead {
    /// Control-plane bytes other than heartbeats, including the header of
    /// every block-bearing message.
    pub control_bytes: u64,
    pub heartbeat_bytes: u64,
}

pub fn overhead_of(ledger: &CostLedger) -> Overhead {
    let mut out = Overhead::default();
    for e in &ledger.entries {
        if e.kind.is_heartbeat() {
            out.heartbeat_bytes += e.wire_bytes;
        } else if e.blocks > 0 {
            out.control_bytes += HEADER_BYTES;
        } else {
            out.control_bytes += e.wire_bytes;
        }
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunResult {
    /// Time at which the last edge server held every block.
    pub time_s: f64,
    pub cost: f64,
    pub control_bytes: u64,
    pub heartbeat_bytes: u64,
    pub elections: u64,
    pub supplements: u64,
    pub retransmits: u64,
    pub stalled: bool,
}

/// Counters the protocols maintain while running.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    pub elections: u64,
    pub supplements: u64,
    pub retransmits: u64,
}

impl RunResult {
    pub fn from_run(
        finish_ms: Option<f64>,
        ledger: &CostLedger,
        cost_ratio: f64,
        counters: Counters,
    ) -> RunResult {
        let overhead = overhead_of(ledger);
        RunResult {
            time_s: finish_ms.map(|t| t / 1000.0).unwrap_or(f64::NAN),
            cost: cost_of(ledger, cost_ratio),
            control_bytes: overhead.control_bytes,
            heartbeat_bytes: overhead.heartbeat_bytes,
            elections: counters.elections,
            supplements: counters.supplements,
            retransmits: counters.retransmits,
            stalled: finish_ms.is_none(),
        }
    }
}

/// Recomputes per-run cost from a trace written by the simulator.
pub fn cost_from_trace(trace: &str) -> Vec<f64> {
    let mut out = Vec::new();
    let mut blocks_total = 0.0;
    let mut cr = 1.0;
    let mut acc = 0.0;
    let mut open = false;
    for line in trace.lines() {
        if let Some(header) = line.strip_prefix("# run ") {
            if open {
                out.push(acc / blocks_total);
            }
            open = true;
            acc = 0.0;
            for kv in header.split_whitespace() {
                if let Some((k, v)) = kv.split_once('=') {
                    match k {
                        "blocks" => blocks_total = v.parse().unwrap_or(1.0),
                        "cr" => cr = v.parse().unwrap_or(1.0),
                        _ => {}
                    }
                }
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 6 || !(cols[1] == "send" || cols[1] == "drop") {
            continue;
        }
        let carried = cols[5]
            .split_whitespace()
            .find_map(|kv| kv.strip_prefix("payload="))
            .and_then(|v| v.parse::<f64>().ok())
            .unwrap_or(0.0);
        let weight = if cols[2] == "0" { cr } else { 1.0 };
        acc += weight * carried;
    }
    if open {
        out.push(acc / blocks_total);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BlockId, Body};

    fn entry(src: u32, blocks: Vec<u32>, dropped: bool, ledger: &mut CostLedger) {
        let body = Body::BlockSupplement {
            blocks: blocks.into_iter().map(BlockId).collect(),
        };
        let msg = Message::new(NodeId(src), NodeId(9), body);
        let bytes = msg.wire_bytes(100);
        ledger.record(0.0, &msg, bytes, dropped);
    }

    #[test]
    fn one_backhaul_copy_plus_edge_copies() {
        let mut ledger = CostLedger::new(4);
        for _ in 0..4 {
            entry(0, vec![1], false, &mut ledger);
        }
        for _ in 0..28 {
            entry(3, vec![1], false, &mut ledger);
        }
        // cr * 1 + 7 full copies over edge links
        assert!((cost_of(&ledger, 20.0) - 27.0).abs() < 1e-12);
    }

    #[test]
    fn dropped_transfers_are_charged() {
        let mut ledger = CostLedger::new(2);
        entry(0, vec![1], true, &mut ledger);
        entry(0, vec![1], false, &mut ledger);
        entry(0, vec![2], false, &mut ledger);
        assert!((cost_of(&ledger, 10.0) - 15.0).abs() < 1e-12);
    }

    #[test]
    fn overhead_splits_heartbeats() {
        let mut ledger = CostLedger::new(1);
        let hb = Message::new(
            NodeId(1),
            NodeId(2),
            Body::Heartbeat {
                max_block: 0,
                term: 1,
                coordinator: NodeId(1),
            },
        );
        ledger.record(0.0, &hb, 12, false);
        let rc = Message::new(
            NodeId(2),
            NodeId(1),
            Body::HeartbeatReceipt {
                max_block: 0,
                missing: vec![BlockId(1)],
                term: 1,
            },
        );
        ledger.record(0.0, &rc, 16, false);
        entry(1, vec![1, 2], false, &mut ledger);
        let o = overhead_of(&ledger);
        assert_eq!(o.heartbeat_bytes, 28);
        assert_eq!(o.control_bytes, 12);
    }
}
