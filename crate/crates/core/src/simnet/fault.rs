//! Scripted crashes, recoveries and link rules.

use crate::model::{MessageKind, NodeId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaultKind {
    Crash,
    Recover,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScriptedFault {
    pub at_ms: f64,
    pub node: NodeId,
    pub kind: FaultKind,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LinkEffect {
    /// Transfers starting inside the window are lost.
    Block,
    /// Fixed one-way delay instead of the sampled one.
    Delay(f64),
}

/// Applies to transfers from `src` to `dst` (either may be a wildcard) that
/// start in `[from_ms, until_ms)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkRule {
    pub src: Option<NodeId>,
    pub dst: Option<NodeId>,
    pub kind: Option<MessageKind>,
    pub from_ms: f64,
    pub until_ms: f64,
    pub effect: LinkEffect,
}

impl LinkRule {
    pub fn matches(&self, at: f64, src: NodeId, dst: NodeId, kind: MessageKind) -> bool {
        at >= self.from_ms
            && at < self.until_ms
            && self.src.is_none_or(|s| s == src)
            && self.dst.is_none_or(|d| d == dst)
            && self.kind.is_none_or(|k| k == kind)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FaultPlan {
    pub scripted: Vec<ScriptedFault>,
    pub link_rules: Vec<LinkRule>,
}

impl FaultPlan {
    pub fn crash(mut self, at_ms: f64, node: u32) -> Self {
        self.scripted.push(ScriptedFault {
            at_ms,
            node: NodeId(node),
            kind: FaultKind::Crash,
        });
        self
    }

    pub fn recover(mut self, at_ms: f64, node: u32) -> Self {
        self.scripted.push(ScriptedFault {
            at_ms,
            node: NodeId(node),
            kind: FaultKind::Recover,
        });
        self
    }

    pub fn rule(mut self, rule: LinkRule) -> Self {
        self.link_rules.push(rule);
        self
    }

    pub fn crashed_nodes(&self) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = self
            .scripted
            .iter()
            .filter(|f| f.kind == FaultKind::Crash)
            .map(|f| f.node)
            .collect();
        out.sort();
        out.dedup();
        out
    }
}
