//! Omniscient safety checks evaluated while a run executes.

use std::collections::BTreeMap;

use crate::model::{NodeId, Role, TermId};

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub at_ms: f64,
    pub node: NodeId,
    pub what: String,
}

#[derive(Clone, Debug, Default)]
pub struct SafetyMonitor {
    coordinator_of_term: BTreeMap<TermId, NodeId>,
    grants: BTreeMap<(NodeId, TermId), NodeId>,
    pub violations: Vec<Violation>,
}

impl SafetyMonitor {
    fn flag(&mut self, at_ms: f64, node: NodeId, what: String) {
        self.violations.push(Violation { at_ms, node, what });
    }

    pub fn term_changed(&mut self, at_ms: f64, node: NodeId, before: TermId, after: TermId) {
        if after < before {
            self.flag(at_ms, node, format!("term went back from {before} to {after}"));
        }
    }

    /// `others` lists every other node's (id, role, term) at this instant.
    pub fn became_coordinator(
        &mut self,
        at_ms: f64,
        node: NodeId,
        term: TermId,
        others: impl Iterator<Item = (NodeId, Role, TermId)>,
    ) {
        if let Some(&prev) = self.coordinator_of_term.get(&term) {
            if prev != node {
                self.flag(at_ms, node, format!("term {term} already led by {prev}"));
            }
        }
        self.coordinator_of_term.insert(term, node);
        for (id, role, t) in others {
            if id != node && role == Role::Coordinator && t == term {
                self.flag(at_ms, node, format!("{id} is also coordinator of term {term}"));
            }
        }
    }

    pub fn vote_granted(&mut self, at_ms: f64, voter: NodeId, term: TermId, candidate: NodeId) {
        match self.grants.get(&(voter, term)) {
            Some(&c) if c != candidate => {
                self.flag(at_ms, voter, format!("second vote in term {term}: {c} then {candidate}"))
            }
            _ => {
                self.grants.insert((voter, term), candidate);
            }
        }
    }

    pub fn completion_emitted(&mut self, at_ms: f64, node: NodeId, holders: usize, needed: usize) {
        if holders < needed {
            self.flag(
                at_ms,
                node,
                format!("completion with {holders} holders, {needed} needed"),
            );
        }
    }

    pub fn stale_coordinator(&mut self, at_ms: f64, node: NodeId, seen: TermId, own: TermId) {
        self.flag(
            at_ms,
            node,
            format!("coordinator of term {own} kept its role after seeing term {seen}"),
        );
    }

    pub fn coordinators_by_term(&self) -> &BTreeMap<TermId, NodeId> {
        &self.coordinator_of_term
    }
}
