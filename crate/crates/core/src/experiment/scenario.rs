//! Scripted five-server run in which two candidates contend for the
//! coordinator role three times.
//!
//! Servers 1 and 2 are the contenders, 3 and 4 are plain followers and 5 is
//! the coordinator of term 4 at start. Every link has a fixed 10 ms delay and
//! election timers are long enough that only the scripted timeouts fire.

use std::fmt;

use crate::config::{RunConfig, KB};
use crate::edgedis::{Cause, EdgeDis, EdgeDisConfig, EntrySelection, NodeSetup, RoleChange, Violation};
use crate::model::{MessageKind, NodeId, Role, TermId};
use crate::simnet::{FaultPlan, LinkEffect, LinkRule, Net, Sim};

const C1: NodeId = NodeId(1);
const C2: NodeId = NodeId(2);
const OLD: NodeId = NodeId(5);
const END_MS: f64 = 3500.0;

#[derive(Clone, Debug, PartialEq)]
pub struct EventVerdict {
    pub name: &'static str,
    pub passed: bool,
    pub failures: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct ScenarioVerdict {
    pub events: Vec<EventVerdict>,
    /// Terms of successive coordinators, in the order they took office.
    pub coordinator_terms: Vec<TermId>,
    pub role_log: Vec<RoleChange>,
    pub violations: Vec<Violation>,
    pub trace: String,
}

impl ScenarioVerdict {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.events.iter().all(|e| e.passed)
    }
}

impl fmt::Display for ScenarioVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.events {
            writeln!(f, "event {}: {}", e.name, if e.passed { "pass" } else { "FAIL" })?;
            for why in &e.failures {
                writeln!(f, "  {why}")?;
            }
        }
        writeln!(f, "coordinator terms: {:?}", self.coordinator_terms)?;
        for v in &self.violations {
            writeln!(f, "violation at {:.3} ms on {}: {}", v.at_ms, v.node, v.what)?;
        }
        Ok(())
    }
}

fn config() -> RunConfig {
    RunConfig {
        n: 5,
        nd: 2.0,
        data_size: 512 * KB,
        delay_lo_ms: 10.0,
        delay_hi_ms: 10.0,
        coordinator_timeout_ms: 60_000.0,
        horizon_ms: 10_000.0,
        ..RunConfig::default()
    }
}

fn block(src: u32, dst: Option<u32>, kind: Option<MessageKind>, from_ms: f64, until_ms: f64) -> LinkRule {
    LinkRule {
        src: Some(NodeId(src)),
        dst: dst.map(NodeId),
        kind,
        from_ms,
        until_ms,
        effect: LinkEffect::Block,
    }
}

fn faults() -> FaultPlan {
    FaultPlan::default()
        // A: the term-4 coordinator dies and comes back later.
        .crash(100.0, 5)
        .recover(700.0, 5)
        // B: candidate 1 (coordinator of term 5) dies, candidate 2 times out
        // first, candidate 1 returns just in time to split the vote.
        .crash(1000.0, 1)
        .recover(1150.0, 1)
        .rule(block(1, Some(5), Some(MessageKind::VoteRequest), 1000.0, 1550.0))
        .rule(block(2, Some(5), Some(MessageKind::VoteRequest), 1000.0, 1550.0))
        .rule(LinkRule {
            src: Some(C2),
            dst: Some(NodeId(4)),
            kind: Some(MessageKind::VoteRequest),
            from_ms: 1200.0,
            until_ms: 1250.0,
            effect: LinkEffect::Delay(30.0),
        })
        // C: candidate 2 (coordinator of term 7) dies; the link between the
        // two candidates is cut in both directions for a while.
        .crash(2000.0, 2)
        .recover(2350.0, 2)
        .rule(block(1, Some(2), None, 2000.0, 2600.0))
        .rule(block(2, Some(1), None, 2000.0, 2600.0))
}

fn setup() -> Vec<NodeSetup> {
    (1..=5)
        .map(|i| NodeSetup {
            node: NodeId(i),
            role: if i == 5 { Role::Coordinator } else { Role::Follower },
            term: 4,
            supported: Some(OLD),
            coordinator: Some(OLD),
        })
        .collect()
}

/// Coordinators alive at `at` according to the role log.
fn coordinators_at(log: &[RoleChange], crashes: &[(f64, NodeId, f64)], at: f64) -> Vec<(NodeId, TermId)> {
    let mut state: Vec<(Role, TermId)> = (0..=5).map(|i| if i == 5 { (Role::Coordinator, 4) } else { (Role::Follower, 4) }).collect();
    for c in log.iter().take_while(|c| c.at_ms <= at) {
        state[c.node.index()] = (c.role, c.term);
    }
    (1..=5u32)
        .map(NodeId)
        .filter(|&v| !crashes.iter().any(|&(down, node, up)| node == v && down <= at && at < up))
        .filter(|v| state[v.index()].0 == Role::Coordinator)
        .map(|v| (v, state[v.index()].1))
        .collect()
}

fn became(log: &[RoleChange], node: NodeId, role: Role, term: TermId) -> Option<&RoleChange> {
    log.iter().find(|c| c.node == node && c.role == role && c.term == term)
}

struct Check {
    failures: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Check { failures: Vec::new() }
    }

    fn expect(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }

    fn verdict(self, name: &'static str) -> EventVerdict {
        EventVerdict {
            name,
            passed: self.failures.is_empty(),
            failures: self.failures,
        }
    }
}

/// Replays events A, B and C and checks the coordinator history.
pub fn run_uniqueness_scenario() -> ScenarioVerdict {
    let cfg = config();
    let mut pc = EdgeDisConfig::from_run(&cfg, EntrySelection::Bandwidth);
    pc.disseminate = false;
    pc.monitor = true;
    let proto = EdgeDis::new(pc, 1)
        .with_setup(setup())
        .force_timeout(400.0, C1)
        .force_timeout(405.0, C2)
        .force_timeout(1200.0, C2)
        .force_timeout(1205.0, C1)
        .force_timeout(1300.0, C2)
        .force_timeout(2300.0, C1)
        .force_timeout(2400.0, C2)
        .force_timeout(2500.0, C2);
    let mut net: Net<_> = Net::from_config(&cfg, 1);
    net.enable_trace("scenario=uniqueness n=5 dl=10-10 blocks=1 cr=20");
    let mut sim = Sim::new(net, proto, &faults());
    sim.run_until_time(END_MS);

    let proto = &sim.proto;
    let log = proto.role_log().to_vec();
    let crashes = [(100.0, OLD, 700.0), (1000.0, C1, 1150.0), (2000.0, C2, 2350.0)];
    let coordinator_terms: Vec<TermId> = std::iter::once(4)
        .chain(log.iter().filter(|c| c.role == Role::Coordinator).map(|c| c.term))
        .collect();

    // Event A: 4 -> 5, rival candidate falls back.
    let mut a = Check::new();
    let c1_wins = became(&log, C1, Role::Coordinator, 5);
    a.expect(c1_wins.is_some(), "candidate 1 never became coordinator of term 5");
    a.expect(
        became(&log, C2, Role::Candidate, 5).is_some(),
        "candidate 2 never contended in term 5",
    );
    let c2_back = log
        .iter()
        .find(|c| c.node == C2 && c.role == Role::Follower && c.term == 5 && c.at_ms < 1000.0);
    a.expect(c2_back.is_some(), "candidate 2 did not revert to follower in term 5");
    a.expect(
        c2_back.is_some_and(|c| c.cause == Cause::Heartbeat),
        "candidate 2 reverted for a reason other than the new coordinator's heartbeat",
    );
    a.expect(
        coordinators_at(&log, &crashes, 990.0) == vec![(C1, 5)],
        format!("expected only candidate 1 at term 5 before 1000 ms, got {:?}", coordinators_at(&log, &crashes, 990.0)),
    );

    // Event B: split at 6, winner at 7.
    let mut b = Check::new();
    let c2_six = became(&log, C2, Role::Candidate, 6);
    let c1_six = became(&log, C1, Role::Candidate, 6);
    b.expect(c2_six.is_some(), "candidate 2 never stood in term 6");
    b.expect(c1_six.is_some(), "candidate 1 never stood in term 6");
    b.expect(
        c2_six.zip(c1_six).is_some_and(|(x, y)| x.at_ms < y.at_ms),
        "candidate 2 should time out before candidate 1",
    );
    b.expect(
        !log.iter().any(|c| c.role == Role::Coordinator && c.term == 6),
        "term 6 should end in a split vote",
    );
    let c2_seven = became(&log, C2, Role::Coordinator, 7);
    b.expect(c2_seven.is_some(), "candidate 2 never became coordinator of term 7");
    b.expect(
        log.iter().any(|c| c.node == C1 && c.role == Role::Follower && c.term == 7),
        "candidate 1 did not become a follower of term 7",
    );
    b.expect(
        coordinators_at(&log, &crashes, 1990.0) == vec![(C2, 7)],
        format!("expected only candidate 2 at term 7 before 2000 ms, got {:?}", coordinators_at(&log, &crashes, 1990.0)),
    );

    // Event C: transient dual coordinators at 8 and 9, then one survivor.
    let mut c = Check::new();
    let c1_eight = became(&log, C1, Role::Coordinator, 8);
    let c2_nine = became(&log, C2, Role::Coordinator, 9);
    c.expect(c1_eight.is_some(), "candidate 1 never became coordinator of term 8");
    c.expect(
        became(&log, C2, Role::Candidate, 8).is_some(),
        "candidate 2 never stood in term 8",
    );
    c.expect(c2_nine.is_some(), "candidate 2 never became coordinator of term 9");
    if let Some(nine) = c2_nine {
        let both = coordinators_at(&log, &crashes, nine.at_ms);
        c.expect(
            both.contains(&(C1, 8)) && both.contains(&(C2, 9)),
            format!("expected two coordinators when term 9 began, got {both:?}"),
        );
        let yield_ = log
            .iter()
            .find(|x| x.node == C1 && x.at_ms >= nine.at_ms && x.role != Role::Coordinator);
        c.expect(yield_.is_some(), "candidate 1 never stepped down");
        if let Some(y) = yield_ {
            c.expect(y.term == 9, format!("candidate 1 stepped down into term {}", y.term));
            c.expect(
                y.cause == Cause::HeartbeatReceipt,
                format!("candidate 1 stepped down on {:?}, not on a higher-term receipt", y.cause),
            );
            c.expect(y.at_ms < 2600.0, "candidate 1 only stepped down after the partition healed");
        }
    }
    let end = coordinators_at(&log, &crashes, END_MS);
    c.expect(end == vec![(C2, 9)], format!("expected only candidate 2 at term 9 at the end, got {end:?}"));
    c.expect(
        proto.nodes().all(|s| s.term == 9),
        "not every server converged on term 9",
    );

    let trace = sim.net.take_trace().map(|t| t.into_string()).unwrap_or_default();
    ScenarioVerdict {
        events: vec![a.verdict("A"), b.verdict("B"), c.verdict("C")],
        coordinator_terms,
        role_log: log,
        violations: sim.proto.violations().to_vec(),
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_passes() {
        let v = run_uniqueness_scenario();
        assert!(v.passed(), "{v}\n{}", v.trace);
        assert_eq!(v.coordinator_terms, vec![4, 5, 7, 8, 9]);
    }
}
