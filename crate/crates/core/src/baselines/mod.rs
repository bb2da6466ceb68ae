//! Comparison schemes and the single entry point that runs any scheme.

pub mod edda;
pub mod relay;
pub mod steiner;

use std::fmt;
use std::str::FromStr;

use crate::config::RunConfig;
use crate::edgedis::{EdgeDis, EdgeDisConfig, EntrySelection, Violation};
use crate::error::Error;
use crate::metrics::{CostLedger, Counters, RunResult};
use crate::model::NodeId;
use crate::simnet::{build_topology, FaultPlan, Net, Protocol, Sim};

pub use edda::{plan_tree, DisseminationTree};
pub use relay::{Forwarding, Relay, StreamTarget};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    EdgeDis,
    EdgeDisRnd,
    DataSync,
    Gossip,
    Raft,
    Edda,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::EdgeDis,
        Scheme::EdgeDisRnd,
        Scheme::DataSync,
        Scheme::Gossip,
        Scheme::Raft,
        Scheme::Edda,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::EdgeDis => "edgedis",
            Scheme::EdgeDisRnd => "edgedis-rnd",
            Scheme::DataSync => "datasync",
            Scheme::Gossip => "gossip",
            Scheme::Raft => "raft",
            Scheme::Edda => "edda",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let lower = s.to_ascii_lowercase();
        let key = match lower.as_str() {
            "edd-a" | "edda" => "edda",
            "edgedis_rnd" | "edgedisrnd" => "edgedis-rnd",
            other => other,
        };
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name() == key)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown scheme '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub trace: bool,
    /// Evaluate safety invariants while running (EdgeDis family only).
    pub monitor: bool,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub result: RunResult,
    pub ledger: CostLedger,
    pub trace: Option<String>,
    pub violations: Vec<Violation>,
    pub events: u64,
}

/// One line describing the run, written at the top of its trace.
pub fn trace_header(scheme: Scheme, cfg: &RunConfig, block_count: u32) -> String {
    format!(
        "scheme={} n={} nd={} r={} ds={} bs={} dl={}-{} cr={} blocks={} seed={}",
        scheme,
        cfg.n,
        cfg.nd,
        cfg.failure_rate,
        cfg.data_size,
        cfg.block_size,
        cfg.delay_lo_ms,
        cfg.delay_hi_ms,
        cfg.cost_ratio,
        block_count,
        cfg.seed
    )
}

fn drive<P: Protocol>(
    mut sim: Sim<P>,
    finish: impl Fn(&P) -> Option<f64>,
    counters: impl Fn(&P) -> Counters,
) -> (Option<f64>, Counters, CostLedger, Option<String>, u64, P) {
    let outcome = sim.run_to_completion();
    let done = outcome.ok().and(finish(&sim.proto));
    let ledger = sim.net.take_ledger();
    let trace = sim.net.take_trace().map(|t| t.into_string());
    let events = sim.net.events_processed();
    let c = counters(&sim.proto);
    (done, c, ledger, trace, events, sim.proto)
}

fn new_net<T: Clone + fmt::Debug>(
    scheme: Scheme,
    cfg: &RunConfig,
    block_count: u32,
    opts: RunOptions,
) -> Net<T> {
    let mut net = Net::from_config(cfg, block_count);
    if opts.trace {
        net.enable_trace(&trace_header(scheme, cfg, block_count));
    }
    net
}

/// Builds the EdgeDis protocol for a scheme of the EdgeDis family.
pub fn edgedis_for(scheme: Scheme, cfg: &RunConfig, block_count: u32, monitor: bool) -> EdgeDis {
    let selection = match scheme {
        Scheme::EdgeDisRnd => EntrySelection::Random,
        Scheme::Raft => EntrySelection::SingleRandom,
        _ => EntrySelection::Bandwidth,
    };
    let mut pc = EdgeDisConfig::from_run(cfg, selection);
    pc.monitor = monitor;
    EdgeDis::new(pc, block_count)
}

/// Builds the relay protocol for DataSync, Gossip or EDD-A.
pub fn relay_for(scheme: Scheme, cfg: &RunConfig, block_count: u32) -> Result<Relay, Error> {
    let n = cfg.n;
    let (targets, forwarding, skip_reverse) = match scheme {
        Scheme::DataSync => (
            (1..=n as u32).map(|i| StreamTarget::Fixed(NodeId(i))).collect(),
            Forwarding::None,
            false,
        ),
        Scheme::Gossip => {
            let topo = build_topology(n, cfg.nd, cfg.seed)?;
            (vec![StreamTarget::Random], Forwarding::Neighbors(topo), true)
        }
        Scheme::Edda => {
            let topo = build_topology(n, cfg.nd, cfg.seed)?;
            let tree = plan_tree(&topo, cfg.cost_ratio, cfg.tree_depth)?;
            let targets = tree.children[0]
                .iter()
                .map(|&c| StreamTarget::Fixed(c))
                .collect();
            (targets, Forwarding::Tree(tree.children), false)
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "{other} is not a relay scheme"
            )))
        }
    };
    Ok(Relay::new(
        n,
        block_count,
        cfg.distribution_timeout_ms,
        cfg.transmission_timeout_ms,
        targets,
        forwarding,
        skip_reverse,
    ))
}

/// Runs one dissemination of `cfg.data_size` bytes under `scheme`.
pub fn run_scheme(
    scheme: Scheme,
    cfg: &RunConfig,
    faults: &FaultPlan,
    opts: RunOptions,
) -> Result<RunOutcome, Error> {
    cfg.validate()?;
    let spec = cfg.data_spec()?;
    let blocks = spec.block_count;
    let (finish, counters, ledger, trace, events, violations) = match scheme {
        Scheme::EdgeDis | Scheme::EdgeDisRnd | Scheme::Raft => {
            let proto = edgedis_for(scheme, cfg, blocks, opts.monitor);
            let sim = Sim::new(new_net(scheme, cfg, blocks, opts), proto, faults);
            let (f, c, l, t, e, p) = drive(sim, |p| p.finish(), |p| p.counters());
            (f, c, l, t, e, p.violations().to_vec())
        }
        Scheme::DataSync | Scheme::Gossip | Scheme::Edda => {
            let proto = relay_for(scheme, cfg, blocks)?;
            let sim = Sim::new(new_net(scheme, cfg, blocks, opts), proto, faults);
            let (f, c, l, t, e, _) = drive(sim, |p| p.finish(), |p| p.counters());
            (f, c, l, t, e, Vec::new())
        }
    };
    let result = RunResult::from_run(finish, &ledger, cfg.cost_ratio, counters);
    Ok(RunOutcome {
        result,
        ledger,
        trace,
        violations,
        events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheme_names_parse() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert_eq!("EDD-A".parse::<Scheme>().unwrap(), Scheme::Edda);
        assert!("paxos".parse::<Scheme>().is_err());
    }
}
