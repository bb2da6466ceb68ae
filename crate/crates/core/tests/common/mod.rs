#![allow(dead_code)]

use edgedis_core::baselines::edgedis_for;
use edgedis_core::config::{RunConfig, KB};
use edgedis_core::edgedis::Violation;
use edgedis_core::metrics::HopClass;
use edgedis_core::model::NodeId;
use edgedis_core::simnet::{FaultPlan, Net, Sim};
use edgedis_core::Scheme;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One scripted crash; `recover_ms` of None means the node stays down.
#[derive(Clone, Debug, PartialEq)]
pub struct Crash {
    pub node: u32,
    pub at_ms: f64,
    pub recover_ms: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Case {
    pub n: usize,
    pub blocks: u32,
    pub r: f64,
    pub seed: u64,
    pub crashes: Vec<Crash>,
}

impl Case {
    pub fn config(&self) -> RunConfig {
        RunConfig {
            n: self.n,
            nd: 1.4f64.min((self.n - 1).max(1) as f64),
            failure_rate: self.r,
            block_size: 64 * KB,
            data_size: self.blocks as u64 * 64 * KB,
            horizon_ms: 60_000.0,
            seed: self.seed,
            ..RunConfig::default()
        }
    }

    pub fn plan(&self) -> FaultPlan {
        let mut plan = FaultPlan::default();
        for c in &self.crashes {
            plan = plan.crash(c.at_ms, c.node);
            if let Some(up) = c.recover_ms {
                plan = plan.recover(up, c.node);
            }
        }
        plan
    }

    /// True when at some instant fewer than a majority of servers are up.
    pub fn majority_lost(&self) -> bool {
        let need = edgedis_core::model::majority(self.n);
        self.crashes.iter().any(|probe| {
            let down = self
                .crashes
                .iter()
                .filter(|c| c.at_ms <= probe.at_ms && probe.at_ms < c.recover_ms.unwrap_or(f64::INFINITY))
                .count();
            self.n - down < need
        })
    }

    pub fn all_recover(&self) -> bool {
        self.crashes.iter().all(|c| c.recover_ms.is_some())
    }

    /// Draws a case: n in 3..=16, up to 3 crashes, r in [0, 1%].
    pub fn random(rng: &mut ChaCha8Rng) -> Case {
        let n = rng.gen_range(3..=16);
        let blocks = rng.gen_range(1..=24);
        let r = match rng.gen_range(0..3) {
            0 => 0.0,
            1 => 0.01,
            _ => rng.gen_range(0.0..=0.01),
        };
        let k = rng.gen_range(0..=3usize);
        let mut crashes: Vec<Crash> = Vec::new();
        for _ in 0..k {
            let node = rng.gen_range(1..=n as u32);
            let at_ms = rng.gen_range(0.0..1500.0);
            let recover_ms = if rng.gen_bool(0.8) {
                Some(at_ms + rng.gen_range(1.0..2000.0))
            } else {
                None
            };
            // Keep each node's down interval disjoint from its others.
            let clash = crashes.iter().any(|c| {
                c.node == node
                    && at_ms < c.recover_ms.unwrap_or(f64::INFINITY)
                    && c.at_ms < recover_ms.unwrap_or(f64::INFINITY)
            });
            if !clash {
                crashes.push(Crash { node, at_ms, recover_ms });
            }
        }
        Case {
            n,
            blocks,
            r,
            seed: rng.gen(),
            crashes,
        }
    }

    pub fn batch(seed: u64, count: usize) -> Vec<Case> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| Case::random(&mut rng)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct Checked {
    pub finished: bool,
    pub all_full: bool,
    pub violations: Vec<Violation>,
    pub supplements: u64,
    /// Blocks carried over the backhaul, resends included.
    pub backhaul_distributions: u64,
    pub entry_crashed: bool,
}

/// Runs the case with the safety monitor on.
pub fn run_checked(case: &Case) -> Checked {
    let cfg = case.config();
    let blocks = cfg.data_spec().unwrap().block_count;
    let proto = edgedis_for(Scheme::EdgeDis, &cfg, blocks, true);
    let net: Net<_> = Net::from_config(&cfg, blocks);
    let mut sim = Sim::new(net, proto, &case.plan());
    let finished = sim.run_to_completion().is_ok() && sim.proto.finish().is_some();
    let p = &sim.proto;
    let entries = &p.cloud().entries;
    let backhaul_distributions = sim
        .net
        .ledger()
        .entries
        .iter()
        .filter(|e| e.hop == HopClass::Backhaul)
        .map(|e| e.blocks as u64)
        .sum();
    let all_full = p.nodes().all(|s| s.is_complete());
    Checked {
        finished,
        all_full,
        violations: p.violations().to_vec(),
        supplements: p.counters().supplements,
        backhaul_distributions,
        entry_crashed: case
            .crashes
            .iter()
            .any(|c| entries.contains(&NodeId(c.node))),
    }
}

/// Every safety property of one run, as a list of failures.
pub fn safety_failures(case: &Case, c: &Checked) -> Vec<String> {
    let mut out: Vec<String> = c
        .violations
        .iter()
        .map(|v| format!("{:.3} ms node {}: {}", v.at_ms, v.node, v.what))
        .collect();
    if case.r == 0.0 && !c.entry_crashed && !case.majority_lost() && c.backhaul_distributions != case.blocks as u64 {
        out.push(format!(
            "{} blocks left the cloud for {} blocks",
            c.backhaul_distributions, case.blocks
        ));
    }
    if case.r == 0.0 && case.crashes.is_empty() && c.supplements != 0 {
        out.push(format!("{} supplements without failures", c.supplements));
    }
    out
}

pub fn liveness_failure(case: &Case, c: &Checked) -> Option<String> {
    if !case.all_recover() {
        return None;
    }
    if !c.finished || !c.all_full {
        return Some(format!("finished={} all_full={}", c.finished, c.all_full));
    }
    None
}
