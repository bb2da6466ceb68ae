//! Coordinator re-election latency.
//!
//! Each sample lets a coordinator settle in, kills it one millisecond after
//! one of its heartbeat rounds and measures the time until a successor sends
//! its first heartbeat.

use std::io::Write;

use rayon::prelude::*;

use crate::config::{RunConfig, KB};
use crate::edgedis::{EdgeDis, EdgeDisConfig, EntrySelection};
use crate::error::Error;
use crate::model::{NodeId, TermId};
use crate::simnet::{FaultKind, FaultPlan, Net, ScriptedFault, Sim};

/// Delay between the heartbeat round and the kill, long enough for the
/// whole round to leave the coordinator's link.
const KILL_OFFSET_MS: f64 = 1.0;

#[derive(Clone, Debug, PartialEq)]
pub struct ElectionSpec {
    pub n_values: Vec<usize>,
    pub t_values: Vec<f64>,
    pub runs: usize,
    pub seed: u64,
    /// Everything else (delays, heartbeat interval, bandwidth).
    pub base: RunConfig,
}

impl Default for ElectionSpec {
    fn default() -> Self {
        ElectionSpec {
            n_values: vec![8, 16, 32, 64, 128],
            t_values: vec![250.0],
            runs: 20,
            seed: 1,
            base: RunConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElectionSample {
    pub n: usize,
    pub t_ms: f64,
    pub seed: u64,
    pub election_ms: f64,
    /// Election timeouts between the kill and the new coordinator, so 1
    /// means no vote split.
    pub attempts: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ElectionReport {
    pub samples: Vec<ElectionSample>,
}

/// Nearest-rank quantile of `q` in (0, 1].
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = (q * v.len() as f64).ceil().max(1.0) as usize;
    v[rank.min(v.len()) - 1]
}

impl ElectionReport {
    pub fn times(&self, n: usize, t_ms: f64) -> Vec<f64> {
        self.samples
            .iter()
            .filter(|s| s.n == n && s.t_ms == t_ms)
            .map(|s| s.election_ms)
            .collect()
    }

    pub fn quantile(&self, n: usize, t_ms: f64, q: f64) -> f64 {
        quantile(&self.times(n, t_ms), q)
    }

    /// Mean number of attempts per election.
    pub fn mean_attempts(&self, n: usize, t_ms: f64) -> f64 {
        let a: Vec<f64> = self
            .samples
            .iter()
            .filter(|s| s.n == n && s.t_ms == t_ms)
            .map(|s| s.attempts as f64)
            .collect();
        a.iter().sum::<f64>() / a.len() as f64
    }

    /// Per-run rows followed by quantile rows (`seed` = `q05` .. `q100`).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["n", "t_ms", "seed", "election_ms", "attempts"])?;
        let mut groups: Vec<(usize, f64)> = Vec::new();
        for s in &self.samples {
            if !groups.contains(&(s.n, s.t_ms)) {
                groups.push((s.n, s.t_ms));
            }
            out.write_record([
                s.n.to_string(),
                format!("{}", s.t_ms),
                s.seed.to_string(),
                format!("{}", s.election_ms),
                s.attempts.to_string(),
            ])?;
        }
        for (n, t) in groups {
            for pct in (5..=100).step_by(5) {
                out.write_record([
                    n.to_string(),
                    format!("{t}"),
                    format!("q{pct:02}"),
                    format!("{}", self.quantile(n, t, pct as f64 / 100.0)),
                    String::new(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// One kill-and-re-elect measurement.
pub fn measure_election(base: &RunConfig, n: usize, t_ms: f64, seed: u64) -> Result<ElectionSample, Error> {
    let cfg = RunConfig {
        n,
        coordinator_timeout_ms: t_ms,
        data_size: 512 * KB,
        seed,
        ..base.clone()
    };
    cfg.validate()?;
    let mut pc = EdgeDisConfig::from_run(&cfg, EntrySelection::Bandwidth);
    pc.disseminate = false;
    let proto = EdgeDis::new(pc, 1);
    let net: Net<_> = Net::from_config(&cfg, 1);
    let mut sim = Sim::new(net, proto, &FaultPlan::default());

    // Let the first election settle.
    let settle = 4.0 * t_ms + 10.0 * cfg.heartbeat_ms;
    sim.run(|p, net| net.now() >= settle && p.coordinators().len() == 1)?;
    let (leader, term) = sim.proto.coordinators()[0];
    let started = sim
        .proto
        .first_heartbeats()
        .iter()
        .rev()
        .find(|&&(_, node, tm)| node == leader && tm == term)
        .map(|&(at, _, _)| at)
        .ok_or_else(|| Error::Stalled {
            at_ms: sim.net.now(),
            reason: "coordinator without a heartbeat".into(),
        })?;
    let hb = cfg.heartbeat_ms;
    let rounds = ((sim.net.now() - started) / hb).floor() + 1.0;
    let kill_at = started + rounds * hb + KILL_OFFSET_MS;
    sim.net.schedule_fault(ScriptedFault {
        at_ms: kill_at,
        node: leader,
        kind: FaultKind::Crash,
    });
    let elections_before = sim.proto.counters().elections;
    let successor = |p: &EdgeDis| -> Option<(f64, NodeId, TermId)> {
        p.first_heartbeats()
            .iter()
            .copied()
            .find(|&(at, node, tm)| at >= kill_at && node != leader && tm > term)
    };
    sim.run(|p, _| successor(p).is_some())?;
    let (at, _, _) = successor(&sim.proto).expect("successor found");
    Ok(ElectionSample {
        n,
        t_ms,
        seed,
        election_ms: at - kill_at,
        attempts: sim.proto.counters().elections - elections_before,
    })
}

/// Measures `runs` seeds for every (n, t) pair.
pub fn run_election_benchmark(spec: &ElectionSpec) -> Result<ElectionReport, Error> {
    let jobs: Vec<(usize, f64, u64)> = spec
        .n_values
        .iter()
        .flat_map(|&n| {
            spec.t_values.iter().flat_map(move |&t| {
                (0..spec.runs as u64).map(move |i| (n, t, spec.seed + i))
            })
        })
        .collect();
    let samples = jobs
        .par_iter()
        .map(|&(n, t, seed)| measure_election(&spec.base, n, t, seed))
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(ElectionReport { samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank() {
        let v = [5.0, 1.0, 4.0, 2.0, 3.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.2), 1.0);
        assert_eq!(quantile(&v, 0.21), 2.0);
        assert_eq!(quantile(&v, 1.0), 5.0);
    }

    #[test]
    fn election_takes_at_least_the_timeout() {
        let s = measure_election(&RunConfig::default(), 8, 250.0, 3).unwrap();
        assert!(s.election_ms >= 250.0 && s.election_ms < 1000.0, "{s:?}");
        assert!(s.attempts >= 1);
    }
}
