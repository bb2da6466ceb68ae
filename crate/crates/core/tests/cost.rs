use edgedis_core::config::{RunConfig, MB};
use edgedis_core::experiment::{run_sweep, Axis, SweepSpec};
use edgedis_core::metrics::{cost_from_trace, cost_of};
use edgedis_core::simnet::FaultPlan;
use edgedis_core::{run_scheme, RunOptions, Scheme};

fn small(n: usize, cr: f64) -> RunConfig {
    RunConfig {
        n,
        cost_ratio: cr,
        data_size: 8 * MB,
        ..RunConfig::default()
    }
}

fn cost(scheme: Scheme, cfg: &RunConfig) -> f64 {
    let out = run_scheme(scheme, cfg, &FaultPlan::default(), RunOptions::default()).unwrap();
    assert!(!out.result.stalled, "{scheme} stalled");
    out.result.cost
}

#[test]
fn datasync_pays_the_backhaul_per_server() {
    for (n, cr) in [(8, 20.0), (16, 5.0), (32, 40.0)] {
        assert_eq!(cost(Scheme::DataSync, &small(n, cr)), cr * n as f64);
    }
}

#[test]
fn edgedis_sends_each_block_up_once() {
    for (n, cr) in [(8, 20.0), (16, 10.0), (32, 30.0)] {
        let c = cost(Scheme::EdgeDis, &small(n, cr));
        let oracle = cr + (n - 1) as f64;
        assert!((c - oracle).abs() <= 1.0, "n={n} cr={cr}: {c} vs {oracle}");
        let c = cost(Scheme::Raft, &small(n, cr));
        assert!((c - oracle).abs() <= 1.0, "raft n={n} cr={cr}: {c} vs {oracle}");
    }
}

#[test]
fn gossip_ring() {
    let cfg = RunConfig { nd: 1.0, ..small(32, 20.0) };
    let c = cost(Scheme::Gossip, &cfg);
    assert!((c - 52.0).abs() <= 1.0, "{c}");
}

#[test]
fn ledger_matches_reported_cost() {
    let cfg = RunConfig { failure_rate: 0.01, ..small(16, 20.0) };
    for scheme in Scheme::ALL {
        let out = run_scheme(scheme, &cfg, &FaultPlan::default(), RunOptions::default()).unwrap();
        assert_eq!(cost_of(&out.ledger, cfg.cost_ratio), out.result.cost, "{scheme}");
    }
}

#[test]
fn trace_reproduces_csv_cost() {
    let dir = std::env::temp_dir().join(format!("edgedis-cost-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    for scheme in [Scheme::EdgeDis, Scheme::Gossip, Scheme::Edda] {
        let out = dir.join(format!("{scheme}.csv"));
        let trace = dir.join(format!("{scheme}.trace"));
        let spec = SweepSpec {
            scheme,
            base: RunConfig { failure_rate: 0.01, ..small(8, 20.0) },
            runs: 3,
            axes: vec![Axis::parse("cr=5,20").unwrap()],
            out: Some(out.clone()),
            trace: Some(trace.clone()),
        };
        run_sweep(&spec).unwrap();
        let from_trace = cost_from_trace(&std::fs::read_to_string(&trace).unwrap());
        let mut reader = csv::Reader::from_path(&out).unwrap();
        let headers = reader.headers().unwrap().clone();
        let seed_col = headers.iter().position(|h| h == "seed").unwrap();
        let cost_col = headers.iter().position(|h| h == "cost_units").unwrap();
        let per_run: Vec<f64> = reader
            .records()
            .map(|r| r.unwrap())
            .filter(|r| &r[seed_col] != "mean")
            .map(|r| r[cost_col].parse().unwrap())
            .collect();
        assert_eq!(from_trace.len(), 6, "{scheme}");
        assert_eq!(from_trace.len(), per_run.len(), "{scheme}");
        for (a, b) in from_trace.iter().zip(&per_run) {
            assert!((a - b).abs() < 1e-9, "{scheme}: trace {a} csv {b}");
        }
    }
    std::fs::remove_dir_all(&dir).ok();
}
