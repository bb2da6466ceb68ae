mod common;

use common::{liveness_failure, run_checked, safety_failures, Case, Crash};
use edgedis_core::config::{RunConfig, MB};
use edgedis_core::experiment::{measure_election, run_uniqueness_scenario};
use edgedis_core::baselines::edgedis_for;
use edgedis_core::simnet::{FaultKind, FaultPlan, Net, ScriptedFault, Sim};
use edgedis_core::Scheme;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn randomized_runs_stay_safe_and_live(seed in any::<u64>()) {
        let case = Case::random(&mut ChaCha8Rng::seed_from_u64(seed));
        let checked = run_checked(&case);
        let failures = safety_failures(&case, &checked);
        prop_assert!(failures.is_empty(), "{case:?}: {failures:?}");
        let live = liveness_failure(&case, &checked);
        prop_assert!(live.is_none(), "{case:?}: {live:?}");
    }
}

#[test]
fn fault_free_runs_need_no_repair() {
    for n in [4, 9, 16] {
        let case = Case { n, blocks: 20, r: 0.0, seed: n as u64, crashes: vec![] };
        let c = run_checked(&case);
        assert!(c.finished && c.all_full);
        assert_eq!(c.supplements, 0);
        assert_eq!(c.backhaul_distributions, 20);
    }
}

#[test]
fn permanent_crash_stalls_but_stays_safe() {
    let case = Case {
        n: 6,
        blocks: 8,
        r: 0.0,
        seed: 4,
        crashes: vec![Crash { node: 2, at_ms: 10.0, recover_ms: None }],
    };
    let c = run_checked(&case);
    assert!(!c.finished);
    assert!(c.violations.is_empty());
}

#[test]
fn coordinator_crash_mid_run_is_repaired() {
    let cfg = RunConfig { n: 8, data_size: 16 * MB, seed: 2, ..RunConfig::default() };
    let blocks = cfg.data_spec().unwrap().block_count;
    let proto = edgedis_for(Scheme::EdgeDis, &cfg, blocks, true);
    let mut sim = Sim::new(Net::from_config(&cfg, blocks), proto, &FaultPlan::default());
    sim.run(|p, net| net.now() >= 600.0 && p.coordinators().len() == 1).unwrap();
    let (leader, term) = sim.proto.coordinators()[0];
    let elections = sim.proto.counters().elections;
    let now = sim.net.now();
    sim.net.schedule_fault(ScriptedFault { at_ms: now + 1.0, node: leader, kind: FaultKind::Crash });
    sim.net.schedule_fault(ScriptedFault { at_ms: now + 800.0, node: leader, kind: FaultKind::Recover });
    sim.run_to_completion().unwrap();
    assert!(sim.proto.finish().is_some());
    assert!(sim.proto.nodes().all(|s| s.is_complete()));
    assert!(sim.proto.counters().elections > elections);
    assert!(sim.proto.nodes().all(|s| s.term > term));
    assert!(sim.proto.violations().is_empty(), "{:?}", sim.proto.violations());
}

#[test]
fn uniqueness_scenario() {
    let v = run_uniqueness_scenario();
    assert!(v.passed(), "{v}");
    assert_eq!(v.coordinator_terms, vec![4, 5, 7, 8, 9]);
}

#[test]
fn election_never_beats_the_timeout() {
    for seed in 1..=5 {
        let s = measure_election(&RunConfig::default(), 16, 250.0, seed).unwrap();
        assert!(s.election_ms >= 250.0, "{s:?}");
    }
}
