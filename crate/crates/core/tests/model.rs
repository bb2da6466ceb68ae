use edgedis_core::config::{parse_size, RunConfig, GB, KB, MB};
use edgedis_core::model::{checked_majority, majority, partition, BlockId, BlockSet};
use edgedis_core::simnet::build_topology;
use proptest::prelude::*;

#[test]
fn partition_oracles() {
    assert_eq!(partition(GB, 512 * KB).unwrap(), 2048);
    assert_eq!(partition(64 * MB, 512 * KB).unwrap(), 128);
    assert_eq!(partition(GB + 1, 512 * KB).unwrap(), 2049);
    assert_eq!(partition(1, 512 * KB).unwrap(), 1);
    assert!(partition(0, 512 * KB).is_err());
    assert!(partition(GB, 0).is_err());
}

#[test]
fn majority_oracles() {
    for (n, m) in [(1, 1), (2, 2), (3, 2), (4, 3), (5, 3), (8, 5), (32, 17), (128, 65)] {
        assert_eq!(majority(n), m, "n={n}");
    }
    assert!(checked_majority(0).is_err());
}

#[test]
fn sizes_parse() {
    assert_eq!(parse_size("512KB").unwrap(), 512 * KB);
    assert_eq!(parse_size("1GB").unwrap(), GB);
    assert_eq!(parse_size("64MB").unwrap(), 64 * MB);
    assert_eq!(parse_size("4096").unwrap(), 4096);
    assert!(parse_size("lots").is_err());
}

#[test]
fn defaults_validate() {
    RunConfig::default().validate().unwrap();
    let bad = [
        RunConfig { nd: 0.9, ..RunConfig::default() },
        RunConfig { failure_rate: -0.1, ..RunConfig::default() },
        RunConfig { failure_rate: 1.1, ..RunConfig::default() },
        RunConfig { delay_lo_ms: 20.0, ..RunConfig::default() },
        RunConfig { cost_ratio: 0.5, ..RunConfig::default() },
        RunConfig { entry_fraction: 0.0, ..RunConfig::default() },
    ];
    for cfg in bad {
        assert!(cfg.validate().is_err(), "{cfg:?}");
    }
}

#[test]
fn ring_at_unit_density() {
    let t = build_topology(32, 1.0, 5).unwrap();
    assert_eq!(t.edge_count(), 32);
    for v in 1..=32u32 {
        assert_eq!(t.degree(edgedis_core::model::NodeId(v)), 2);
    }
}

proptest! {
    #[test]
    fn topology_shape(n in 4usize..=128, extra in 0.0f64..1.0, seed in any::<u64>()) {
        let nd = 1.0 + extra * ((n - 1) as f64 - 1.0).min(3.0);
        let t = build_topology(n, nd, seed).unwrap();
        let m = ((nd * n as f64).round() as usize).min(n * (n - 1) / 2);
        prop_assert_eq!(t.edge_count(), m);
        prop_assert!(t.is_connected());
        let degrees: Vec<usize> = (1..=n as u32).map(|v| t.degree(edgedis_core::model::NodeId(v))).collect();
        let lo = *degrees.iter().min().unwrap();
        let hi = *degrees.iter().max().unwrap();
        prop_assert!(hi - lo <= 1, "degrees {lo}..{hi}");
        prop_assert_eq!(degrees.iter().sum::<usize>(), 2 * m);
    }

    #[test]
    fn topology_is_seeded(n in 4usize..=64, seed in any::<u64>()) {
        let a = build_topology(n, 1.4, seed).unwrap().edges();
        let b = build_topology(n, 1.4, seed).unwrap().edges();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn partition_covers_data(ds in 1u64..(4 * GB), bs in 1u64..(4 * MB)) {
        let k = partition(ds, bs).unwrap() as u64;
        prop_assert!(k * bs >= ds);
        prop_assert!((k - 1) * bs < ds);
    }

    #[test]
    fn majority_is_a_strict_majority(n in 1usize..10_000) {
        let m = majority(n);
        prop_assert!(2 * m > n);
        prop_assert!(2 * (m - 1) <= n);
    }

    #[test]
    fn block_set_counts(blocks in 1u32..300, picks in proptest::collection::vec(1u32..300, 0..400)) {
        let mut set = BlockSet::new(blocks);
        let mut seen = std::collections::BTreeSet::new();
        for p in picks.into_iter().filter(|&p| p <= blocks) {
            prop_assert_eq!(set.insert(BlockId(p)), seen.insert(p));
        }
        prop_assert_eq!(set.held() as usize, seen.len());
        prop_assert_eq!(set.is_full(), seen.len() == blocks as usize);
        let missing = set.missing_upto(blocks);
        prop_assert_eq!(missing.len() + seen.len(), blocks as usize);
    }
}
