use std::collections::BTreeSet;

use edgedis_core::baselines::steiner::{steiner_tree, WeightedGraph};
use proptest::prelude::*;

/// Minimum spanning tree weight of the subgraph induced by `keep`, or None
/// when that subgraph is disconnected.
fn induced_mst(g: &WeightedGraph, keep: &BTreeSet<usize>) -> Option<f64> {
    let start = *keep.iter().next()?;
    let mut inside = BTreeSet::from([start]);
    let mut total = 0.0;
    while inside.len() < keep.len() {
        let best = inside
            .iter()
            .flat_map(|&u| g.neighbors(u).iter().map(move |&(v, w)| (v, w)))
            .filter(|(v, _)| keep.contains(v) && !inside.contains(v))
            .min_by(|a, b| a.1.total_cmp(&b.1))?;
        inside.insert(best.0);
        total += best.1;
    }
    Some(total)
}

/// Exact Steiner tree weight by trying every set of extra vertices.
fn brute_force(g: &WeightedGraph, required: &BTreeSet<usize>) -> f64 {
    let others: Vec<usize> = (0..g.vertex_count()).filter(|v| !required.contains(v)).collect();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << others.len()) {
        let mut keep = required.clone();
        for (i, &v) in others.iter().enumerate() {
            if mask & (1 << i) != 0 {
                keep.insert(v);
            }
        }
        if let Some(w) = induced_mst(g, &keep) {
            best = best.min(w);
        }
    }
    best
}

fn graph(n: usize, edges: &[(usize, usize, f64)]) -> WeightedGraph {
    let mut g = WeightedGraph::new(n);
    for &(a, b, w) in edges {
        g.add_edge(a, b, w);
    }
    g
}

fn arb_graph() -> impl Strategy<Value = (WeightedGraph, usize, Vec<usize>)> {
    (3usize..=8).prop_flat_map(|n| {
        let chords = proptest::collection::vec((0..n, 0..n, 1u32..=10), 0..(2 * n));
        let path = proptest::collection::vec(1u32..=10, n - 1);
        let terminals = proptest::collection::btree_set(0..n, 1..=n);
        (Just(n), path, chords, terminals, 0..n)
    })
    .prop_map(|(n, path, chords, terminals, root)| {
        let mut g = WeightedGraph::new(n);
        for (i, w) in path.into_iter().enumerate() {
            g.add_edge(i, i + 1, w as f64);
        }
        for (a, b, w) in chords {
            if a != b {
                g.add_edge(a, b, w as f64);
            }
        }
        (g, root, terminals.into_iter().collect())
    })
}

proptest! {
    #[test]
    fn within_twice_optimal((g, root, terminals) in arb_graph()) {
        let tree = steiner_tree(&g, root, &terminals).unwrap();
        let mut required: BTreeSet<usize> = terminals.iter().copied().collect();
        required.insert(root);
        let opt = brute_force(&g, &required);
        prop_assert!(tree.weight <= 2.0 * opt + 1e-9, "tree {} opt {}", tree.weight, opt);
        prop_assert!(tree.weight >= opt - 1e-9);

        // A tree over its members that touches every required vertex.
        prop_assert!(required.is_subset(&tree.members));
        let edges = tree.edges();
        prop_assert_eq!(edges.len() + 1, tree.members.len());
        let mut sum = 0.0;
        for (p, c) in edges {
            let w = g.weight(p, c);
            prop_assert!(w.is_some(), "edge {p}-{c} not in graph");
            sum += w.unwrap();
        }
        prop_assert!((sum - tree.weight).abs() < 1e-9);
        for &v in &tree.members {
            let mut at = v;
            let mut hops = 0;
            while let Some(p) = tree.parent[at] {
                at = p;
                hops += 1;
                prop_assert!(hops <= g.vertex_count());
            }
            prop_assert_eq!(at, root);
        }
    }
}

#[test]
fn root_only() {
    let g = graph(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]);
    let tree = steiner_tree(&g, 2, &[]).unwrap();
    assert_eq!(tree.weight, 0.0);
    assert_eq!(tree.members, BTreeSet::from([2]));
    let tree = steiner_tree(&g, 2, &[2]).unwrap();
    assert_eq!(tree.members, BTreeSet::from([2]));
}

#[test]
fn star_is_exact() {
    let g = graph(5, &[(0, 1, 2.0), (0, 2, 3.0), (0, 3, 4.0), (0, 4, 5.0), (1, 2, 9.0)]);
    let tree = steiner_tree(&g, 0, &[1, 2, 3, 4]).unwrap();
    assert_eq!(tree.weight, 14.0);
    assert_eq!(tree.children(0), vec![1, 2, 3, 4]);
}

#[test]
fn steiner_point_through_hub() {
    // Terminals 1..3 are far apart but share a cheap hub 4.
    let g = graph(
        5,
        &[(0, 1, 10.0), (1, 2, 10.0), (2, 3, 10.0), (0, 4, 1.0), (1, 4, 1.0), (2, 4, 1.0), (3, 4, 1.0)],
    );
    let tree = steiner_tree(&g, 0, &[1, 2, 3]).unwrap();
    assert_eq!(tree.weight, 4.0);
    assert!(tree.members.contains(&4));
}

#[test]
fn unreachable_terminal_is_an_error() {
    let g = graph(4, &[(0, 1, 1.0), (2, 3, 1.0)]);
    assert!(steiner_tree(&g, 0, &[3]).is_err());
}
