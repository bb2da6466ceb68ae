//! Dissemination tree for the EDD-A baseline: a Steiner tree over the
//! cloud and all edge servers, cut into pieces of bounded diameter that the
//! cloud feeds directly.

use std::collections::{BTreeSet, VecDeque};

use crate::error::Error;
use crate::model::NodeId;
use crate::simnet::Topology;

use super::steiner::{steiner_tree, WeightedGraph};

#[derive(Clone, Debug, PartialEq)]
pub struct DisseminationTree {
    /// Children per node; index 0 is the cloud.
    pub children: Vec<Vec<NodeId>>,
    pub parent: Vec<Option<NodeId>>,
}

impl DisseminationTree {
    /// Number of pieces the cloud feeds.
    pub fn component_count(&self) -> usize {
        self.children[0].len()
    }

    /// Backhaul copies plus edge copies of one block, in edge-link units.
    pub fn cost(&self, cost_ratio: f64) -> f64 {
        let n = self.children.len() - 1;
        let k = self.component_count();
        cost_ratio * k as f64 + (n - k) as f64
    }

    /// Hops from the cloud, per node.
    pub fn depth(&self, node: NodeId) -> usize {
        let mut d = 0;
        let mut v = node;
        while let Some(p) = self.parent[v.index()] {
            d += 1;
            v = p;
        }
        d
    }
}

/// Picks the nodes at which a rooted tree is cut so that every remaining
/// piece has diameter at most `max_diameter`. Always includes `root`.
///
/// Bottom-up: a node keeps its children's heights and cuts the tallest one
/// while the two tallest would make a too-long path through it. This gives
/// the fewest pieces.
pub fn cut_points(children: &[Vec<usize>], root: usize, max_diameter: usize) -> Vec<usize> {
    let mut order = Vec::new();
    let mut stack = vec![root];
    while let Some(v) = stack.pop() {
        order.push(v);
        stack.extend(children[v].iter().copied());
    }
    let mut height = vec![0usize; children.len()];
    let mut cuts = vec![root];
    for &v in order.iter().rev() {
        let mut hs: Vec<(usize, usize)> = children[v].iter().map(|&c| (height[c] + 1, c)).collect();
        hs.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut i = 0;
        while i < hs.len() {
            let tallest = hs[i].0;
            let second = hs.get(i + 1).map_or(0, |h| h.0);
            if tallest > max_diameter || tallest + second > max_diameter {
                cuts.push(hs[i].1);
                i += 1;
            } else {
                break;
            }
        }
        height[v] = hs.get(i).map_or(0, |h| h.0);
    }
    cuts.sort_unstable();
    cuts
}

fn component(children: &[Vec<usize>], start: usize, cut: &BTreeSet<usize>) -> Vec<usize> {
    let mut out = vec![start];
    let mut i = 0;
    while i < out.len() {
        let v = out[i];
        for &c in &children[v] {
            if !cut.contains(&c) {
                out.push(c);
            }
        }
        i += 1;
    }
    out
}

/// Node of least eccentricity within `members` (ties to the smaller id).
fn center(members: &[usize], adj: &[Vec<usize>]) -> usize {
    let inside: BTreeSet<usize> = members.iter().copied().collect();
    let mut best = (usize::MAX, usize::MAX);
    for &s in members {
        let mut dist = vec![usize::MAX; adj.len()];
        dist[s] = 0;
        let mut q = VecDeque::from([s]);
        let mut ecc = 0;
        while let Some(u) = q.pop_front() {
            ecc = ecc.max(dist[u]);
            for &v in &adj[u] {
                if inside.contains(&v) && dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    q.push_back(v);
                }
            }
        }
        if (ecc, s) < best {
            best = (ecc, s);
        }
    }
    best.1
}

/// Greedy cover of the topology by balls of `radius` hops: repeatedly takes
/// the server reaching the most uncovered servers (ties to the smaller id).
pub fn cover_centers(topo: &Topology, radius: usize) -> Vec<NodeId> {
    let n = topo.node_count();
    let reach: Vec<Vec<usize>> = (1..=n)
        .map(|v| {
            topo.hops_from(NodeId(v as u32))
                .iter()
                .enumerate()
                .filter(|(_, h)| h.is_some_and(|h| h <= radius))
                .map(|(u, _)| u)
                .collect()
        })
        .collect();
    let mut covered = vec![false; n + 1];
    covered[0] = true;
    let mut left = n;
    let mut centers = Vec::new();
    while left > 0 {
        let mut best = (0, 0);
        for v in 1..=n {
            let gain = reach[v - 1].iter().filter(|&&u| !covered[u]).count();
            if gain > best.0 {
                best = (gain, v);
            }
        }
        for &u in &reach[best.1 - 1] {
            if !covered[u] {
                covered[u] = true;
                left -= 1;
            }
        }
        centers.push(NodeId(best.1 as u32));
    }
    centers.sort();
    centers
}

/// Hangs every server off its nearest center (first center wins ties)
/// through breadth-first search over `adj`.
fn forest(n: usize, centers: &[usize], adj: &[Vec<usize>]) -> DisseminationTree {
    let mut children = vec![Vec::new(); n + 1];
    let mut parent = vec![None; n + 1];
    let mut seen = vec![false; n + 1];
    let mut q = VecDeque::new();
    for &c in centers {
        children[0].push(NodeId(c as u32));
        parent[c] = Some(NodeId::CLOUD);
        seen[c] = true;
        q.push_back(c);
    }
    while let Some(u) = q.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                children[u].push(NodeId(v as u32));
                parent[v] = Some(NodeId(u as u32));
                q.push_back(v);
            }
        }
    }
    for c in &mut children {
        c.sort();
    }
    DisseminationTree { children, parent }
}

/// Cuts the Steiner tree over cloud and servers into pieces of diameter at
/// most `2 * max_depth` and feeds each piece at its center.
pub fn split_steiner(topo: &Topology, cost_ratio: f64, max_depth: usize) -> Result<DisseminationTree, Error> {
    let n = topo.node_count();
    let mut g = WeightedGraph::new(n + 1);
    for v in 1..=n {
        g.add_edge(0, v, cost_ratio);
    }
    for (a, b) in topo.edges() {
        g.add_edge(a.index(), b.index(), 1.0);
    }
    let terminals: Vec<usize> = (1..=n).collect();
    let steiner = steiner_tree(&g, 0, &terminals)?;

    let mut kids = vec![Vec::new(); n + 1];
    for (p, c) in steiner.edges() {
        kids[p].push(c);
    }
    for k in &mut kids {
        k.sort_unstable();
    }

    // Undirected edge-server part of the tree, used for re-rooting.
    let mut adj = vec![Vec::new(); n + 1];
    for (p, c) in steiner.edges() {
        if p != 0 {
            adj[p].push(c);
            adj[c].push(p);
        }
    }
    for a in &mut adj {
        a.sort_unstable();
    }

    let mut hubs = Vec::new();
    let max_diameter = 2 * max_depth;
    for &top in &kids[0] {
        let cuts = cut_points(&kids, top, max_diameter);
        let cut_set: BTreeSet<usize> = cuts.iter().copied().collect();
        for &c in &cuts {
            let members = component(&kids, c, &cut_set);
            hubs.push(center(&members, &adj));
        }
    }
    // Each piece is a subtree, so BFS from the hubs inside the tree keeps
    // every server in its own piece or one no farther away.
    Ok(forest(n, &hubs, &adj))
}

/// Builds the EDD-A tree: every server within `max_depth` hops of the server
/// the cloud feeds it through. Of the split Steiner tree and the greedy ball
/// cover, the one with fewer cloud links is kept.
pub fn plan_tree(topo: &Topology, cost_ratio: f64, max_depth: usize) -> Result<DisseminationTree, Error> {
    let n = topo.node_count();
    let split = split_steiner(topo, cost_ratio, max_depth)?;
    let mut adj = vec![Vec::new(); n + 1];
    for (a, b) in topo.edges() {
        adj[a.index()].push(b.index());
        adj[b.index()].push(a.index());
    }
    for a in &mut adj {
        a.sort_unstable();
    }
    let centers: Vec<usize> = cover_centers(topo, max_depth).iter().map(|c| c.index()).collect();
    let cover = forest(n, &centers, &adj);
    Ok(if cover.component_count() < split.component_count() {
        cover
    } else {
        split
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simnet::build_topology;

    #[test]
    fn path_splits_into_bounded_pieces() {
        // 0 - 1 - 2 - ... - 14
        let mut kids = vec![Vec::new(); 15];
        for v in 0..14 {
            kids[v].push(v + 1);
        }
        let cuts = cut_points(&kids, 0, 6);
        assert_eq!(cuts.len(), 3);
        let mut bounds = cuts.clone();
        bounds.push(15);
        for w in bounds.windows(2) {
            assert!(w[1] - w[0] <= 7);
        }
    }

    #[test]
    fn ring_of_32_needs_five_pieces() {
        let topo = build_topology(32, 1.0, 1).unwrap();
        let tree = plan_tree(&topo, 20.0, 3).unwrap();
        assert_eq!(tree.component_count(), 5);
        assert_eq!(tree.cost(20.0), 127.0);
        for v in 1..=32 {
            assert!(tree.depth(NodeId(v)) <= 4, "node {v} too deep");
        }
    }

    #[test]
    fn denser_graphs_need_fewer_pieces() {
        let mut last = usize::MAX;
        for nd in [1.0, 1.4, 2.0] {
            let topo = build_topology(32, nd, 1).unwrap();
            let k = plan_tree(&topo, 20.0, 3).unwrap().component_count();
            assert!(k < last, "nd={nd} k={k}");
            last = k;
        }
    }

    #[test]
    fn every_server_is_reached_once() {
        let topo = build_topology(64, 1.6, 5).unwrap();
        let tree = plan_tree(&topo, 20.0, 3).unwrap();
        let mut count = 0;
        for kids in &tree.children {
            count += kids.len();
        }
        assert_eq!(count, 64);
        for v in 1..=64u32 {
            let p = tree.parent[v as usize].unwrap();
            assert!(p.is_cloud() || topo.has_edge(p, NodeId(v)));
            assert!(tree.depth(NodeId(v)) <= 4);
        }
    }
}
