//! Seeded edge-server topologies with near-uniform degree.

use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::model::NodeId;

/// Undirected graph over edge servers 1..=n.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    n: usize,
    adjacency: Vec<BTreeSet<u32>>,
}

impl Topology {
    pub fn from_edges(n: usize, edges: &[(u32, u32)]) -> Result<Self, Error> {
        let mut adjacency = vec![BTreeSet::new(); n + 1];
        for &(a, b) in edges {
            if a == b || a == 0 || b == 0 || a as usize > n || b as usize > n {
                return Err(Error::InvalidTopology(format!("bad edge ({a}, {b})")));
            }
            adjacency[a as usize].insert(b);
            adjacency[b as usize].insert(a);
        }
        Ok(Topology { n, adjacency })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn neighbors(&self, node: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adjacency[node.index()].iter().map(|&v| NodeId(v))
    }

    pub fn degree(&self, node: NodeId) -> usize {
        self.adjacency[node.index()].len()
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.adjacency[a.index()].contains(&b.0)
    }

    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::new();
        for a in 1..=self.n {
            for &b in self.adjacency[a].range(a as u32 + 1..) {
                out.push((NodeId(a as u32), NodeId(b)));
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(|s| s.len()).sum::<usize>() / 2
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        self.hops_from(NodeId(1)).iter().skip(1).all(|d| d.is_some())
    }

    /// BFS hop counts from `src`; index 0 is unused.
    pub fn hops_from(&self, src: NodeId) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n + 1];
        let mut queue = VecDeque::new();
        dist[src.index()] = Some(0);
        queue.push_back(src.0);
        while let Some(u) = queue.pop_front() {
            let d = dist[u as usize].unwrap_or(0);
            for &v in &self.adjacency[u as usize] {
                if dist[v as usize].is_none() {
                    dist[v as usize] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }
}

/// Builds a connected topology with `round(nd * n)` edges whose degrees
/// differ by at most one.
///
/// A circulant over offsets {1, s2, ...} fixes the regular part, then a
/// seeded near-matching adds the remainder.
pub fn build_topology(n: usize, nd: f64, seed: u64) -> Result<Topology, Error> {
    if n == 0 {
        return Err(Error::InvalidTopology("no edge servers".into()));
    }
    let wanted = (nd * n as f64).round();
    if !(wanted >= (n - 1) as f64) {
        return Err(Error::InvalidTopology(format!(
            "{wanted} edges cannot connect {n} servers"
        )));
    }
    let max_edges = n * (n - 1) / 2;
    let m = (wanted as usize).min(max_edges);
    if n <= 3 || m == max_edges {
        return complete_or_path(n, m);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7090_1091_cafe_f00d);
    let per_node = m / n;
    let extra = m - per_node * n;

    // Offsets below n/2 each contribute exactly n edges.
    let mut candidates: Vec<usize> = (2..n.div_ceil(2)).collect();
    candidates.shuffle(&mut rng);
    let mut offsets = vec![1usize];
    offsets.extend(candidates.into_iter().take(per_node.saturating_sub(1)));
    offsets.sort_unstable();

    let mut edges = BTreeSet::new();
    for &s in &offsets {
        for i in 0..n {
            let a = (i + 1) as u32;
            let b = ((i + s) % n + 1) as u32;
            edges.insert((a.min(b), a.max(b)));
        }
    }

    for _ in 0..256 {
        if let Some(added) = near_matching(n, extra, &edges, &mut rng) {
            let mut all = edges.clone();
            all.extend(added);
            let list: Vec<(u32, u32)> = all.into_iter().collect();
            let topo = Topology::from_edges(n, &list)?;
            debug_assert_eq!(topo.edge_count(), m);
            return Ok(topo);
        }
    }
    Err(Error::InvalidTopology(format!(
        "could not place {extra} chords on {n} servers"
    )))
}

/// Picks `count` new edges so every node gains either k or k+1 of them,
/// filling the least-loaded nodes first.
fn near_matching(
    n: usize,
    count: usize,
    existing: &BTreeSet<(u32, u32)>,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<(u32, u32)>> {
    let mut load = vec![0usize; n + 1];
    let mut added: BTreeSet<(u32, u32)> = BTreeSet::new();
    for _ in 0..count {
        let low = (1..=n).map(|v| load[v]).min()?;
        let mut firsts: Vec<usize> = (1..=n).filter(|&v| load[v] == low).collect();
        firsts.shuffle(rng);
        let mut placed = false;
        for &u in &firsts {
            let mut partners: Vec<usize> = (1..=n)
                .filter(|&v| {
                    let key = ((u.min(v)) as u32, (u.max(v)) as u32);
                    v != u && !existing.contains(&key) && !added.contains(&key)
                })
                .collect();
            if partners.is_empty() {
                continue;
            }
            let best = partners.iter().map(|&v| load[v]).min()?;
            partners.retain(|&v| load[v] == best);
            let v = partners[rng.gen_range(0..partners.len())];
            load[u] += 1;
            load[v] += 1;
            added.insert(((u.min(v)) as u32, (u.max(v)) as u32));
            placed = true;
            break;
        }
        if !placed {
            return None;
        }
    }
    let lo = (1..=n).map(|v| load[v]).min().unwrap_or(0);
    let hi = (1..=n).map(|v| load[v]).max().unwrap_or(0);
    (hi - lo <= 1).then(|| added.into_iter().collect())
}

fn complete_or_path(n: usize, m: usize) -> Result<Topology, Error> {
    let mut edges = Vec::new();
    for a in 1..n as u32 {
        edges.push((a, a + 1));
    }
    'outer: for gap in 2..n as u32 {
        for a in 1..=n as u32 - gap {
            if edges.len() >= m {
                break 'outer;
            }
            edges.push((a, a + gap));
        }
    }
    Topology::from_edges(n, &edges)
}
