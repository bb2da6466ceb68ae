//! Metric-closure Steiner tree approximation (within twice the optimum).

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use crate::error::Error;

/// Undirected graph with non-negative edge weights.
#[derive(Clone, Debug, Default)]
pub struct WeightedGraph {
    adj: Vec<Vec<(usize, f64)>>,
}

impl WeightedGraph {
    pub fn new(vertices: usize) -> Self {
        WeightedGraph {
            adj: vec![Vec::new(); vertices],
        }
    }

    pub fn add_edge(&mut self, a: usize, b: usize, w: f64) {
        self.adj[a].push((b, w));
        self.adj[b].push((a, w));
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.adj[v]
    }

    pub fn weight(&self, a: usize, b: usize) -> Option<f64> {
        self.adj[a]
            .iter()
            .filter(|(v, _)| *v == b)
            .map(|(_, w)| *w)
            .min_by(|x, y| x.total_cmp(y))
    }
}

/// A tree given by parent pointers; `parent[root]` is `None`, as is the
/// parent of every vertex outside the tree.
#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    pub root: usize,
    pub parent: Vec<Option<usize>>,
    pub members: BTreeSet<usize>,
    pub weight: f64,
}

impl Tree {
    pub fn children(&self, v: usize) -> Vec<usize> {
        self.members
            .iter()
            .copied()
            .filter(|&c| self.parent[c] == Some(v))
            .collect()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.members
            .iter()
            .filter_map(|&v| self.parent[v].map(|p| (p, v)))
            .collect()
    }
}

#[derive(PartialEq)]
struct Key {
    dist: f64,
    seq: u64,
    vertex: usize,
}

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Shortest distances and predecessors from `src`. Among equal-length paths
/// the one discovered first wins, which keeps the result BFS-shaped.
fn shortest_paths(g: &WeightedGraph, src: usize) -> (Vec<f64>, Vec<Option<usize>>) {
    let n = g.vertex_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    let mut seq = 0;
    dist[src] = 0.0;
    heap.push(Key {
        dist: 0.0,
        seq,
        vertex: src,
    });
    while let Some(Key { vertex: u, .. }) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for &(v, w) in g.neighbors(u) {
            let d = dist[u] + w;
            if d < dist[v] {
                dist[v] = d;
                pred[v] = Some(u);
                seq += 1;
                heap.push(Key { dist: d, seq, vertex: v });
            }
        }
    }
    (dist, pred)
}

/// Prim's algorithm over the vertices in `allowed`, using `edge` for the
/// weight between two of them. Ties go to the earliest-improved key.
fn prim(
    root: usize,
    allowed: &[usize],
    vertex_count: usize,
    mut edge: impl FnMut(usize, usize) -> Option<f64>,
) -> Vec<Option<usize>> {
    let mut in_tree = vec![false; vertex_count];
    let mut best = vec![f64::INFINITY; vertex_count];
    let mut link = vec![None; vertex_count];
    let mut heap = BinaryHeap::new();
    let mut seq = 0;
    best[root] = 0.0;
    heap.push(Key {
        dist: 0.0,
        seq,
        vertex: root,
    });
    while let Some(Key { vertex: u, .. }) = heap.pop() {
        if in_tree[u] {
            continue;
        }
        in_tree[u] = true;
        for &v in allowed {
            if in_tree[v] || v == u {
                continue;
            }
            if let Some(w) = edge(u, v) {
                if w < best[v] {
                    best[v] = w;
                    link[v] = Some(u);
                    seq += 1;
                    heap.push(Key { dist: w, seq, vertex: v });
                }
            }
        }
    }
    link
}

/// Connects `root` and all `terminals` with a tree whose weight is at most
/// twice that of the optimal Steiner tree.
pub fn steiner_tree(g: &WeightedGraph, root: usize, terminals: &[usize]) -> Result<Tree, Error> {
    let n = g.vertex_count();
    let mut terms: Vec<usize> = terminals.to_vec();
    terms.push(root);
    terms.sort_unstable();
    terms.dedup();
    if let Some(&bad) = terms.iter().find(|&&t| t >= n) {
        return Err(Error::InvalidTopology(format!("terminal {bad} is not a vertex")));
    }

    let mut paths = vec![None; n];
    for &t in &terms {
        paths[t] = Some(shortest_paths(g, t));
    }
    for &t in &terms {
        let (dist, _) = paths[root].as_ref().expect("root paths");
        if !dist[t].is_finite() {
            return Err(Error::InvalidTopology(format!("terminal {t} is unreachable")));
        }
    }

    // MST of the metric closure over the terminals.
    let closure_link = prim(root, &terms, n, |a, b| {
        paths[a].as_ref().map(|(d, _)| d[b]).filter(|d| d.is_finite())
    });

    // Expand closure edges into graph paths.
    let mut used: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut vertices: BTreeSet<usize> = terms.iter().copied().collect();
    for &t in &terms {
        let Some(from) = closure_link[t] else { continue };
        let (_, pred) = paths[from].as_ref().expect("paths from terminal");
        let mut v = t;
        while v != from {
            let p = pred[v].expect("reachable");
            used.insert((p.min(v), p.max(v)));
            vertices.insert(p);
            v = p;
        }
    }

    // MST of the expanded subgraph, then strip non-terminal leaves.
    let members: Vec<usize> = vertices.iter().copied().collect();
    let link = prim(root, &members, n, |a, b| {
        if used.contains(&(a.min(b), a.max(b))) {
            g.weight(a, b)
        } else {
            None
        }
    });
    let mut parent = vec![None; n];
    for &v in &members {
        parent[v] = link[v];
    }
    let terminal_set: BTreeSet<usize> = terms.iter().copied().collect();
    let mut members: BTreeSet<usize> = vertices;
    loop {
        let leaves: Vec<usize> = members
            .iter()
            .copied()
            .filter(|&v| !terminal_set.contains(&v) && !members.iter().any(|&c| parent[c] == Some(v)))
            .collect();
        if leaves.is_empty() {
            break;
        }
        for v in leaves {
            members.remove(&v);
            parent[v] = None;
        }
    }
    let weight = members
        .iter()
        .filter_map(|&v| parent[v].and_then(|p| g.weight(p, v)))
        .sum();
    Ok(Tree {
        root,
        parent,
        members,
        weight,
    })
}
