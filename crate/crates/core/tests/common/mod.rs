#![allow(dead_code)]

use picker_core::graph::{NodeId, NodeKind, Product, StoreEdge, StoreGraph, StoreNode};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random connected store: entrance 0, prep zone last, one exit, the rest
/// alternating intersections and product positions. Lengths are multiples
/// of 0.25 so sums are exact in floating point.
pub fn random_store(n: usize, extra_edges: usize, seed: u64) -> StoreGraph {
    assert!(n >= 4);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes: Vec<StoreNode> = (0..n)
        .map(|i| {
            let kind = match i {
                0 => NodeKind::Entrance,
                1 => NodeKind::Exit,
                _ if i == n - 1 => NodeKind::PrepZone,
                _ if i % 2 == 0 => NodeKind::ProductPosition,
                _ => NodeKind::Intersection,
            };
            StoreNode { id: NodeId(i), x: rng.random_range(0.0..50.0), y: rng.random_range(0.0..50.0), kind }
        })
        .collect();
    let mut order: Vec<usize> = (1..n).collect();
    order.shuffle(&mut rng);
    let mut placed = vec![0usize];
    let mut edges = Vec::new();
    let len = |rng: &mut ChaCha8Rng| rng.random_range(1..=40) as f64 * 0.25;
    for v in order {
        let u = placed[rng.random_range(0..placed.len())];
        edges.push(StoreEdge { u: NodeId(u), v: NodeId(v), length: len(&mut rng) });
        placed.push(v);
    }
    let extra_edges = extra_edges.min(n * (n - 1) / 2 - (n - 1));
    let mut added = 0;
    while added < extra_edges {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u == v || edges.iter().any(|e| (e.u.0, e.v.0) == (u, v) || (e.u.0, e.v.0) == (v, u)) {
            continue;
        }
        edges.push(StoreEdge { u: NodeId(u), v: NodeId(v), length: len(&mut rng) });
        added += 1;
    }
    let products = nodes
        .iter()
        .filter(|s| s.kind == NodeKind::ProductPosition)
        .map(|s| Product { sku: format!("P{}", s.id.0), node: s.id })
        .collect();
    StoreGraph::new(nodes, edges, products).unwrap()
}

/// Minimum over every simple path from `from` of the path cost to each
/// node, by exhaustive depth-first enumeration. `step` prices entering a node.
pub fn enumerate_min_costs(graph: &StoreGraph, from: NodeId, step: &dyn Fn(NodeId, NodeId) -> f64) -> Vec<f64> {
    fn go(g: &StoreGraph, cur: NodeId, cost: f64, seen: &mut Vec<bool>, step: &dyn Fn(NodeId, NodeId) -> f64, best: &mut Vec<f64>) {
        best[cur.0] = best[cur.0].min(cost);
        for &(m, _) in g.neighbors(cur) {
            if !seen[m.0] {
                seen[m.0] = true;
                go(g, m, cost + step(cur, m), seen, step, best);
                seen[m.0] = false;
            }
        }
    }
    let mut seen = vec![false; graph.node_count()];
    seen[from.0] = true;
    let mut best = vec![f64::INFINITY; graph.node_count()];
    go(graph, from, 0.0, &mut seen, step, &mut best);
    best
}

pub fn path_length(graph: &StoreGraph, path: &[NodeId]) -> f64 {
    path.windows(2).map(|w| graph.edge_length(w[0], w[1]).unwrap()).sum()
}

/// All-pairs distances by repeated edge relaxation until nothing changes.
pub fn relaxation_fixpoint(graph: &StoreGraph) -> Vec<Vec<f64>> {
    let n = graph.node_count();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    loop {
        let mut changed = false;
        for i in 0..n {
            for k in 0..n {
                for &(j, w) in graph.neighbors(NodeId(k)) {
                    let via = d[i][k] + w;
                    if via < d[i][j.0] {
                        d[i][j.0] = via;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            return d;
        }
    }
}
