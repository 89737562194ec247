//! Store layout graph and shortest-path services.
//!
//! The store is an undirected, sparse weighted graph. Node 0 is the entrance
//! where customer paths start; the prep zone is where pickers start and hand
//! over orders. Edge lengths are in meters and are the only source of
//! distance: node coordinates are carried for generation and plotting.
//!
//! Every shortest-path query ranks paths by `(cost, hop count)` and breaks the
//! remaining ties with the lexicographically smallest node sequence, so all
//! routing is reproducible.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};
use std::fmt;
use std::fs;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    #[inline]
    pub fn idx(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Entrance,
    Exit,
    Intersection,
    ProductPosition,
    PrepZone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreNode {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreEdge {
    pub u: NodeId,
    pub v: NodeId,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Product {
    pub sku: String,
    pub node: NodeId,
}

/// On-disk layout format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutFile {
    pub nodes: Vec<StoreNode>,
    pub edges: Vec<StoreEdge>,
    #[serde(default)]
    pub products: Vec<Product>,
}

#[derive(Debug, Clone)]
pub struct StoreGraph {
    nodes: Vec<StoreNode>,
    edges: Vec<StoreEdge>,
    products: Vec<Product>,
    // neighbor lists sorted by node id
    adjacency: Vec<Vec<(NodeId, f64)>>,
}

impl StoreGraph {
    /// Builds the graph. Node ids must be exactly `0..n` and every edge must
    /// reference existing nodes; semantic checks live in [`validate`].
    pub fn new(mut nodes: Vec<StoreNode>, edges: Vec<StoreEdge>, products: Vec<Product>) -> Result<Self> {
        nodes.sort_by_key(|n| n.id);
        for (i, n) in nodes.iter().enumerate() {
            if n.id.idx() != i {
                return Err(Error::InvalidLayout(format!(
                    "node ids must be contiguous from 0; found {} at position {}",
                    n.id, i
                )));
            }
        }
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for e in &edges {
            for end in [e.u, e.v] {
                if end.idx() >= nodes.len() {
                    return Err(Error::InvalidLayout(format!("edge references unknown node {end}")));
                }
            }
            if e.u != e.v {
                adjacency[e.u.idx()].push((e.v, e.length));
                adjacency[e.v.idx()].push((e.u, e.length));
            }
        }
        for list in &mut adjacency {
            list.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
            // parallel edges collapse onto the shortest one
            list.dedup_by_key(|(n, _)| *n);
        }
        for p in &products {
            if p.node.idx() >= nodes.len() {
                return Err(Error::InvalidLayout(format!("product {} references unknown node {}", p.sku, p.node)));
            }
        }
        Ok(Self { nodes, edges, products, adjacency })
    }

    pub fn from_layout(layout: LayoutFile) -> Result<Self> {
        Self::new(layout.nodes, layout.edges, layout.products)
    }

    pub fn to_layout(&self) -> LayoutFile {
        LayoutFile { nodes: self.nodes.clone(), edges: self.edges.clone(), products: self.products.clone() }
    }

    /// Loads a layout file, rejecting it when [`validate`] reports anything.
    pub fn load(path: impl AsRef<FsPath>) -> Result<Self> {
        let text = fs::read_to_string(path.as_ref())?;
        let layout: LayoutFile = serde_json::from_str(&text)?;
        let graph = Self::from_layout(layout)?;
        let report = validate(&graph);
        if !report.is_empty() {
            let msgs: Vec<String> = report.iter().map(|v| v.to_string()).collect();
            return Err(Error::InvalidLayout(msgs.join("; ")));
        }
        Ok(graph)
    }

    pub fn save(&self, path: impl AsRef<FsPath>) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_layout())?;
        fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[StoreNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[StoreEdge] {
        &self.edges
    }

    pub fn products(&self) -> &[Product] {
        &self.products
    }

    pub fn node(&self, id: NodeId) -> &StoreNode {
        &self.nodes[id.idx()]
    }

    pub fn contains(&self, id: NodeId) -> bool {
        id.idx() < self.nodes.len()
    }

    pub fn kind(&self, id: NodeId) -> NodeKind {
        self.nodes[id.idx()].kind
    }

    /// Neighbors with edge lengths, sorted by node id.
    pub fn neighbors(&self, id: NodeId) -> &[(NodeId, f64)] {
        &self.adjacency[id.idx()]
    }

    pub fn edge_length(&self, u: NodeId, v: NodeId) -> Option<f64> {
        self.neighbors(u).iter().find(|(n, _)| *n == v).map(|(_, l)| *l)
    }

    pub fn is_adjacent(&self, u: NodeId, v: NodeId) -> bool {
        self.neighbors(u).binary_search_by_key(&v, |(n, _)| *n).is_ok()
    }

    pub fn entrance(&self) -> NodeId {
        NodeId(0)
    }

    pub fn prep_zone(&self) -> Option<NodeId> {
        self.nodes.iter().find(|n| n.kind == NodeKind::PrepZone).map(|n| n.id)
    }

    pub fn exits(&self) -> Vec<NodeId> {
        self.nodes_of_kind(NodeKind::Exit)
    }

    /// Nodes of kind `product_position`, ascending.
    pub fn product_nodes(&self) -> Vec<NodeId> {
        self.nodes_of_kind(NodeKind::ProductPosition)
    }

    fn nodes_of_kind(&self, kind: NodeKind) -> Vec<NodeId> {
        self.nodes.iter().filter(|n| n.kind == kind).map(|n| n.id).collect()
    }

    /// Resolves a product reference: an SKU first, then a bare node id.
    pub fn resolve_product(&self, token: &str) -> Option<NodeId> {
        if let Some(p) = self.products.iter().find(|p| p.sku == token) {
            return Some(p.node);
        }
        token
            .parse::<usize>()
            .ok()
            .map(NodeId)
            .filter(|id| self.contains(*id) && self.kind(*id) == NodeKind::ProductPosition)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Empty,
    EntranceNotZero,
    MultipleEntrances(usize),
    NoPrepZone,
    MultiplePrepZones(usize),
    NoExit,
    SelfLoop(NodeId),
    NonPositiveLength { u: NodeId, v: NodeId, length: f64 },
    Unreachable(NodeId),
    ProductNotAtProductNode { sku: String, node: NodeId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "layout has no nodes"),
            Violation::EntranceNotZero => write!(f, "node 0 is not the entrance"),
            Violation::MultipleEntrances(n) => write!(f, "{n} entrance nodes (expected 1)"),
            Violation::NoPrepZone => write!(f, "no prep_zone node"),
            Violation::MultiplePrepZones(n) => write!(f, "{n} prep_zone nodes (expected 1)"),
            Violation::NoExit => write!(f, "no exit node"),
            Violation::SelfLoop(n) => write!(f, "self-loop at node {n}"),
            Violation::NonPositiveLength { u, v, length } => {
                write!(f, "edge {u}-{v} has non-positive length {length}")
            }
            Violation::Unreachable(n) => write!(f, "node {n} is unreachable from the entrance"),
            Violation::ProductNotAtProductNode { sku, node } => {
                write!(f, "product {sku} sits on node {node}, which is not a product position")
            }
        }
    }
}

/// Checks depots, edge lengths and connectivity. An empty report means the
/// layout is usable by every other module.
pub fn validate(graph: &StoreGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    if graph.node_count() == 0 {
        out.push(Violation::Empty);
        return out;
    }
    let count = |k: NodeKind| graph.nodes().iter().filter(|n| n.kind == k).count();
    if graph.kind(NodeId(0)) != NodeKind::Entrance {
        out.push(Violation::EntranceNotZero);
    }
    let entrances = count(NodeKind::Entrance);
    if entrances > 1 {
        out.push(Violation::MultipleEntrances(entrances));
    }
    match count(NodeKind::PrepZone) {
        0 => out.push(Violation::NoPrepZone),
        1 => {}
        n => out.push(Violation::MultiplePrepZones(n)),
    }
    if count(NodeKind::Exit) == 0 {
        out.push(Violation::NoExit);
    }
    for e in graph.edges() {
        if e.u == e.v {
            out.push(Violation::SelfLoop(e.u));
        }
        if !(e.length > 0.0) || !e.length.is_finite() {
            out.push(Violation::NonPositiveLength { u: e.u, v: e.v, length: e.length });
        }
    }
    let mut seen = vec![false; graph.node_count()];
    let mut stack = vec![NodeId(0)];
    seen[0] = true;
    while let Some(n) = stack.pop() {
        for &(m, _) in graph.neighbors(n) {
            if !seen[m.idx()] {
                seen[m.idx()] = true;
                stack.push(m);
            }
        }
    }
    for (i, s) in seen.iter().enumerate() {
        if !s {
            out.push(Violation::Unreachable(NodeId(i)));
        }
    }
    for p in graph.products() {
        if graph.kind(p.node) != NodeKind::ProductPosition {
            out.push(Violation::ProductNotAtProductNode { sku: p.sku.clone(), node: p.node });
        }
    }
    out
}

/// Relative tolerance used when comparing path costs for ties.
pub fn same_cost(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub cost: f64,
    pub nodes: Vec<NodeId>,
}

#[derive(Clone, Copy)]
struct Label {
    cost: f64,
    hops: u32,
    node: NodeId,
}

impl Label {
    fn better_than(&self, cost: f64, hops: u32) -> bool {
        if same_cost(self.cost, cost) {
            self.hops < hops
        } else {
            self.cost < cost
        }
    }
}

impl PartialEq for Label {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Label {}
impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Label {
    // reversed for a min-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then(other.hops.cmp(&self.hops))
            .then(other.node.cmp(&self.node))
    }
}

/// Costs and hop counts from every node to one target, computed over
/// reversed arcs so that directed weights `w(u -> v)` are honored.
fn costs_to<W>(graph: &StoreGraph, target: NodeId, weight: &W) -> (Vec<f64>, Vec<u32>)
where
    W: Fn(NodeId, NodeId, f64) -> f64,
{
    let n = graph.node_count();
    let mut cost = vec![f64::INFINITY; n];
    let mut hops = vec![u32::MAX; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    cost[target.idx()] = 0.0;
    hops[target.idx()] = 0;
    heap.push(Label { cost: 0.0, hops: 0, node: target });
    while let Some(Label { node, .. }) = heap.pop() {
        if done[node.idx()] {
            continue;
        }
        done[node.idx()] = true;
        let (c, h) = (cost[node.idx()], hops[node.idx()]);
        for &(prev, len) in graph.neighbors(node) {
            if done[prev.idx()] {
                continue;
            }
            let cand = Label { cost: c + weight(prev, node, len), hops: h + 1, node: prev };
            if cand.better_than(cost[prev.idx()], hops[prev.idx()]) {
                cost[prev.idx()] = cand.cost;
                hops[prev.idx()] = cand.hops;
                heap.push(cand);
            }
        }
    }
    (cost, hops)
}

fn next_on_route<W>(graph: &StoreGraph, from: NodeId, cost: &[f64], hops: &[u32], weight: &W) -> Option<NodeId>
where
    W: Fn(NodeId, NodeId, f64) -> f64,
{
    let (c, h) = (cost[from.idx()], hops[from.idx()]);
    if h == 0 || h == u32::MAX {
        return None;
    }
    graph
        .neighbors(from)
        .iter()
        .find(|&&(m, len)| hops[m.idx()] + 1 == h && same_cost(c, weight(from, m, len) + cost[m.idx()]))
        .map(|&(m, _)| m)
}

fn walk<W>(graph: &StoreGraph, from: NodeId, to: NodeId, cost: &[f64], hops: &[u32], weight: &W) -> Vec<NodeId>
where
    W: Fn(NodeId, NodeId, f64) -> f64,
{
    let mut path = vec![from];
    let mut cur = from;
    while cur != to {
        cur = next_on_route(graph, cur, cost, hops, weight).expect("route labels are consistent");
        path.push(cur);
    }
    path
}

fn check_node(graph: &StoreGraph, id: NodeId) -> Result<()> {
    if graph.contains(id) {
        Ok(())
    } else {
        Err(Error::UnknownNode(id))
    }
}

/// Minimal-cost path under `weight(u, v, length)`, the cost of moving from
/// `u` to its neighbor `v`. Weights must be non-negative.
pub fn shortest_path<W>(graph: &StoreGraph, from: NodeId, to: NodeId, weight: W) -> Result<Route>
where
    W: Fn(NodeId, NodeId, f64) -> f64,
{
    check_node(graph, from)?;
    check_node(graph, to)?;
    let (cost, hops) = costs_to(graph, to, &weight);
    if !cost[from.idx()].is_finite() {
        return Err(Error::NoPath { from, to });
    }
    let nodes = walk(graph, from, to, &cost, &hops, &weight);
    // re-sum along the path so the reported cost matches the node sequence
    let total = nodes
        .windows(2)
        .map(|w| weight(w[0], w[1], graph.edge_length(w[0], w[1]).unwrap_or(f64::NAN)))
        .sum();
    Ok(Route { cost: total, nodes })
}

pub fn length_weight(_: NodeId, _: NodeId, length: f64) -> f64 {
    length
}

/// Arc weight for crowdedness routing: the traffic of the node being entered.
pub fn traffic_weight(traffic: &[f64]) -> impl Fn(NodeId, NodeId, f64) -> f64 + '_ {
    move |_, v, _| traffic[v.idx()]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoutingBasis {
    ArcDistance,
    ArcCrowdedness,
}

impl RoutingBasis {
    pub fn label(self) -> &'static str {
        match self {
            RoutingBasis::ArcDistance => "distance",
            RoutingBasis::ArcCrowdedness => "crowdedness",
        }
    }
}

impl fmt::Display for RoutingBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for RoutingBasis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "distance" | "arc_distance" => Ok(RoutingBasis::ArcDistance),
            "crowdedness" | "arc_crowdedness" => Ok(RoutingBasis::ArcCrowdedness),
            other => Err(Error::Config(format!("unknown routing basis '{other}'"))),
        }
    }
}

/// Square matrix of path costs between a chosen list of nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    pub basis: RoutingBasis,
    pub nodes: Vec<NodeId>,
    values: Vec<f64>,
}

impl CostMatrix {
    pub fn from_values(basis: RoutingBasis, nodes: Vec<NodeId>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), nodes.len() * nodes.len());
        Self { basis, nodes, values }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Entry by matrix position.
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.nodes.len() + j]
    }

    pub fn position(&self, node: NodeId) -> Option<usize> {
        self.nodes.iter().position(|&n| n == node)
    }

    /// Entry by node id.
    pub fn get(&self, from: NodeId, to: NodeId) -> Option<f64> {
        Some(self.at(self.position(from)?, self.position(to)?))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

fn matrix_with<W>(graph: &StoreGraph, nodes: &[NodeId], basis: RoutingBasis, weight: W) -> Result<CostMatrix>
where
    W: Fn(NodeId, NodeId, f64) -> f64,
{
    for &n in nodes {
        check_node(graph, n)?;
    }
    let k = nodes.len();
    let mut values = vec![0.0; k * k];
    for (j, &to) in nodes.iter().enumerate() {
        let (cost, _) = costs_to(graph, to, &weight);
        for (i, &from) in nodes.iter().enumerate() {
            let c = cost[from.idx()];
            if !c.is_finite() {
                return Err(Error::NoPath { from, to });
            }
            values[i * k + j] = if i == j { 0.0 } else { c };
        }
    }
    Ok(CostMatrix { basis, nodes: nodes.to_vec(), values })
}

pub fn distance_matrix(graph: &StoreGraph, nodes: &[NodeId]) -> Result<CostMatrix> {
    matrix_with(graph, nodes, RoutingBasis::ArcDistance, length_weight)
}

/// Costs where entering node `v` costs `traffic[v]`; the origin is not charged.
pub fn crowdedness_matrix(graph: &StoreGraph, traffic: &[f64], nodes: &[NodeId]) -> Result<CostMatrix> {
    if traffic.len() != graph.node_count() {
        return Err(Error::Config(format!(
            "traffic profile has {} entries for {} nodes",
            traffic.len(),
            graph.node_count()
        )));
    }
    if let Some(i) = traffic.iter().position(|t| !(*t >= 0.0)) {
        return Err(Error::Config(format!("negative or NaN traffic at node {i}")));
    }
    matrix_with(graph, nodes, RoutingBasis::ArcCrowdedness, traffic_weight(traffic))
}

/// Precomputed all-pairs routing table for one weight function, used by the
/// simulator and policies for O(degree) next-hop queries.
#[derive(Debug, Clone)]
pub struct RouteTable {
    n: usize,
    // row `target` holds costs/hops from every node to `target`
    cost: Vec<f64>,
    hops: Vec<u32>,
    step_weight: Vec<Vec<f64>>,
}

impl RouteTable {
    pub fn build<W>(graph: &StoreGraph, weight: W) -> Self
    where
        W: Fn(NodeId, NodeId, f64) -> f64,
    {
        let n = graph.node_count();
        let mut cost = Vec::with_capacity(n * n);
        let mut hops = Vec::with_capacity(n * n);
        for t in 0..n {
            let (c, h) = costs_to(graph, NodeId(t), &weight);
            cost.extend(c);
            hops.extend(h);
        }
        let step_weight = (0..n)
            .map(|u| graph.neighbors(NodeId(u)).iter().map(|&(v, len)| weight(NodeId(u), v, len)).collect())
            .collect();
        Self { n, cost, hops, step_weight }
    }

    pub fn distances(graph: &StoreGraph) -> Self {
        Self::build(graph, length_weight)
    }

    pub fn crowdedness(graph: &StoreGraph, traffic: &[f64]) -> Self {
        Self::build(graph, traffic_weight(traffic))
    }

    #[inline]
    pub fn cost(&self, from: NodeId, to: NodeId) -> f64 {
        self.cost[to.idx() * self.n + from.idx()]
    }

    #[inline]
    pub fn hops(&self, from: NodeId, to: NodeId) -> u32 {
        self.hops[to.idx() * self.n + from.idx()]
    }

    /// First move of the preferred route, `None` when `from == to` or unreachable.
    pub fn next_hop(&self, graph: &StoreGraph, from: NodeId, to: NodeId) -> Option<NodeId> {
        let row = to.idx() * self.n;
        let (c, h) = (self.cost[row + from.idx()], self.hops[row + from.idx()]);
        if h == 0 || h == u32::MAX {
            return None;
        }
        graph
            .neighbors(from)
            .iter()
            .zip(&self.step_weight[from.idx()])
            .find(|&(&(m, _), &w)| {
                self.hops[row + m.idx()] + 1 == h && same_cost(c, w + self.cost[row + m.idx()])
            })
            .map(|(&(m, _), _)| m)
    }

    pub fn path(&self, graph: &StoreGraph, from: NodeId, to: NodeId) -> Result<Vec<NodeId>> {
        if !self.cost(from, to).is_finite() {
            return Err(Error::NoPath { from, to });
        }
        let mut out = vec![from];
        let mut cur = from;
        while cur != to {
            cur = self.next_hop(graph, cur, to).ok_or(Error::NoPath { from, to })?;
            out.push(cur);
        }
        Ok(out)
    }
}

/// Sorted, de-duplicated copy of a node list.
pub fn node_set(nodes: &[NodeId]) -> Vec<NodeId> {
    nodes.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn node(id: usize, kind: NodeKind) -> StoreNode {
        StoreNode { id: NodeId(id), x: id as f64, y: 0.0, kind }
    }

    fn edge(u: usize, v: usize, length: f64) -> StoreEdge {
        StoreEdge { u: NodeId(u), v: NodeId(v), length }
    }

    fn square() -> StoreGraph {
        // 0-1-2-3-0 cycle, lengths 1,1,1,10
        let nodes = vec![
            node(0, NodeKind::Entrance),
            node(1, NodeKind::ProductPosition),
            node(2, NodeKind::Exit),
            node(3, NodeKind::PrepZone),
        ];
        let edges = vec![edge(0, 1, 1.0), edge(1, 2, 1.0), edge(2, 3, 1.0), edge(3, 0, 10.0)];
        StoreGraph::new(nodes, edges, vec![]).unwrap()
    }

    #[test]
    fn identity_path() {
        let g = square();
        let p = shortest_path(&g, NodeId(2), NodeId(2), length_weight).unwrap();
        assert_eq!(p.cost, 0.0);
        assert_eq!(p.nodes, vec![NodeId(2)]);
    }

    #[test]
    fn opposite_corners_use_unit_edges() {
        let g = square();
        let p = shortest_path(&g, NodeId(0), NodeId(2), length_weight).unwrap();
        assert_eq!(p.cost, 2.0);
        assert_eq!(p.nodes, vec![NodeId(0), NodeId(1), NodeId(2)]);
    }

    #[test]
    fn ties_resolve_to_smallest_sequence() {
        // 0 -> {1,2} -> 3 with equal lengths
        let nodes = vec![
            node(0, NodeKind::Entrance),
            node(1, NodeKind::Intersection),
            node(2, NodeKind::Exit),
            node(3, NodeKind::PrepZone),
        ];
        let edges = vec![edge(0, 2, 1.0), edge(2, 3, 1.0), edge(0, 1, 1.0), edge(1, 3, 1.0)];
        let g = StoreGraph::new(nodes, edges, vec![]).unwrap();
        let p = shortest_path(&g, NodeId(0), NodeId(3), length_weight).unwrap();
        assert_eq!(p.nodes, vec![NodeId(0), NodeId(1), NodeId(3)]);
        let back = shortest_path(&g, NodeId(3), NodeId(0), length_weight).unwrap();
        assert_eq!(back.nodes, vec![NodeId(3), NodeId(1), NodeId(0)]);
    }

    #[test]
    fn disconnected_target_is_no_path() {
        let nodes = vec![node(0, NodeKind::Entrance), node(1, NodeKind::PrepZone), node(2, NodeKind::Exit)];
        let g = StoreGraph::new(nodes, vec![edge(0, 2, 1.0)], vec![]).unwrap();
        let err = shortest_path(&g, NodeId(0), NodeId(1), length_weight).unwrap_err();
        assert!(matches!(err, Error::NoPath { .. }));
        assert!(distance_matrix(&g, &[NodeId(0), NodeId(1)]).is_err());
    }

    #[test]
    fn singleton_matrix_is_zero() {
        let g = square();
        let m = distance_matrix(&g, &[NodeId(1)]).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.at(0, 0), 0.0);
    }

    #[test]
    fn crowdedness_prefers_low_traffic_route() {
        // 0 -> 1 (traffic 5) -> 4 ; 0 -> 2 (1) -> 3 (1) -> 4
        let nodes = vec![
            node(0, NodeKind::Entrance),
            node(1, NodeKind::Intersection),
            node(2, NodeKind::Intersection),
            node(3, NodeKind::Exit),
            node(4, NodeKind::PrepZone),
        ];
        let edges = vec![edge(0, 1, 1.0), edge(1, 4, 1.0), edge(0, 2, 1.0), edge(2, 3, 1.0), edge(3, 4, 1.0)];
        let g = StoreGraph::new(nodes, edges, vec![]).unwrap();
        let traffic = [0.0, 5.0, 1.0, 1.0, 0.0];
        let p = shortest_path(&g, NodeId(0), NodeId(4), traffic_weight(&traffic)).unwrap();
        assert_eq!(p.nodes, vec![NodeId(0), NodeId(2), NodeId(3), NodeId(4)]);
        assert_eq!(p.cost, 2.0);
        let m = crowdedness_matrix(&g, &traffic, &[NodeId(0), NodeId(4)]).unwrap();
        assert_eq!(m.get(NodeId(0), NodeId(4)), Some(2.0));
        // origin excluded, destination included
        assert_eq!(m.get(NodeId(4), NodeId(0)), Some(2.0));
        let d = distance_matrix(&g, &[NodeId(0), NodeId(4)]).unwrap();
        assert_eq!(d.get(NodeId(0), NodeId(4)), Some(2.0));
    }

    #[test]
    fn zero_traffic_gives_zero_costs() {
        let g = square();
        let traffic = [0.0; 4];
        let all: Vec<NodeId> = (0..4).map(NodeId).collect();
        let m = crowdedness_matrix(&g, &traffic, &all).unwrap();
        assert!(m.values().iter().all(|&v| v == 0.0));
        // zero-weight routes still terminate and prefer fewer hops
        let p = shortest_path(&g, NodeId(0), NodeId(2), traffic_weight(&traffic)).unwrap();
        assert_eq!(p.nodes.len(), 3);
    }

    #[test]
    fn validate_reports() {
        assert!(validate(&square()).is_empty());

        let nodes = vec![node(0, NodeKind::Entrance), node(1, NodeKind::Exit)];
        let g = StoreGraph::new(nodes, vec![edge(0, 1, 2.0)], vec![]).unwrap();
        let report = validate(&g);
        assert_eq!(report, vec![Violation::NoPrepZone]);
        assert_eq!(report[0].to_string(), "no prep_zone node");

        let nodes = vec![
            node(0, NodeKind::Entrance),
            node(1, NodeKind::Exit),
            node(2, NodeKind::PrepZone),
            node(3, NodeKind::ProductPosition),
        ];
        let g = StoreGraph::new(nodes, vec![edge(0, 1, 2.0), edge(2, 3, 1.0)], vec![]).unwrap();
        let report = validate(&g);
        assert_eq!(report, vec![Violation::Unreachable(NodeId(2)), Violation::Unreachable(NodeId(3))]);
        assert!(report[0].to_string().contains("node 2"));
    }

    #[test]
    fn validate_flags_bad_lengths_and_loops() {
        let nodes = vec![node(0, NodeKind::Entrance), node(1, NodeKind::Exit), node(2, NodeKind::PrepZone)];
        let g = StoreGraph::new(nodes, vec![edge(0, 1, 0.0), edge(1, 2, 1.0), edge(2, 2, 1.0)], vec![]).unwrap();
        let report = validate(&g);
        assert!(report.iter().any(|v| matches!(v, Violation::NonPositiveLength { .. })));
        assert!(report.contains(&Violation::SelfLoop(NodeId(2))));
    }

    #[test]
    fn non_contiguous_ids_rejected() {
        let nodes = vec![node(0, NodeKind::Entrance), node(2, NodeKind::Exit)];
        assert!(StoreGraph::new(nodes, vec![], vec![]).is_err());
    }

    #[test]
    fn route_table_agrees_with_single_queries() {
        let g = square();
        let table = RouteTable::distances(&g);
        for a in 0..4 {
            for b in 0..4 {
                let p = shortest_path(&g, NodeId(a), NodeId(b), length_weight).unwrap();
                assert_eq!(table.cost(NodeId(a), NodeId(b)), p.cost);
                assert_eq!(table.path(&g, NodeId(a), NodeId(b)).unwrap(), p.nodes);
            }
        }
    }

    #[test]
    fn layout_round_trip_and_load_rejects_invalid() {
        let dir = tempfile::tempdir().unwrap();
        let g = square();
        let path = dir.path().join("layout.json");
        g.save(&path).unwrap();
        let back = StoreGraph::load(&path).unwrap();
        assert_eq!(back.to_layout(), g.to_layout());

        let bad = LayoutFile {
            nodes: vec![node(0, NodeKind::Entrance), node(1, NodeKind::Exit)],
            edges: vec![edge(0, 1, 1.0)],
            products: vec![],
        };
        let bad_path = dir.path().join("bad.json");
        fs::write(&bad_path, serde_json::to_string(&bad).unwrap()).unwrap();
        let err = StoreGraph::load(&bad_path).unwrap_err();
        assert!(err.to_string().contains("no prep_zone node"));
    }
}
