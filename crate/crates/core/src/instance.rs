//! Synthetic benchmark: rectangular-aisle layouts in four sizes, customer
//! concentration profiles and shopping-list sampling.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::graph::{NodeId, NodeKind, Product, RouteTable, StoreEdge, StoreGraph, StoreNode};
use crate::rng::{substream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutSize {
    Tiny,
    Small,
    Medium,
    Large,
}

impl LayoutSize {
    pub const ALL: [LayoutSize; 4] = [LayoutSize::Tiny, LayoutSize::Small, LayoutSize::Medium, LayoutSize::Large];

    /// (aisles, blocks per aisle)
    pub fn grid(self) -> (usize, usize) {
        match self {
            LayoutSize::Tiny => (3, 2),
            LayoutSize::Small => (4, 3),
            LayoutSize::Medium => (6, 4),
            LayoutSize::Large => (8, 6),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            LayoutSize::Tiny => "tiny",
            LayoutSize::Small => "small",
            LayoutSize::Medium => "medium",
            LayoutSize::Large => "large",
        }
    }
}

impl fmt::Display for LayoutSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for LayoutSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LayoutSize::ALL
            .into_iter()
            .find(|l| l.label() == s)
            .ok_or_else(|| Error::Config(format!("unknown layout size '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutSpec {
    pub size: LayoutSize,
    /// Vertical aisles, left to right.
    pub aisles: usize,
    /// Aisle segments between cross-aisles in each vertical aisle.
    pub blocks: usize,
    /// Product nodes inside each aisle segment.
    pub products_per_aisle: usize,
    /// Meters between neighboring vertical aisles.
    pub aisle_spacing: f64,
    /// Meters between neighboring cross-aisles.
    pub block_length: f64,
}

impl LayoutSpec {
    pub fn new(size: LayoutSize) -> Self {
        let (aisles, blocks) = size.grid();
        Self { size, aisles, blocks, products_per_aisle: 2, aisle_spacing: 4.0, block_length: 9.0 }
    }
}

/// Node ids: entrance 0, intersections row by row from the front, product
/// positions aisle by aisle, exits, and the prep zone last.
pub fn generate_layout(spec: &LayoutSpec, seed: u64) -> Result<StoreGraph> {
    if spec.aisles < 2 || spec.blocks < 1 || spec.products_per_aisle < 1 {
        return Err(Error::Config(format!(
            "degenerate layout: {} aisles, {} blocks, {} products per aisle",
            spec.aisles, spec.blocks, spec.products_per_aisle
        )));
    }
    if !(spec.aisle_spacing > 0.0 && spec.block_length > 0.0) {
        return Err(Error::Config("layout spacings must be positive".into()));
    }
    let mut rng = substream(seed, Stream::Layout);
    let (cols, rows) = (spec.aisles, spec.blocks + 1);
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let push = |nodes: &mut Vec<StoreNode>, x: f64, y: f64, kind: NodeKind| {
        let id = NodeId(nodes.len());
        nodes.push(StoreNode { id, x, y, kind });
        id
    };
    let door = 3.0;
    let entrance = push(&mut nodes, 0.0, -door, NodeKind::Entrance);
    let mut cross = vec![vec![NodeId(0); cols]; rows];
    for (r, row) in cross.iter_mut().enumerate() {
        for (c, slot) in row.iter_mut().enumerate() {
            *slot = push(&mut nodes, c as f64 * spec.aisle_spacing, r as f64 * spec.block_length, NodeKind::Intersection);
        }
    }
    for row in &cross {
        for c in 1..cols {
            edges.push(StoreEdge { u: row[c - 1], v: row[c], length: spec.aisle_spacing });
        }
    }
    let mut products = Vec::new();
    let k = spec.products_per_aisle;
    for c in 0..cols {
        for b in 0..spec.blocks {
            // product spots are jittered along the segment; the segment keeps
            // its total length
            let mut cuts: Vec<f64> = (1..=k)
                .map(|i| {
                    let base = i as f64 / (k + 1) as f64;
                    let jitter = rng.random_range(-0.1..0.1) / (k + 1) as f64;
                    ((base + jitter) * spec.block_length * 4.0).round() / 4.0
                })
                .collect();
            cuts.sort_by(f64::total_cmp);
            let mut prev = cross[b][c];
            let mut prev_y = 0.0;
            for &y in &cuts {
                let id = push(&mut nodes, c as f64 * spec.aisle_spacing, b as f64 * spec.block_length + y, NodeKind::ProductPosition);
                edges.push(StoreEdge { u: prev, v: id, length: y - prev_y });
                products.push(Product { sku: format!("P{}", id.0), node: id });
                prev = id;
                prev_y = y;
            }
            edges.push(StoreEdge { u: prev, v: cross[b + 1][c], length: spec.block_length - prev_y });
        }
    }
    edges.push(StoreEdge { u: entrance, v: cross[0][0], length: door });
    // checkouts along the front
    let mut exit_cols = vec![cols / 2, cols - 1];
    exit_cols.dedup();
    for c in exit_cols {
        let id = push(&mut nodes, c as f64 * spec.aisle_spacing, -door, NodeKind::Exit);
        edges.push(StoreEdge { u: cross[0][c], v: id, length: door });
    }
    let prep = push(
        &mut nodes,
        (cols - 1) as f64 * spec.aisle_spacing,
        spec.blocks as f64 * spec.block_length + door,
        NodeKind::PrepZone,
    );
    edges.push(StoreEdge { u: cross[rows - 1][cols - 1], v: prep, length: door });
    StoreGraph::new(nodes, edges, products)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Concentration {
    Entrance,
    Middle,
    Back,
    Uniform,
}

impl Concentration {
    pub const PROFILED: [Concentration; 3] = [Concentration::Entrance, Concentration::Middle, Concentration::Back];

    pub fn label(self) -> &'static str {
        match self {
            Concentration::Entrance => "entrance",
            Concentration::Middle => "middle",
            Concentration::Back => "back",
            Concentration::Uniform => "uniform",
        }
    }
}

impl fmt::Display for Concentration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Concentration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "entrance" | "near" => Ok(Concentration::Entrance),
            "middle" => Ok(Concentration::Middle),
            "back" | "far" => Ok(Concentration::Back),
            "uniform" => Ok(Concentration::Uniform),
            _ => Err(Error::Config(format!("unknown concentration '{s}'"))),
        }
    }
}

/// Sampling weights over product nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationProfile {
    pub mode: Concentration,
    pub nodes: Vec<NodeId>,
    pub weights: Vec<f64>,
}

pub const DECAY_PER_HOP: f64 = 0.5;

impl ConcentrationProfile {
    /// Weight of a product decays by [`DECAY_PER_HOP`] per intersection
    /// between it and the anchor region. A product's level is the number of
    /// intersections on its shortest route from the entrance; the entrance
    /// anchor is the lowest level, the back anchor the highest and the
    /// middle anchor halfway between.
    pub fn new(graph: &StoreGraph, routes: &RouteTable, mode: Concentration) -> Self {
        let nodes = graph.product_nodes();
        if nodes.is_empty() {
            return Self { mode, nodes, weights: Vec::new() };
        }
        let levels: Vec<i64> = nodes
            .iter()
            .map(|&p| {
                routes
                    .path(graph, graph.entrance(), p)
                    .map(|path| path.iter().filter(|&&n| graph.kind(n) == NodeKind::Intersection).count() as i64)
                    .unwrap_or(0)
            })
            .collect();
        let lo = *levels.iter().min().unwrap();
        let hi = *levels.iter().max().unwrap();
        let anchor = match mode {
            Concentration::Entrance => Some(lo),
            Concentration::Back => Some(hi),
            Concentration::Middle => Some((lo + hi + 1) / 2),
            Concentration::Uniform => None,
        };
        let raw: Vec<f64> = levels
            .iter()
            .map(|&l| match anchor {
                Some(a) => DECAY_PER_HOP.powi((l - a).abs() as i32),
                None => 1.0,
            })
            .collect();
        let total: f64 = raw.iter().sum();
        let weights = raw.iter().map(|w| w / total).collect();
        Self { mode, nodes, weights }
    }

    pub fn uniform(graph: &StoreGraph) -> Self {
        let nodes = graph.product_nodes();
        let w = 1.0 / nodes.len().max(1) as f64;
        Self { mode: Concentration::Uniform, weights: vec![w; nodes.len()], nodes }
    }
}

/// Distinct products drawn by profile weight, between 1 and `max_len` of
/// them (uniform length), in random visiting order.
pub fn sample_shopping_list<R: Rng + ?Sized>(profile: &ConcentrationProfile, max_len: usize, rng: &mut R) -> Vec<NodeId> {
    let n = profile.nodes.len();
    if n == 0 {
        return Vec::new();
    }
    let len = rng.random_range(1..=max_len.max(1)).min(n);
    let mut weights = profile.weights.clone();
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let total: f64 = weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = weights.iter().rposition(|&w| w > 0.0).unwrap();
        for (i, &w) in weights.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            if u < w {
                pick = i;
                break;
            }
            u -= w;
        }
        out.push(profile.nodes[pick]);
        weights[pick] = 0.0;
    }
    out.shuffle(rng);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceConfig {
    pub name: String,
    pub layout: LayoutSpec,
    pub env: EnvConfig,
}

impl InstanceConfig {
    pub fn synthetic(size: LayoutSize, concentration: Concentration) -> Self {
        Self {
            name: format!("{size}-{concentration}"),
            layout: LayoutSpec::new(size),
            env: EnvConfig { concentration, ..EnvConfig::default() },
        }
    }

    pub fn graph(&self, seed: u64) -> Result<StoreGraph> {
        generate_layout(&self.layout, seed)
    }
}

/// The 4 layouts x 3 concentrations benchmark with the default parameters.
pub fn build_benchmark() -> Vec<InstanceConfig> {
    LayoutSize::ALL
        .into_iter()
        .flat_map(|s| Concentration::PROFILED.into_iter().map(move |c| InstanceConfig::synthetic(s, c)))
        .collect()
}
