//! Step policies: learned table (QL), shortest path (SP), myopic (MP) and
//! crowded-nodes shortest path (CN).

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Env, EnvConfig, Observation, Store};
use crate::error::{Error, Result};
use crate::graph::{same_cost, NodeId, RouteTable, StoreGraph};
use crate::qlearning::{select_action, QState, QTable};
use crate::rng::episode_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Ql,
    Sp,
    Mp,
    Cn,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [PolicyKind::Ql, PolicyKind::Sp, PolicyKind::Mp, PolicyKind::Cn];

    pub fn label(self) -> &'static str {
        match self {
            PolicyKind::Ql => "ql",
            PolicyKind::Sp => "sp",
            PolicyKind::Mp => "mp",
            PolicyKind::Cn => "cn",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ql" => Ok(PolicyKind::Ql),
            "sp" => Ok(PolicyKind::Sp),
            "mp" => Ok(PolicyKind::Mp),
            "cn" => Ok(PolicyKind::Cn),
            _ => Err(Error::Config(format!("unknown policy '{s}' (expected ql, sp, mp or cn)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Policy {
    Ql { table: Arc<QTable>, epsilon: f64 },
    Sp { routes: Arc<RouteTable> },
    /// Needs distance routes to tell which neighbors get closer.
    Mp { routes: Arc<RouteTable> },
    /// Routes weighted by the average customer count of the node entered.
    Cn { routes: Arc<RouteTable> },
}

impl Policy {
    pub fn shortest_path(store: &Store) -> Self {
        Policy::Sp { routes: Arc::new(store.routes.clone()) }
    }

    pub fn myopic(store: &Store) -> Self {
        Policy::Mp { routes: Arc::new(store.routes.clone()) }
    }

    pub fn crowded_nodes(graph: &StoreGraph, traffic: &[f64]) -> Result<Self> {
        if traffic.len() != graph.node_count() {
            return Err(Error::Config(format!(
                "traffic profile has {} entries for {} nodes",
                traffic.len(),
                graph.node_count()
            )));
        }
        if traffic.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::Config("traffic must be finite and non-negative".into()));
        }
        Ok(Policy::Cn { routes: Arc::new(RouteTable::crowdedness(graph, traffic)) })
    }

    pub fn learned(table: Arc<QTable>, epsilon: f64) -> Self {
        Policy::Ql { table, epsilon }
    }

    pub fn kind(&self) -> PolicyKind {
        match self {
            Policy::Ql { .. } => PolicyKind::Ql,
            Policy::Sp { .. } => PolicyKind::Sp,
            Policy::Mp { .. } => PolicyKind::Mp,
            Policy::Cn { .. } => PolicyKind::Cn,
        }
    }

    pub fn next_action<R: Rng + ?Sized>(&self, obs: &Observation, graph: &StoreGraph, rng: &mut R) -> Result<NodeId> {
        if obs.neighbors.is_empty() {
            return Err(Error::Contract(format!("node {} has no neighbors", obs.picker)));
        }
        let no_path = || Error::NoPath { from: obs.picker, to: obs.target };
        match self {
            Policy::Sp { routes } | Policy::Cn { routes } => routes.next_hop(graph, obs.picker, obs.target).ok_or_else(no_path),
            Policy::Mp { routes } => {
                let here = routes.cost(obs.picker, obs.target);
                if !here.is_finite() {
                    return Err(no_path());
                }
                let mut best: Option<(u32, f64, NodeId)> = None;
                for &(n, count) in &obs.neighbors {
                    let d = routes.cost(n, obs.target);
                    if !(d < here) || same_cost(d, here) {
                        continue;
                    }
                    let key = (count, d, n);
                    best = match best {
                        Some(b) if (b.0, b.1, b.2) <= (key.0, key.1, key.2) => Some(b),
                        _ => Some(key),
                    };
                }
                best.map(|b| b.2).ok_or_else(no_path)
            }
            Policy::Ql { table, epsilon } => {
                let legal: Vec<NodeId> = obs.neighbors.iter().map(|&(n, _)| n).collect();
                select_action(table, &QState::new(obs.picker, obs.target), &legal, *epsilon, rng)
            }
        }
    }
}

/// Seconds between occupancy samples during calibration.
pub const CALIBRATION_INTERVAL: f64 = 10.0;
pub const CALIBRATION_EPISODES: usize = 50;

/// Average number of customers on each node over customer-only runs.
pub fn calibrate_traffic(store: &Arc<Store>, config: &EnvConfig, episodes: usize, seed: u64) -> Result<Vec<f64>> {
    if episodes == 0 {
        return Err(Error::Config("calibration needs at least one episode".into()));
    }
    let idle: Arc<dyn crate::env::Sequencer> = Arc::new(|p: &[NodeId]| Ok(p.to_vec()));
    let mut env = Env::new(Arc::clone(store), config.clone(), idle)?;
    let mut sums = vec![0.0; store.graph.node_count()];
    let mut samples = 0usize;
    for ep in 0..episodes {
        let (s, k) = env.customer_occupancy_profile(episode_seed(seed, ep as u64), CALIBRATION_INTERVAL);
        for (a, b) in sums.iter_mut().zip(s) {
            *a += b;
        }
        samples += k;
    }
    let denom = samples.max(1) as f64;
    Ok(sums.into_iter().map(|s| s / denom).collect())
}
