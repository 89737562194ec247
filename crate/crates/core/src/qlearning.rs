//! Tabular Q-learning over (current node, target node) states.
//!
//! Unvisited states get optimistic values drawn uniformly from the table's
//! init range. The draw is a pure function of the table seed and the state,
//! so looking a state up never depends on visit order and a read-only table
//! answers the same way as a mutable one.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Env, RewardWeights, StepOutcome};
use crate::error::{Error, Result};
use crate::graph::{NodeId, RoutingBasis, StoreGraph};
use crate::rng::{episode_seed, substream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QState {
    pub current: NodeId,
    /// Next picking location, or the prep zone once all items are picked.
    pub target: NodeId,
}

impl QState {
    pub fn new(current: NodeId, target: NodeId) -> Self {
        Self { current, target }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    basis: RoutingBasis,
    init_range: (f64, f64),
    init_seed: u64,
    /// Action values per state, sorted by action id.
    entries: HashMap<QState, Vec<(NodeId, f64)>>,
}

pub const CSV_HEADER: &str = "current,target,action,value";

#[derive(Debug, Serialize, Deserialize)]
struct TableMeta {
    basis: RoutingBasis,
    init_low: f64,
    init_high: f64,
    init_seed: u64,
}

/// `qtable_distance.csv` -> `qtable_distance.meta.json`
fn meta_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

/// File name of the table trained under `basis`.
pub fn table_file_name(basis: RoutingBasis) -> String {
    format!("qtable_{}.csv", basis.label())
}

impl QTable {
    pub fn new(basis: RoutingBasis, init_range: (f64, f64), init_seed: u64) -> Self {
        Self { basis, init_range, init_seed, entries: HashMap::new() }
    }

    /// Optimistic range `[0, 2 * pick reward]`.
    pub fn optimistic(basis: RoutingBasis, weights: &RewardWeights, init_seed: u64) -> Self {
        Self::new(basis, (0.0, 2.0 * weights.pick), init_seed)
    }

    pub fn basis(&self) -> RoutingBasis {
        self.basis
    }

    pub fn init_range(&self) -> (f64, f64) {
        self.init_range
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn states(&self) -> impl Iterator<Item = &QState> {
        self.entries.keys()
    }

    pub fn contains(&self, state: &QState) -> bool {
        self.entries.contains_key(state)
    }

    /// Stored value, if the state has been visited.
    pub fn get(&self, state: &QState, action: NodeId) -> Option<f64> {
        let row = self.entries.get(state)?;
        row.binary_search_by_key(&action, |&(a, _)| a).ok().map(|i| row[i].1)
    }

    fn init_row(&self, state: &QState, actions: &[NodeId]) -> Vec<(NodeId, f64)> {
        let key = episode_seed(self.init_seed ^ (state.current.0 as u64).rotate_left(32), state.target.0 as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        rng.set_stream(Stream::TableInit as u64);
        let (lo, hi) = self.init_range;
        let mut sorted = actions.to_vec();
        sorted.sort();
        sorted.dedup();
        sorted
            .into_iter()
            .map(|a| (a, if hi > lo { rng.random_range(lo..hi) } else { lo }))
            .collect()
    }

    /// Values of `actions` at `state`, falling back to the optimistic init.
    pub fn values(&self, state: &QState, actions: &[NodeId]) -> Vec<(NodeId, f64)> {
        match self.entries.get(state) {
            Some(row) => actions
                .iter()
                .map(|&a| {
                    let v = row
                        .binary_search_by_key(&a, |&(x, _)| x)
                        .map(|i| row[i].1)
                        .unwrap_or_else(|_| self.init_row(state, &[a])[0].1);
                    (a, v)
                })
                .collect(),
            None => {
                let row = self.init_row(state, actions);
                actions.iter().map(|a| *row.iter().find(|(x, _)| x == a).unwrap()).collect()
            }
        }
    }

    fn row_mut(&mut self, state: QState, actions: &[NodeId]) -> &mut Vec<(NodeId, f64)> {
        if !self.entries.contains_key(&state) {
            let row = self.init_row(&state, actions);
            self.entries.insert(state, row);
        }
        self.entries.get_mut(&state).unwrap()
    }

    pub fn max_value(&self, state: &QState, actions: &[NodeId]) -> f64 {
        self.values(state, actions).into_iter().map(|(_, v)| v).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Sets a value directly, creating the state row over `actions` if needed.
    pub fn set(&mut self, state: QState, actions: &[NodeId], action: NodeId, value: f64) -> Result<()> {
        let row = self.row_mut(state, actions);
        match row.binary_search_by_key(&action, |&(a, _)| a) {
            Ok(i) => {
                row[i].1 = value;
                Ok(())
            }
            Err(_) => Err(Error::IllegalAction { at: state.current, action }),
        }
    }

    /// Writes the CSV and, next to it, a small JSON file with the basis and
    /// init parameters so a reloaded table answers unvisited states the same.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv())?;
        let meta = TableMeta { basis: self.basis, init_low: self.init_range.0, init_high: self.init_range.1, init_seed: self.init_seed };
        fs::write(meta_path(path), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut keys: Vec<&QState> = self.entries.keys().collect();
        keys.sort();
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for s in keys {
            for (a, v) in &self.entries[s] {
                out.push_str(&format!("{},{},{},{:.16e}\n", s.current, s.target, a, v));
            }
        }
        out
    }

    /// Reads a table written by [`QTable::save`]. The basis is not stored in
    /// the file and must be supplied by the caller.
    /// Without the side file, unvisited states read as 0.
    pub fn load(path: impl AsRef<Path>, basis: RoutingBasis) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let mut table =
            Self::from_csv(&text, basis).map_err(|(line, msg)| Error::Parse { path: path.to_path_buf(), line, msg })?;
        let meta_file = meta_path(path);
        if meta_file.exists() {
            let meta: TableMeta = serde_json::from_str(&fs::read_to_string(&meta_file)?)?;
            if meta.basis != basis {
                return Err(Error::Config(format!(
                    "{} holds a table trained for basis {}, not {}",
                    path.display(),
                    meta.basis.label(),
                    basis.label()
                )));
            }
            table.init_range = (meta.init_low, meta.init_high);
            table.init_seed = meta.init_seed;
        }
        Ok(table)
    }

    fn from_csv(text: &str, basis: RoutingBasis) -> std::result::Result<Self, (usize, String)> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == CSV_HEADER => {}
            _ => return Err((1, format!("expected header '{CSV_HEADER}'"))),
        }
        let mut table = Self::new(basis, (0.0, 0.0), 0);
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err((lineno, format!("expected 4 fields, got {}", fields.len())));
            }
            let node = |s: &str| s.trim().parse::<usize>().map(NodeId).map_err(|e| (lineno, e.to_string()));
            let state = QState::new(node(fields[0])?, node(fields[1])?);
            let action = node(fields[2])?;
            let value: f64 = fields[3].trim().parse().map_err(|e: std::num::ParseFloatError| (lineno, e.to_string()))?;
            if !value.is_finite() {
                return Err((lineno, "non-finite value".into()));
            }
            let row = table.entries.entry(state).or_default();
            match row.binary_search_by_key(&action, |&(a, _)| a) {
                Ok(_) => return Err((lineno, format!("duplicate entry for state {state:?} action {action}"))),
                Err(pos) => row.insert(pos, (action, value)),
            }
        }
        Ok(table)
    }

    /// Checks that every stored action is adjacent to its state's node.
    pub fn check_against(&self, graph: &StoreGraph) -> Result<()> {
        for (s, row) in &self.entries {
            if !graph.contains(s.current) || !graph.contains(s.target) {
                return Err(Error::UnknownNode(if graph.contains(s.current) { s.target } else { s.current }));
            }
            for &(a, _) in row {
                if !graph.is_adjacent(s.current, a) {
                    return Err(Error::IllegalAction { at: s.current, action: a });
                }
            }
        }
        Ok(())
    }
}

/// ε-greedy choice over `legal`; greedy ties go to the smallest node id.
pub fn select_action<R: Rng + ?Sized>(
    table: &QTable,
    state: &QState,
    legal: &[NodeId],
    epsilon: f64,
    rng: &mut R,
) -> Result<NodeId> {
    if legal.is_empty() {
        return Err(Error::Contract(format!("no legal action at node {}", state.current)));
    }
    if legal.len() == 1 {
        return Ok(legal[0]);
    }
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        return Ok(legal[rng.random_range(0..legal.len())]);
    }
    Ok(greedy(table, state, legal))
}

pub fn greedy(table: &QTable, state: &QState, legal: &[NodeId]) -> NodeId {
    let mut best: Option<(NodeId, f64)> = None;
    for (a, v) in table.values(state, legal) {
        best = match best {
            Some((ba, bv)) if bv > v || (bv == v && ba < a) => Some((ba, bv)),
            _ => Some((a, v)),
        };
    }
    best.expect("non-empty").0
}

/// One temporal-difference update; `next` is `None` for terminal transitions.
/// Returns the absolute change of the updated entry.
#[allow(clippy::too_many_arguments)]
pub fn update(
    table: &mut QTable,
    state: QState,
    legal: &[NodeId],
    action: NodeId,
    reward: f64,
    next: Option<(QState, &[NodeId])>,
    alpha: f64,
    gamma: f64,
) -> Result<f64> {
    let future = match next {
        Some((s, acts)) if !acts.is_empty() => gamma * table.max_value(&s, acts),
        _ => 0.0,
    };
    let row = table.row_mut(state, legal);
    let i = row
        .binary_search_by_key(&action, |&(a, _)| a)
        .map_err(|_| Error::IllegalAction { at: state.current, action })?;
    let old = row[i].1;
    let new = old + alpha * (reward + future - old);
    row[i].1 = new;
    Ok((new - old).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub episodes: usize,
    /// Training stops once an episode's largest |ΔQ| falls below this.
    pub convergence_threshold: f64,
    /// Exploration kept when the table is used; defaults to `epsilon`.
    pub eval_epsilon: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { alpha: 0.97, gamma: 0.9, epsilon: 0.01, episodes: 1000, convergence_threshold: 1e-3, eval_epsilon: None }
    }
}

impl TrainConfig {
    pub fn eval_epsilon(&self) -> f64 {
        self.eval_epsilon.unwrap_or(self.epsilon)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha {} outside (0, 1]", self.alpha)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma {} outside [0, 1)", self.gamma)));
        }
        let eps_ok = |e: f64| (0.0..=1.0).contains(&e);
        if !eps_ok(self.epsilon) || !eps_ok(self.eval_epsilon()) {
            return Err(Error::Config("epsilon outside [0, 1]".into()));
        }
        if !(self.convergence_threshold >= 0.0) {
            return Err(Error::Config("convergence threshold must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub table: QTable,
    /// Cumulative reward of every episode run.
    pub rewards: Vec<f64>,
    pub converged: bool,
}

fn legal_actions(graph: &StoreGraph, node: NodeId) -> Vec<NodeId> {
    graph.neighbors(node).iter().map(|&(n, _)| n).collect()
}

/// Trains a fresh optimistic table on `env`. The sequencer installed in the
/// environment fixes the routing basis the table is tagged with.
pub fn train(env: &mut Env, basis: RoutingBasis, config: &TrainConfig, seed: u64) -> Result<TrainResult> {
    let table = QTable::optimistic(basis, &env.config().reward_weights, seed);
    train_from(env, table, config, seed)
}

/// A value estimates the return until the current target is reached, so a
/// pick ends the bootstrap. Returning to the prep zone continues into the
/// next order's first decision.
fn bootstrap_state(env: &mut Env, out: &StepOutcome) -> Result<Option<QState>> {
    if out.done {
        return Ok(None);
    }
    if out.action != out.target {
        return Ok(Some(QState::new(out.action, out.target)));
    }
    if out.target != env.store().prep {
        return Ok(None);
    }
    Ok(env.observe()?.map(|o| QState::new(o.picker, o.target)))
}

pub fn train_from(env: &mut Env, mut table: QTable, config: &TrainConfig, seed: u64) -> Result<TrainResult> {
    config.validate()?;
    let mut explore = substream(seed, Stream::Exploration);
    let mut rewards = Vec::with_capacity(config.episodes);
    let mut converged = false;
    for ep in 0..config.episodes {
        env.reset(episode_seed(seed, ep as u64));
        let mut max_delta: f64 = 0.0;
        let mut updates = 0usize;
        while let Some(obs) = env.observe()? {
            let state = QState::new(obs.picker, obs.target);
            let legal: Vec<NodeId> = obs.neighbors.iter().map(|&(n, _)| n).collect();
            let action = select_action(&table, &state, &legal, config.epsilon, &mut explore)?;
            let out = env.step(action)?;
            let next = bootstrap_state(env, &out)?;
            let next_legal = legal_actions(env.graph(), out.action);
            let d = update(
                &mut table,
                state,
                &legal,
                action,
                out.reward,
                next.map(|s| (s, next_legal.as_slice())),
                config.alpha,
                config.gamma,
            )?;
            max_delta = max_delta.max(d);
            updates += 1;
        }
        rewards.push(env.totals().reward);
        if updates > 0 && max_delta < config.convergence_threshold {
            converged = true;
            break;
        }
    }
    Ok(TrainResult { table, rewards, converged })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyPath {
    /// Nodes moved to, excluding the start.
    pub moves: Vec<NodeId>,
    /// The step cap was hit before reaching the target.
    pub truncated: bool,
}

/// Follows the table from `from` until `target` or `step_cap` moves.
pub fn greedy_path<R: Rng + ?Sized>(
    table: &QTable,
    graph: &StoreGraph,
    from: NodeId,
    target: NodeId,
    epsilon: f64,
    rng: &mut R,
    step_cap: usize,
) -> Result<GreedyPath> {
    if step_cap == 0 {
        return Err(Error::Contract("step cap must be positive".into()));
    }
    for n in [from, target] {
        if !graph.contains(n) {
            return Err(Error::UnknownNode(n));
        }
    }
    let mut moves = Vec::new();
    let mut at = from;
    while at != target {
        if moves.len() == step_cap {
            return Ok(GreedyPath { moves, truncated: true });
        }
        let legal = legal_actions(graph, at);
        at = select_action(table, &QState::new(at, target), &legal, epsilon, rng)?;
        moves.push(at);
    }
    Ok(GreedyPath { moves, truncated: false })
}
