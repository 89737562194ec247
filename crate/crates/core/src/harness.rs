//! Training grids, convergence statistics, policy evaluation and CSV output.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{Env, EnvConfig, Sequencer, Store};
use crate::error::{Error, Result};
use crate::graph::{RoutingBasis, StoreGraph};
use crate::policy::{calibrate_traffic, Policy, PolicyKind};
use crate::qlearning::{train, QTable, TrainConfig};
use crate::rng::{episode_seed, substream, Stream};
use crate::srp::SrpSequencer;

pub const METRICS_HEADER: &str = "policy,basis,episode,reward,orders,products,encounters,steps";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub policy: PolicyKind,
    pub basis: RoutingBasis,
    pub episode: usize,
    pub reward: f64,
    pub orders: u64,
    pub products: u64,
    /// Customers met on the picker's node plus those seen on adjacent nodes.
    pub encounters: u64,
    pub steps: u64,
}

impl EpisodeMetrics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.policy,
            self.basis.label(),
            self.episode,
            self.reward,
            self.orders,
            self.products,
            self.encounters,
            self.steps
        )
    }
}

pub fn write_metrics_csv(rows: &[EpisodeMetrics], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Population standard deviation over |mean| of the last `window` entries.
pub fn convergence_cv(series: &[f64], window: usize) -> Result<f64> {
    if window == 0 || series.len() < window {
        return Err(Error::SeriesTooShort { len: series.len(), window });
    }
    let tail = &series[series.len() - window..];
    let mean = tail.iter().sum::<f64>() / window as f64;
    let var = tail.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / window as f64;
    if var == 0.0 {
        return Ok(0.0);
    }
    Ok(var.sqrt() / mean.abs())
}

/// Mean of the first and last tenth of a series.
pub fn decile_means(series: &[f64]) -> Option<(f64, f64)> {
    let k = series.len() / 10;
    if k == 0 {
        return None;
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    Some((mean(&series[..k]), mean(&series[series.len() - k..])))
}

/// Lower end of the two-sided `confidence` percentile bootstrap interval
/// for the mean of `samples`.
pub fn bootstrap_mean_lower(samples: &[f64], resamples: usize, confidence: f64, seed: u64) -> Option<f64> {
    if samples.is_empty() || resamples == 0 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = samples.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| samples[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let idx = (((1.0 - confidence) / 2.0) * resamples as f64).floor() as usize;
    Some(means[idx.min(resamples - 1)])
}

/// Everything needed to run episodes on one instance.
#[derive(Clone)]
pub struct Scenario {
    pub name: String,
    pub store: Arc<Store>,
    pub config: EnvConfig,
    /// Average customers per node, from customer-only runs.
    pub traffic: Vec<f64>,
}

impl Scenario {
    pub fn new(name: impl Into<String>, graph: StoreGraph, config: EnvConfig, calibration_episodes: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let store = Store::new(graph, config.concentration)?;
        let traffic = calibrate_traffic(&store, &config, calibration_episodes, seed)?;
        Ok(Self { name: name.into(), store, config, traffic })
    }

    pub fn with_traffic(name: impl Into<String>, graph: StoreGraph, config: EnvConfig, traffic: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let store = Store::new(graph, config.concentration)?;
        if traffic.len() != store.graph.node_count() {
            return Err(Error::Config("traffic profile does not match the layout".into()));
        }
        Ok(Self { name: name.into(), store, config, traffic })
    }

    pub fn sequencer(&self, basis: RoutingBasis) -> Result<Arc<dyn Sequencer>> {
        let traffic = (basis == RoutingBasis::ArcCrowdedness).then_some(self.traffic.as_slice());
        Ok(Arc::new(SrpSequencer::new(&self.store.graph, basis, traffic)?))
    }

    pub fn env(&self, basis: RoutingBasis) -> Result<Env> {
        Env::new(Arc::clone(&self.store), self.config.clone(), self.sequencer(basis)?)
    }

    pub fn policy(&self, kind: PolicyKind, table: Option<&Arc<QTable>>, eval_epsilon: f64) -> Result<Policy> {
        match kind {
            PolicyKind::Sp => Ok(Policy::shortest_path(&self.store)),
            PolicyKind::Mp => Ok(Policy::myopic(&self.store)),
            PolicyKind::Cn => Policy::crowded_nodes(&self.store.graph, &self.traffic),
            PolicyKind::Ql => {
                let table = table.ok_or_else(|| Error::Config("QL needs a trained table".into()))?;
                table.check_against(&self.store.graph)?;
                Ok(Policy::learned(Arc::clone(table), eval_epsilon))
            }
        }
    }
}

/// Runs one full episode of `policy`; the policy's randomness comes from
/// the episode's exploration substream.
pub fn run_episode(env: &mut Env, policy: &Policy, seed: u64) -> Result<()> {
    env.reset(seed);
    let mut rng = substream(seed, Stream::Exploration);
    while let Some(obs) = env.observe()? {
        let action = policy.next_action(&obs, &env.store().graph, &mut rng)?;
        env.step(action)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub alphas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub episodes: usize,
    /// Episodes between reward snapshots.
    pub snapshot_interval: usize,
    /// Episodes at the end of a run averaged to score it.
    pub score_window: usize,
}

impl GridSpec {
    pub fn table2(episodes: usize) -> Self {
        Self {
            alphas: vec![0.95, 0.97, 0.99],
            gammas: vec![0.5, 0.7, 0.9],
            epsilons: vec![0.01],
            episodes,
            snapshot_interval: 1000,
            score_window: 50,
        }
    }

    pub fn single(config: &TrainConfig) -> Self {
        Self {
            alphas: vec![config.alpha],
            gammas: vec![config.gamma],
            epsilons: vec![config.epsilon],
            episodes: config.episodes,
            snapshot_interval: config.episodes.max(1),
            score_window: 50,
        }
    }

    pub fn configs(&self) -> Vec<TrainConfig> {
        let mut out = Vec::new();
        for &alpha in &self.alphas {
            for &gamma in &self.gammas {
                for &epsilon in &self.epsilons {
                    out.push(TrainConfig { alpha, gamma, epsilon, episodes: self.episodes, ..TrainConfig::default() });
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() || self.gammas.is_empty() || self.epsilons.is_empty() {
            return Err(Error::Config("grid parameter sets must be non-empty".into()));
        }
        if self.snapshot_interval == 0 {
            return Err(Error::Config("snapshot interval must be positive".into()));
        }
        for c in self.configs() {
            c.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GridRun {
    pub instance: String,
    pub config: TrainConfig,
    pub rewards: Vec<f64>,
    /// (episodes completed, mean reward of the block ending there).
    pub snapshots: Vec<(usize, f64)>,
    pub min: f64,
    pub avg: f64,
    pub max: f64,
    /// Mean reward over the final score window.
    pub score: f64,
    pub cv: Option<f64>,
    pub table: QTable,
}

#[derive(Debug, Clone)]
pub struct GridReport {
    pub runs: Vec<GridRun>,
    /// Index into `runs` of the best run per instance.
    pub best: BTreeMap<String, usize>,
}

fn summarize_run(instance: &str, config: TrainConfig, rewards: Vec<f64>, table: QTable, spec: &GridSpec) -> GridRun {
    let snapshots = rewards
        .chunks(spec.snapshot_interval)
        .scan(0, |done, block| {
            *done += block.len();
            Some((*done, block.iter().sum::<f64>() / block.len() as f64))
        })
        .collect();
    let (min, max) = rewards.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    let avg = if rewards.is_empty() { f64::NAN } else { rewards.iter().sum::<f64>() / rewards.len() as f64 };
    let tail = &rewards[rewards.len().saturating_sub(spec.score_window.max(1))..];
    let score = if tail.is_empty() { f64::NEG_INFINITY } else { tail.iter().sum::<f64>() / tail.len() as f64 };
    let cv = convergence_cv(&rewards, spec.score_window).ok();
    GridRun { instance: instance.to_string(), config, rewards, snapshots, min, avg, max, score, cv, table }
}

/// Trains every (instance, configuration) pair in parallel. Every run uses
/// the same seed so results do not depend on configuration order.
pub fn run_grid(scenarios: &[Scenario], basis: RoutingBasis, spec: &GridSpec, seed: u64) -> Result<GridReport> {
    spec.validate()?;
    let jobs: Vec<(usize, TrainConfig)> =
        (0..scenarios.len()).flat_map(|i| spec.configs().into_iter().map(move |c| (i, c))).collect();
    let runs: Vec<GridRun> = jobs
        .par_iter()
        .map(|(i, cfg)| {
            let sc = &scenarios[*i];
            let mut env = sc.env(basis)?;
            let res = train(&mut env, basis, cfg, seed)?;
            Ok(summarize_run(&sc.name, *cfg, res.rewards, res.table, spec))
        })
        .collect::<Result<_>>()?;
    let mut best = BTreeMap::new();
    for (idx, run) in runs.iter().enumerate() {
        let entry = best.entry(run.instance.clone()).or_insert(idx);
        if run.score > runs[*entry].score {
            *entry = idx;
        }
    }
    Ok(GridReport { runs, best })
}

/// Evaluates every (policy, basis) pair on the same episode seeds. QL needs
/// a table trained under the matching basis.
pub fn evaluate(
    scenario: &Scenario,
    policies: &[PolicyKind],
    bases: &[RoutingBasis],
    tables: &BTreeMap<RoutingBasis, Arc<QTable>>,
    eval_epsilon: f64,
    episodes: usize,
    seed: u64,
) -> Result<Vec<EpisodeMetrics>> {
    let mut jobs = Vec::new();
    for &basis in bases {
        for &kind in policies {
            let table = if kind == PolicyKind::Ql {
                let t = tables
                    .get(&basis)
                    .ok_or_else(|| Error::Config(format!("no QL table trained for basis {}", basis.label())))?;
                if t.basis() != basis {
                    return Err(Error::Config(format!(
                        "QL table was trained for basis {} but evaluated under {}",
                        t.basis().label(),
                        basis.label()
                    )));
                }
                Some(t)
            } else {
                None
            };
            jobs.push((kind, basis, scenario.policy(kind, table, eval_epsilon)?));
        }
    }
    let per_job: Vec<Vec<EpisodeMetrics>> = jobs
        .par_iter()
        .map(|(kind, basis, policy)| {
            let mut env = scenario.env(*basis)?;
            (0..episodes)
                .map(|ep| {
                    run_episode(&mut env, policy, episode_seed(seed, ep as u64))?;
                    let t = env.totals();
                    Ok(EpisodeMetrics {
                        policy: *kind,
                        basis: *basis,
                        episode: ep,
                        reward: t.reward,
                        orders: t.orders,
                        products: t.products,
                        encounters: t.encounters(),
                        steps: t.steps,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_job.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub policy: PolicyKind,
    pub basis: RoutingBasis,
    pub episodes: usize,
    pub reward: f64,
    pub orders: f64,
    pub products: f64,
    pub encounters: f64,
    pub steps: f64,
}

/// Per (policy, basis) averages, in first-seen order.
pub fn summarize(rows: &[EpisodeMetrics]) -> Vec<MetricsSummary> {
    let mut out: Vec<MetricsSummary> = Vec::new();
    for r in rows {
        let i = match out.iter().position(|s| s.policy == r.policy && s.basis == r.basis) {
            Some(i) => i,
            None => {
                out.push(MetricsSummary {
                    policy: r.policy,
                    basis: r.basis,
                    episodes: 0,
                    reward: 0.0,
                    orders: 0.0,
                    products: 0.0,
                    encounters: 0.0,
                    steps: 0.0,
                });
                out.len() - 1
            }
        };
        let s = &mut out[i];
        s.episodes += 1;
        s.reward += r.reward;
        s.orders += r.orders as f64;
        s.products += r.products as f64;
        s.encounters += r.encounters as f64;
        s.steps += r.steps as f64;
    }
    for s in &mut out {
        let n = s.episodes as f64;
        s.reward /= n;
        s.orders /= n;
        s.products /= n;
        s.encounters /= n;
        s.steps /= n;
    }
    out
}

/// Average customers per node over customer-only runs.
pub fn emit_heatmap(store: &Arc<Store>, config: &EnvConfig, episodes: usize, seed: u64) -> Result<Vec<f64>> {
    calibrate_traffic(store, config, episodes, seed)
}

pub fn write_heatmap_csv(graph: &StoreGraph, traffic: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("node,x,y,kind,traffic\n");
    for (n, t) in graph.nodes().iter().zip(traffic) {
        let kind = serde_json::to_value(n.kind)?;
        out.push_str(&format!("{},{},{},{},{}\n", n.id, n.x, n.y, kind.as_str().unwrap_or(""), t));
    }
    fs::write(path, out)?;
    Ok(())
}
