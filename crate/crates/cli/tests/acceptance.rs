//! Acceptance checks. Runs without the libtest harness so every criterion
//! prints its PASS/FAIL line; exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use picker_core::env::{Env, EnvConfig, RewardWeights, Store};
use picker_core::graph::{length_weight, shortest_path, NodeId, NodeKind, Product, RoutingBasis, StoreEdge, StoreGraph, StoreNode};
use picker_core::harness::{bootstrap_mean_lower, decile_means, evaluate, run_grid, summarize, EpisodeMetrics, GridSpec, Scenario};
use picker_core::instance::{Concentration, InstanceConfig, LayoutSize};
use picker_core::policy::PolicyKind;
use picker_core::qlearning::{train, TrainConfig};
use picker_core::srp::{build_instance, solve_cutting_planes, solve_oracle, SrpSequencer};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

/// Connected random store: entrance 0, exit 1, prep zone last, the rest
/// alternating product positions and intersections.
fn random_store(n: usize, extra: usize, rng: &mut ChaCha8Rng) -> StoreGraph {
    let nodes: Vec<StoreNode> = (0..n)
        .map(|i| {
            let kind = match i {
                0 => NodeKind::Entrance,
                1 => NodeKind::Exit,
                _ if i == n - 1 => NodeKind::PrepZone,
                _ if i % 2 == 0 => NodeKind::ProductPosition,
                _ => NodeKind::Intersection,
            };
            StoreNode { id: NodeId(i), x: 0.0, y: 0.0, kind }
        })
        .collect();
    let mut order: Vec<usize> = (1..n).collect();
    order.shuffle(rng);
    let mut placed = vec![0usize];
    let mut pairs = std::collections::BTreeSet::new();
    let mut edges = Vec::new();
    for v in order {
        let u = placed[rng.random_range(0..placed.len())];
        pairs.insert((u.min(v), u.max(v)));
        edges.push(StoreEdge { u: NodeId(u), v: NodeId(v), length: rng.random_range(1..=40) as f64 * 0.25 });
        placed.push(v);
    }
    let extra = extra.min(n * (n - 1) / 2 - (n - 1));
    while pairs.len() < n - 1 + extra {
        let (u, v) = (rng.random_range(0..n), rng.random_range(0..n));
        if u != v && pairs.insert((u.min(v), u.max(v))) {
            edges.push(StoreEdge { u: NodeId(u), v: NodeId(v), length: rng.random_range(1..=40) as f64 * 0.25 });
        }
    }
    let products = nodes
        .iter()
        .filter(|s| s.kind == NodeKind::ProductPosition)
        .map(|s| Product { sku: format!("P{}", s.id.0), node: s.id })
        .collect();
    StoreGraph::new(nodes, edges, products).expect("valid random store")
}

fn srp_exactness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut slowest: f64 = 0.0;
    for picks in 1..=8 {
        for i in 0..100 {
            let g = random_store(24, 12, &mut rng);
            let mut candidates = g.product_nodes();
            candidates.shuffle(&mut rng);
            let inst = build_instance(&g, &candidates[..picks], RoutingBasis::ArcDistance, None).unwrap();
            let t = Instant::now();
            let cp = solve_cutting_planes(&inst).unwrap();
            slowest = slowest.max(t.elapsed().as_secs_f64());
            let oracle = solve_oracle(&inst).unwrap();
            if cp.cost != oracle.cost || !inst.is_valid_sequence(&cp.sequence) {
                return verdict(false, format!("picks {picks} instance {i}: {} vs oracle {}", cp.cost, oracle.cost));
            }
        }
    }
    verdict(slowest < 1.0, format!("800 instances equal, slowest solve {slowest:.4}s"))
}

fn tiny_env(config: EnvConfig, seed: u64) -> Env {
    let inst = InstanceConfig::synthetic(LayoutSize::Tiny, config.concentration);
    let g = inst.graph(seed).unwrap();
    let seq = SrpSequencer::new(&g, RoutingBasis::ArcDistance, None).unwrap();
    let store = Store::new(g, config.concentration).unwrap();
    Env::new(store, config, Arc::new(seq)).unwrap()
}

fn reward_formula() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    while checked < 1000 {
        let w = RewardWeights {
            step: rng.random_range(0.0..5.0),
            same_node: rng.random_range(0.0..5.0),
            visible: rng.random_range(0.0..5.0),
            pick: rng.random_range(10.0..200.0),
        };
        let config = EnvConfig { open_time: 600.0, lambda_store: 4.0, reward_weights: w, ..EnvConfig::default() };
        let mut env = tiny_env(config, rng.random());
        env.reset(rng.random());
        for _ in 0..50 {
            let Some(obs) = env.observe().unwrap() else { break };
            let a = obs.neighbors[rng.random_range(0..obs.neighbors.len())].0;
            let out = env.step(a).unwrap();
            let p = out.phi;
            let terms = [
                -w.step * f64::from(p.steps),
                -w.same_node * f64::from(p.same_node),
                -w.visible * f64::from(p.visible),
                w.pick * f64::from(p.picks),
            ];
            let expect: f64 = terms.iter().sum();
            let scale: f64 = terms.iter().map(|t| t.abs()).sum::<f64>().max(1.0);
            worst = worst.max((out.reward - expect).abs() / scale);
            checked += 1;
        }
    }
    verdict(worst <= 4.0 * f64::EPSILON, format!("{checked} steps, worst relative error {worst:.2e}"))
}

fn arrival_statistics() -> Verdict {
    let periods = 10_000u64;
    let config = EnvConfig { lambda_store: 2.0, lambda_online: 0.0, open_time: periods as f64 * 60.0, ..EnvConfig::default() };
    let mut env = tiny_env(config, 0);
    env.reset(303);
    for _ in 0..periods {
        env.spawn_arrivals(60.0);
        env.advance_customers(60.0);
    }
    let mean = env.counters().generated as f64 / periods as f64;
    let se = (2.0 / periods as f64).sqrt();
    let z = (mean - 2.0) / se;
    verdict(z.abs() <= 3.0, format!("mean {mean:.4} over {periods} periods, z = {z:.2}"))
}

fn convergence() -> Verdict {
    let config = TrainConfig { alpha: 0.97, gamma: 0.9, epsilon: 0.01, episodes: 1000, convergence_threshold: 0.0, eval_epsilon: None };
    let mut scenarios = Vec::new();
    for size in [LayoutSize::Tiny, LayoutSize::Small] {
        for conc in Concentration::PROFILED {
            let inst = InstanceConfig::synthetic(size, conc);
            let g = inst.graph(0).unwrap();
            let traffic = vec![0.0; g.node_count()];
            scenarios.push(Scenario::with_traffic(&inst.name, g, inst.env.clone(), traffic).unwrap());
        }
    }
    let report = run_grid(&scenarios, RoutingBasis::ArcDistance, &GridSpec::single(&config), 7).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for run in &report.runs {
        let cv = run.cv.unwrap_or(f64::INFINITY);
        let (first, last) = decile_means(&run.rewards).unwrap();
        pass &= cv <= 0.18 && last > first;
        parts.push(format!("{} cv {cv:.3} deciles {first:.0}->{last:.0}", run.instance));
    }
    verdict(pass, parts.join("; "))
}

struct PolicyRun {
    rows: Vec<EpisodeMetrics>,
    episodes: usize,
}

fn medium_runs() -> PolicyRun {
    let inst = InstanceConfig::synthetic(LayoutSize::Medium, Concentration::Back);
    let g = inst.graph(0).unwrap();
    let scenario = Scenario::new(&inst.name, g, inst.env.clone(), 50, 1).unwrap();
    let config = TrainConfig { alpha: 0.1, gamma: 0.9, epsilon: 0.05, episodes: 3000, ..TrainConfig::default() };
    let bases = [RoutingBasis::ArcDistance, RoutingBasis::ArcCrowdedness];
    let mut tables = BTreeMap::new();
    for basis in bases {
        let mut env = scenario.env(basis).unwrap();
        tables.insert(basis, Arc::new(train(&mut env, basis, &config, 7).unwrap().table));
    }
    let episodes = 100;
    let rows = evaluate(&scenario, &PolicyKind::ALL, &bases, &tables, 0.05, episodes, 99).unwrap();
    PolicyRun { rows, episodes }
}

fn policy_ordering(run: &PolicyRun) -> Verdict {
    let summary = summarize(&run.rows);
    let get = |kind| *summary.iter().find(|s| s.policy == kind && s.basis == RoutingBasis::ArcDistance).unwrap();
    let (sp, cn, ql) = (get(PolicyKind::Sp), get(PolicyKind::Cn), get(PolicyKind::Ql));
    let encounters = cn.encounters < ql.encounters && ql.encounters < sp.encounters;
    let orders = sp.orders >= ql.orders && ql.orders >= cn.orders;
    let ratio = ql.encounters / sp.encounters;
    let band = ratio <= 0.6;
    verdict(
        encounters && orders && band,
        format!(
            "encounters CN {:.1} < QL {:.1} < SP {:.1}: {}; orders SP {:.2} >= QL {:.2} >= CN {:.2}: {}; QL/SP encounters {:.3} <= 0.6: {}",
            cn.encounters,
            ql.encounters,
            sp.encounters,
            if encounters { "holds" } else { "violated" },
            sp.orders,
            ql.orders,
            cn.orders,
            if orders { "holds" } else { "violated" },
            ratio,
            if band { "holds" } else { "violated" },
        ),
    )
}

fn basis_effect(run: &PolicyRun) -> Verdict {
    // paired per episode: summed encounters under distance minus crowdedness
    let mut diff = vec![0.0; run.episodes];
    let mut totals = [0.0; 2];
    for r in &run.rows {
        let (sign, slot) = if r.basis == RoutingBasis::ArcDistance { (1.0, 0) } else { (-1.0, 1) };
        diff[r.episode] += sign * r.encounters as f64;
        totals[slot] += r.encounters as f64;
    }
    let lower = bootstrap_mean_lower(&diff, 10_000, 0.95, 606).unwrap();
    let reduction = 100.0 * (totals[0] - totals[1]) / totals[0];
    verdict(lower >= 0.0, format!("reduction {reduction:.2}%, 95% bootstrap lower bound {lower:.1} encounters per episode"))
}

fn all_pairs_fixpoint(g: &StoreGraph) -> Vec<Vec<f64>> {
    let n = g.node_count();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    let mut changed = true;
    while changed {
        changed = false;
        for row in d.iter_mut() {
            for e in g.edges() {
                for (a, b) in [(e.u.0, e.v.0), (e.v.0, e.u.0)] {
                    if row[a] + e.length < row[b] {
                        row[b] = row[a] + e.length;
                        changed = true;
                    }
                }
            }
        }
    }
    d
}

fn shortest_path_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut pairs = 0;
    for graph_idx in 0..20 {
        let g = random_store(30, rng.random_range(0..40), &mut rng);
        let oracle = all_pairs_fixpoint(&g);
        for i in 0..30 {
            for j in 0..30 {
                let route = shortest_path(&g, NodeId(i), NodeId(j), length_weight).unwrap();
                if route.cost != oracle[i][j] {
                    return verdict(false, format!("graph {graph_idx} pair ({i},{j}): {} vs {}", route.cost, oracle[i][j]));
                }
                pairs += 1;
            }
        }
    }
    verdict(true, format!("{pairs} pairs over 20 graphs equal"))
}

fn picker(args: &[&str], dir: &Path) {
    let out = Command::new(env!("CARGO_BIN_EXE_picker")).args(args).current_dir(dir).output().expect("picker runs");
    assert!(out.status.success(), "picker {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let mut metrics = Vec::new();
    for run in ["a", "b"] {
        picker(&["generate-instance", "--size", "tiny", "--concentration", "middle", "--seed", "4", "--out-dir", run], dir);
        let layout = format!("{run}/layout.json");
        let config = format!("{run}/config.json");
        let common = ["--layout", layout.as_str(), "--config", config.as_str(), "--out-dir", run, "--calibration-episodes", "5"];
        for basis in ["distance", "crowdedness"] {
            let mut args = vec!["train", "--seed", "11", "--basis", basis, "--episodes", "60", "--alphas", "0.95,0.97"];
            args.extend(common);
            picker(&args, dir);
        }
        let mut args = vec!["evaluate", "--seed", "12", "--basis", "distance,crowdedness", "--episodes", "5"];
        args.extend(common);
        picker(&args, dir);
        metrics.push((fs::read(dir.join(run).join("metrics.csv")).unwrap(), fs::read(dir.join(run).join("rewards.csv")).unwrap()));
    }
    let same = metrics[0] == metrics[1];
    let rows = metrics[0].0.iter().filter(|&&b| b == b'\n').count() - 1;
    verdict(same, format!("two CLI runs, {rows} metric rows, outputs {}", if same { "byte-identical" } else { "differ" }))
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, f: &dyn Fn() -> Verdict| {
        let t = Instant::now();
        let v = f();
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {n} {name}: {} ({}) [{:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            t.elapsed().as_secs_f64()
        );
    };
    report(1, "SRP exactness", &srp_exactness);
    report(2, "reward formula", &reward_formula);
    report(3, "arrival statistics", &arrival_statistics);
    report(4, "convergence", &convergence);
    let runs = medium_runs();
    report(5, "policy ordering", &|| policy_ordering(&runs));
    report(6, "basis effect", &|| basis_effect(&runs));
    report(7, "shortest-path oracle", &shortest_path_oracle);
    report(8, "determinism", &determinism);
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
