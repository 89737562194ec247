use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use picker_core::env::EnvConfig;
use picker_core::graph::{RoutingBasis, StoreGraph};
use picker_core::harness::{
    evaluate, run_grid, summarize, write_heatmap_csv, write_metrics_csv, GridReport, GridSpec, Scenario,
};
use picker_core::instance::{generate_layout, Concentration, LayoutSize, LayoutSpec};
use picker_core::policy::{calibrate_traffic, PolicyKind};
use picker_core::qlearning::{table_file_name, QTable};
use picker_core::srp::{build_instance, solve_cutting_planes};

#[derive(Parser)]
#[command(name = "picker", version, about = "In-store picker routing: simulation, sequencing and Q-learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic store layout and its environment config.
    GenerateInstance(GenerateArgs),
    /// Train Q-tables over a parameter grid and keep the best one.
    Train(TrainArgs),
    /// Evaluate routing policies and write per-episode metrics.
    Evaluate(EvaluateArgs),
    /// Solve the picking-sequence problem for one order.
    SolveSrp(SolveArgs),
    /// Average customers per node, for plotting.
    Heatmap(HeatmapArgs),
}

#[derive(Args)]
struct Common {
    /// Store layout (JSON)
    #[arg(long)]
    layout: PathBuf,
    /// Environment config (JSON); defaults are used when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Customer-only episodes used to estimate node traffic
    #[arg(long, default_value_t = 50)]
    calibration_episodes: usize,
    #[arg(long, default_value_t = 0)]
    calibration_seed: u64,
}

impl Common {
    fn scenario(&self) -> Result<Scenario> {
        let graph = load_layout(&self.layout)?;
        let config = load_config(self.config.as_deref())?;
        let name = self.layout.file_stem().and_then(|s| s.to_str()).unwrap_or("store").to_string();
        Ok(Scenario::new(name, graph, config, self.calibration_episodes, self.calibration_seed)?)
    }

    fn out_dir(&self) -> Result<&Path> {
        fs::create_dir_all(&self.out_dir).with_context(|| format!("creating {}", self.out_dir.display()))?;
        Ok(&self.out_dir)
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    size: LayoutSize,
    #[arg(long)]
    concentration: Concentration,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Layout file name inside the output directory
    #[arg(long, default_value = "layout.json")]
    out: String,
    #[arg(long, default_value = "config.json")]
    config_out: String,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "distance")]
    basis: RoutingBasis,
    #[arg(long, value_delimiter = ',', default_value = "0.97")]
    alphas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.9")]
    gammas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.01")]
    epsilons: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    episodes: usize,
    #[arg(long, default_value_t = 1000)]
    snapshot_interval: usize,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',', default_value = "sp,mp,cn,ql")]
    policy: Vec<PolicyKind>,
    #[arg(long, value_delimiter = ',', default_value = "distance")]
    basis: Vec<RoutingBasis>,
    /// Directory holding qtable_<basis>.csv files; defaults to --out-dir
    #[arg(long)]
    tables: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    #[arg(long, default_value_t = 0.01)]
    eval_epsilon: f64,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    /// Product SKUs or node ids
    #[arg(long, value_delimiter = ',', required = true)]
    products: Vec<String>,
    #[arg(long, default_value = "distance")]
    basis: RoutingBasis,
}

#[derive(Args)]
struct HeatmapArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 50)]
    episodes: usize,
}

fn load_layout(path: &Path) -> Result<StoreGraph> {
    StoreGraph::load(path).with_context(|| format!("loading layout {}", path.display()))
}

fn load_config(path: Option<&Path>) -> Result<EnvConfig> {
    match path {
        Some(p) => EnvConfig::load(p).with_context(|| format!("loading config {}", p.display())),
        None => Ok(EnvConfig::default()),
    }
}

fn generate(args: &GenerateArgs) -> Result<()> {
    fs::create_dir_all(&args.out_dir)?;
    let graph = generate_layout(&LayoutSpec::new(args.size), args.seed)?;
    let config = EnvConfig { concentration: args.concentration, ..EnvConfig::default() };
    let layout_path = args.out_dir.join(&args.out);
    graph.save(&layout_path)?;
    config.save(args.out_dir.join(&args.config_out))?;
    println!(
        "{}: {} nodes, {} products",
        layout_path.display(),
        graph.node_count(),
        graph.product_nodes().len()
    );
    Ok(())
}

fn write_grid_outputs(report: &GridReport, dir: &Path) -> Result<()> {
    let mut grid = String::from("instance,alpha,gamma,epsilon,episodes,min,avg,max,score,cv\n");
    let mut curves = String::from("alpha,gamma,epsilon,episode,reward\n");
    let mut snaps = String::from("alpha,gamma,epsilon,episodes,mean_reward\n");
    for run in &report.runs {
        let c = &run.config;
        let cv = run.cv.map(|v| v.to_string()).unwrap_or_default();
        grid.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            run.instance,
            c.alpha,
            c.gamma,
            c.epsilon,
            run.rewards.len(),
            run.min,
            run.avg,
            run.max,
            run.score,
            cv
        ));
        for (ep, r) in run.rewards.iter().enumerate() {
            curves.push_str(&format!("{},{},{},{},{}\n", c.alpha, c.gamma, c.epsilon, ep, r));
        }
        for (done, mean) in &run.snapshots {
            snaps.push_str(&format!("{},{},{},{},{}\n", c.alpha, c.gamma, c.epsilon, done, mean));
        }
    }
    fs::write(dir.join("grid.csv"), grid)?;
    fs::write(dir.join("rewards.csv"), curves)?;
    fs::write(dir.join("snapshots.csv"), snaps)?;
    Ok(())
}

fn train(args: &TrainArgs) -> Result<()> {
    let scenario = args.common.scenario()?;
    let spec = GridSpec {
        alphas: args.alphas.clone(),
        gammas: args.gammas.clone(),
        epsilons: args.epsilons.clone(),
        episodes: args.episodes,
        snapshot_interval: args.snapshot_interval,
        score_window: 50,
    };
    let report = run_grid(std::slice::from_ref(&scenario), args.basis, &spec, args.common.seed)?;
    let dir = args.common.out_dir()?;
    write_grid_outputs(&report, dir)?;
    let best = &report.runs[report.best[&scenario.name]];
    let path = dir.join(table_file_name(args.basis));
    best.table.save(&path)?;
    let c = &best.config;
    println!(
        "best alpha={} gamma={} epsilon={}: score {:.2}, cv {} -> {}",
        c.alpha,
        c.gamma,
        c.epsilon,
        best.score,
        best.cv.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into()),
        path.display()
    );
    Ok(())
}

fn run_evaluate(args: &EvaluateArgs) -> Result<()> {
    let scenario = args.common.scenario()?;
    let table_dir = args.tables.clone().unwrap_or_else(|| args.common.out_dir.clone());
    let mut tables = BTreeMap::new();
    if args.policy.contains(&PolicyKind::Ql) {
        for &basis in &args.basis {
            let path = table_dir.join(table_file_name(basis));
            if !path.exists() {
                bail!("no Q-table for basis {} at {}; run `picker train --basis {}` first", basis.label(), path.display(), basis.label());
            }
            let table = QTable::load(&path, basis).with_context(|| format!("loading {}", path.display()))?;
            tables.insert(basis, Arc::new(table));
        }
    }
    let rows = evaluate(&scenario, &args.policy, &args.basis, &tables, args.eval_epsilon, args.episodes, args.common.seed)?;
    let dir = args.common.out_dir()?;
    write_metrics_csv(&rows, dir.join("metrics.csv"))?;
    let mut summary = String::from("policy,basis,episodes,reward,orders,products,encounters,steps\n");
    for s in summarize(&rows) {
        summary.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            s.policy,
            s.basis.label(),
            s.episodes,
            s.reward,
            s.orders,
            s.products,
            s.encounters,
            s.steps
        ));
        println!(
            "{:>2} {:<11} reward {:>10.1}  orders {:>6.1}  products {:>7.1}  encounters {:>7.1}  steps {:>7.1}",
            s.policy,
            s.basis.label(),
            s.reward,
            s.orders,
            s.products,
            s.encounters,
            s.steps
        );
    }
    fs::write(dir.join("summary.csv"), summary)?;
    Ok(())
}

fn solve(args: &SolveArgs) -> Result<()> {
    let graph = load_layout(&args.common.layout)?;
    let mut picks = Vec::new();
    for token in &args.products {
        match graph.resolve_product(token) {
            Some(n) => picks.push(n),
            None => bail!("unknown product {token:?}"),
        }
    }
    let traffic = match args.basis {
        RoutingBasis::ArcDistance => None,
        RoutingBasis::ArcCrowdedness => Some(args.common.scenario()?.traffic),
    };
    let inst = build_instance(&graph, &picks, args.basis, traffic.as_deref())?;
    let sol = solve_cutting_planes(&inst)?;
    let out = serde_json::json!({
        "basis": args.basis.label(),
        "picks": picks,
        "sequence": sol.sequence,
        "cost": sol.cost,
    });
    let text = serde_json::to_string_pretty(&out)?;
    println!("{text}");
    if args.common.out_dir != Path::new(".") {
        fs::write(args.common.out_dir()?.join("srp.json"), text + "\n")?;
    }
    Ok(())
}

fn heatmap(args: &HeatmapArgs) -> Result<()> {
    if args.episodes == 0 {
        bail!("--episodes must be at least 1");
    }
    let graph = load_layout(&args.common.layout)?;
    let config = load_config(args.common.config.as_deref())?;
    let store = picker_core::env::Store::new(graph, config.concentration)?;
    let traffic = calibrate_traffic(&store, &config, args.episodes, args.common.seed)?;
    let path = args.common.out_dir()?.join("heatmap.csv");
    write_heatmap_csv(&store.graph, &traffic, &path)?;
    println!("{}", path.display());
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::GenerateInstance(a) => generate(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::SolveSrp(a) => solve(a),
        Command::Heatmap(a) => heatmap(a),
    }
}
