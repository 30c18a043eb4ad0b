use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use nahaco_core::aco::{solve, AcoParams, CostModel, ExpertGuide, HeuristicWeights};
use nahaco_core::bench::{format_summary_table, run_suite, summarize, write_results_csv, write_summary_csv, SuiteConfig};
use nahaco_core::neural::{load_checkpoint, save_checkpoint, LearnedGuide};
use nahaco_core::training::{train, write_log_csv, TrainConfig};
use nahaco_core::warehouse::{gen_tsp_instance, gen_warehouse_instance, WarehouseInstance, DEFAULT_K_NEIGHBORS};

#[derive(Parser)]
#[command(name = "nahaco", version, about = "Congestion-aware ant colony routing with a learned edge heuristic")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance file.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Run the colony on an instance.
    Solve(SolveArgs),
    /// Train the heuristic network.
    Train(TrainArgs),
    /// Run a benchmark suite.
    Bench(BenchArgs),
}

#[derive(Subcommand)]
enum GenCommand {
    /// Random points in the unit cube, k-nearest-neighbour graph, closed route.
    Tsp {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_K_NEIGHBORS)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Shelf grid with cargo in random slots, open route from the depot.
    Warehouse {
        #[arg(long)]
        sx: usize,
        #[arg(long)]
        sy: usize,
        #[arg(long)]
        levels: usize,
        #[arg(long)]
        cargo: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum HeuristicKind {
    Expert,
    Learned,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum, default_value = "expert")]
    heuristic: HeuristicKind,
    /// Checkpoint for the learned heuristic.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    ants: usize,
    #[arg(long, default_value_t = 50)]
    iters: usize,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 2.0)]
    beta: f64,
    #[arg(long, default_value_t = 0.1)]
    rho: f64,
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Size weight of the expert heuristic.
    #[arg(long, default_value_t = 0.1)]
    alpha_h: f64,
    /// Weight weight of the expert heuristic.
    #[arg(long, default_value_t = 0.1)]
    beta_h: f64,
    /// Scale of the expert heuristic.
    #[arg(long, default_value_t = 1.0)]
    gamma_h: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_model: PathBuf,
    /// Per-epoch loss log.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    suite: PathBuf,
    /// Per-run results; the summary goes next to it as `<stem>.summary.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct CurvePoint {
    iteration: usize,
    best: f64,
    mean: f64,
}

#[derive(Serialize)]
struct SolveOutput {
    heuristic: &'static str,
    visit_order: Vec<usize>,
    walk: Vec<usize>,
    cost: f64,
    con: f64,
    seconds: f64,
    curve: Vec<CurvePoint>,
}

fn write_instance(inst: &WarehouseInstance, out: &Path) -> Result<()> {
    inst.save(out).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {} ({} nodes, {} edges)", out.display(), inst.n_nodes(), inst.n_edges());
    Ok(())
}

fn run_solve(a: &SolveArgs) -> Result<()> {
    let inst = WarehouseInstance::load(&a.instance).with_context(|| format!("reading {}", a.instance.display()))?;
    let params = AcoParams {
        alpha: a.alpha,
        beta: a.beta,
        rho: a.rho,
        q: a.q,
        n_ants: a.ants,
        n_iterations: a.iters,
        delta: a.delta,
        seed: a.seed,
    };
    let weights = HeuristicWeights { alpha_h: a.alpha_h, beta_h: a.beta_h, gamma_h: a.gamma_h };
    let cost = CostModel::expert(&inst, &weights, a.delta)?;
    let start = Instant::now();
    let (label, result) = match a.heuristic {
        HeuristicKind::Expert => ("expert", solve(&inst, &cost, &mut ExpertGuide(cost.h.clone()), &params)?),
        HeuristicKind::Learned => {
            let Some(path) = &a.model else {
                bail!("--heuristic learned needs --model <checkpoint>");
            };
            let model = load_checkpoint(path)?;
            ("learned", solve(&inst, &cost, &mut LearnedGuide { params: &model }, &params)?)
        }
    };
    let seconds = start.elapsed().as_secs_f64();
    let output = SolveOutput {
        heuristic: label,
        visit_order: result.best.visit_order,
        walk: result.best.walk,
        cost: result.best.cost,
        con: result.best_con,
        seconds,
        curve: result
            .history
            .iter()
            .enumerate()
            .map(|(iteration, s)| CurvePoint { iteration, best: s.best, mean: s.mean })
            .collect(),
    };
    std::fs::write(&a.out, serde_json::to_string_pretty(&output)?).with_context(|| format!("writing {}", a.out.display()))?;
    println!("cost {:.6} con {:.6} in {:.3}s", output.cost, output.con, seconds);
    Ok(())
}

fn run_train(a: &TrainArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    let config = TrainConfig::from_json(&text)?;
    let outcome = train(&config, Some(&a.out_model))?;
    save_checkpoint(&outcome.params, &a.out_model)?;
    if let Some(log) = &a.log {
        write_log_csv(log, &outcome.history)?;
    }
    if let Some(last) = outcome.history.last() {
        println!(
            "{} epochs, final loss {:.6e}, mean best cost {:.4}, {:.1}s",
            outcome.history.len(),
            last.mean_loss,
            last.mean_best_cost,
            last.wall_clock_s
        );
    }
    Ok(())
}

fn summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "bench".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.summary.csv"))
}

fn run_bench(a: &BenchArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.suite).with_context(|| format!("reading {}", a.suite.display()))?;
    let suite = SuiteConfig::from_json(&text)?;
    let base = a.suite.parent().unwrap_or(Path::new("."));
    let results = run_suite(&suite, base)?;
    write_results_csv(&a.out, &results)?;
    let summary = summarize(&results)?;
    write_summary_csv(summary_path(&a.out), &summary)?;
    print!("{}", format_summary_table(&summary));
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Gen(GenCommand::Tsp { n, seed, k, out }) => write_instance(&gen_tsp_instance(n, seed, k)?, &out),
        Command::Gen(GenCommand::Warehouse { sx, sy, levels, cargo, seed, out }) => {
            write_instance(&gen_warehouse_instance(sx, sy, levels, cargo, seed)?, &out)
        }
        Command::Solve(a) => run_solve(&a),
        Command::Train(a) => run_train(&a),
        Command::Bench(a) => run_bench(&a),
    }
}
