//! Benchmark harness: an exact oracle for small instances, seeded suites of
//! colony runs, and result tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aco::{solve, AcoParams, CostModel, ExpertGuide, HeuristicWeights, Tour};
use crate::neural::{load_checkpoint, LearnedGuide, ModelParams};
use crate::warehouse::{gen_tsp_instance, gen_warehouse_instance, RouteKind, TrafficState, WarehouseInstance};
use crate::{Error, Result};

/// Largest instance the dynamic program accepts.
pub const HELD_KARP_LIMIT: usize = 12;
/// Largest instance enumerated when congestion makes costs order dependent.
pub const EXHAUSTIVE_LIMIT: usize = 9;

/// Minimum-cost tour of a complete instance: dynamic programming over
/// `1/H` edge costs when `delta` is 0, full enumeration otherwise. Each
/// candidate is costed under its own traffic.
pub fn brute_force_tsp(instance: &WarehouseInstance, weights: &HeuristicWeights, delta: f64) -> Result<Tour> {
    let n = instance.n_nodes();
    let limit = if delta == 0.0 { HELD_KARP_LIMIT } else { EXHAUSTIVE_LIMIT };
    if n > limit {
        return Err(Error::OracleTooLarge { n, limit });
    }
    if !instance.is_complete() {
        return Err(Error::NotComplete);
    }
    let cost = CostModel::expert(instance, weights, delta)?;
    let order = if delta == 0.0 { held_karp(instance, &cost) } else { enumerate(instance, &cost) };
    let mut tour = Tour::from_order(instance, order)?;
    let traffic = own_traffic(instance, &tour);
    tour.cost = cost.cost_of_edges(instance, &tour.edges, &traffic);
    Ok(tour)
}

fn own_traffic(instance: &WarehouseInstance, tour: &Tour) -> TrafficState {
    let mut t = TrafficState::new(instance);
    for &e in &tour.edges {
        t.add_traversal(e);
    }
    t
}

fn held_karp(instance: &WarehouseInstance, cost: &CostModel) -> Vec<usize> {
    let n = instance.n_nodes();
    let depot = instance.depot();
    let others: Vec<usize> = (0..n).filter(|&v| v != depot).collect();
    let m = others.len();
    let w = |a: usize, b: usize| 1.0 / cost.h.eta[instance.edge_between(a, b).expect("complete graph")];
    let full = 1usize << m;
    let mut dp = vec![f64::INFINITY; full * m];
    let mut parent = vec![usize::MAX; full * m];
    for j in 0..m {
        dp[(1 << j) * m + j] = w(depot, others[j]);
    }
    for mask in 1..full {
        for j in 0..m {
            let cur = dp[mask * m + j];
            if mask & (1 << j) == 0 || !cur.is_finite() {
                continue;
            }
            for k in 0..m {
                if mask & (1 << k) != 0 {
                    continue;
                }
                let next = mask | (1 << k);
                let cand = cur + w(others[j], others[k]);
                if cand < dp[next * m + k] {
                    dp[next * m + k] = cand;
                    parent[next * m + k] = j;
                }
            }
        }
    }
    let close = |j: usize| if instance.route() == RouteKind::Closed { w(others[j], depot) } else { 0.0 };
    let last_mask = full - 1;
    let mut end = (0..m)
        .min_by(|&a, &b| (dp[last_mask * m + a] + close(a)).total_cmp(&(dp[last_mask * m + b] + close(b))))
        .expect("at least two nodes");
    let mut rev = Vec::with_capacity(m);
    let mut mask = last_mask;
    loop {
        rev.push(others[end]);
        let p = parent[mask * m + end];
        mask &= !(1 << end);
        if p == usize::MAX {
            break;
        }
        end = p;
    }
    rev.push(depot);
    rev.reverse();
    rev
}

/// Lexicographic next permutation; false when `v` was the last one.
fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).expect("pivot exists");
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

fn enumerate(instance: &WarehouseInstance, cost: &CostModel) -> Vec<usize> {
    let depot = instance.depot();
    let mut rest: Vec<usize> = (0..instance.n_nodes()).filter(|&v| v != depot).collect();
    let mut best = (f64::INFINITY, Vec::new());
    loop {
        let order: Vec<usize> = std::iter::once(depot).chain(rest.iter().copied()).collect();
        let tour = Tour::from_order(instance, order).expect("complete graph");
        let c = cost.cost_of_edges(instance, &tour.edges, &own_traffic(instance, &tour));
        if c < best.0 {
            best = (c, tour.visit_order);
        }
        if !next_permutation(&mut rest) {
            break;
        }
    }
    best.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Method {
    ExpertAco,
    LearnedAco { model: Option<PathBuf> },
    BruteForce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    /// Label in the results; defaults to the method kind.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(flatten)]
    pub method: Method,
}

impl MethodSpec {
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            match self.method {
                Method::ExpertAco => "expert-aco",
                Method::LearnedAco { .. } => "learned-aco",
                Method::BruteForce => "brute-force",
            }
            .to_string()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InstanceSource {
    /// An instance JSON file, relative to the suite file.
    File { path: PathBuf },
    Tsp { n: usize, seed: u64, #[serde(default = "default_k")] k: usize },
    Warehouse { aisles: usize, slots: usize, levels: usize, cargo: usize, seed: u64 },
}

fn default_k() -> usize {
    crate::warehouse::DEFAULT_K_NEIGHBORS
}

impl InstanceSource {
    pub fn id(&self) -> String {
        match self {
            Self::File { path } => path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned()),
            Self::Tsp { n, seed, k } => format!("tsp-n{n}-k{k}-s{seed}"),
            Self::Warehouse { aisles, slots, levels, cargo, seed } => {
                format!("wh-{aisles}x{slots}x{levels}-c{cargo}-s{seed}")
            }
        }
    }

    pub fn load(&self, base: &Path) -> Result<WarehouseInstance> {
        match *self {
            Self::File { ref path } => WarehouseInstance::load(base.join(path)),
            Self::Tsp { n, seed, k } => gen_tsp_instance(n, seed, k.min(n.saturating_sub(1)).max(1)),
            Self::Warehouse { aisles, slots, levels, cargo, seed } => {
                gen_warehouse_instance(aisles, slots, levels, cargo, seed)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub methods: Vec<MethodSpec>,
    pub instances: Vec<InstanceSource>,
    pub seeds: Vec<u64>,
    /// Colony budget and parameters shared by every colony method; the seed
    /// field is replaced per cell.
    #[serde(default)]
    pub aco: AcoParams,
    #[serde(default)]
    pub heuristic_weights: HeuristicWeights,
    /// Label of the method the gaps are measured against.
    #[serde(default)]
    pub baseline: Option<String>,
    /// Run cells on all cores. Timings are noisier.
    #[serde(default)]
    pub parallel: bool,
}

impl SuiteConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub method: String,
    pub instance: String,
    pub seed: u64,
    pub seconds: f64,
    pub cost: f64,
    pub con: f64,
    pub gap_pct: Option<f64>,
}

struct Cell<'a> {
    method: &'a MethodSpec,
    model: Option<&'a ModelParams>,
    instance: &'a WarehouseInstance,
    id: &'a str,
    seed: u64,
}

fn run_cell(cell: &Cell<'_>, suite: &SuiteConfig) -> Result<BenchResult> {
    let aco = AcoParams { seed: cell.seed, ..suite.aco };
    let cost = CostModel::expert(cell.instance, &suite.heuristic_weights, aco.delta)?;
    let start = Instant::now();
    let (cost_value, con) = match cell.method.method {
        Method::ExpertAco => {
            let r = solve(cell.instance, &cost, &mut ExpertGuide(cost.h.clone()), &aco)?;
            (r.best.cost, r.best_con)
        }
        Method::LearnedAco { .. } => {
            let params = cell.model.ok_or(Error::MissingCheckpoint(None))?;
            let r = solve(cell.instance, &cost, &mut LearnedGuide { params }, &aco)?;
            (r.best.cost, r.best_con)
        }
        Method::BruteForce => {
            let tour = brute_force_tsp(cell.instance, &suite.heuristic_weights, aco.delta)?;
            let traffic = own_traffic(cell.instance, &tour);
            (tour.cost, cost.congestion_of_edges(cell.instance, &tour.edges, &traffic))
        }
    };
    let seconds = (start.elapsed().as_secs_f64() * 1e3).round() / 1e3;
    Ok(BenchResult {
        method: cell.method.label(),
        instance: cell.id.to_string(),
        seed: cell.seed,
        seconds,
        cost: cost_value,
        con,
        gap_pct: None,
    })
}

/// Runs every (method, instance, seed) cell. File instances and model paths
/// are resolved against `base`. Rows come out ordered by instance, then
/// seed, then method.
pub fn run_suite(suite: &SuiteConfig, base: &Path) -> Result<Vec<BenchResult>> {
    if suite.methods.is_empty() || suite.instances.is_empty() || suite.seeds.is_empty() {
        return Err(Error::Empty("suite methods, instances or seeds"));
    }
    suite.aco.validate()?;
    if let Some(b) = &suite.baseline {
        if !suite.methods.iter().any(|m| &m.label() == b) {
            return Err(Error::InvalidParameter(format!("baseline {b} is not one of the suite methods")));
        }
    }
    let models: Vec<Option<ModelParams>> = suite
        .methods
        .iter()
        .map(|m| match &m.method {
            Method::LearnedAco { model: Some(path) } => load_checkpoint(base.join(path)).map(Some),
            Method::LearnedAco { model: None } => Err(Error::MissingCheckpoint(None)),
            _ => Ok(None),
        })
        .collect::<Result<_>>()?;
    let instances: Vec<(String, WarehouseInstance)> =
        suite.instances.iter().map(|s| Ok((s.id(), s.load(base)?))).collect::<Result<_>>()?;

    let mut cells = Vec::new();
    for (id, inst) in &instances {
        for &seed in &suite.seeds {
            for (method, model) in suite.methods.iter().zip(&models) {
                cells.push(Cell { method, model: model.as_ref(), instance: inst, id, seed });
            }
        }
    }
    let mut results: Vec<BenchResult> = if suite.parallel {
        cells.par_iter().map(|c| run_cell(c, suite)).collect::<Result<_>>()?
    } else {
        cells.iter().map(|c| run_cell(c, suite)).collect::<Result<_>>()?
    };

    if let Some(baseline) = &suite.baseline {
        let reference: BTreeMap<(String, u64), f64> = results
            .iter()
            .filter(|r| &r.method == baseline)
            .map(|r| ((r.instance.clone(), r.seed), r.cost))
            .collect();
        for r in &mut results {
            let base_cost = reference[&(r.instance.clone(), r.seed)];
            r.gap_pct = Some(if &r.method == baseline { 0.0 } else { 100.0 * (r.cost - base_cost) / base_cost });
        }
    }
    Ok(results)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: String,
    pub count: usize,
    pub mean_seconds: f64,
    pub mean_cost: f64,
    pub mean_gap_pct: Option<f64>,
    pub mean_con: f64,
}

/// Per-method means, ordered by method name.
pub fn summarize(results: &[BenchResult]) -> Result<Vec<SummaryRow>> {
    if results.is_empty() {
        return Err(Error::Empty("benchmark results"));
    }
    let mut groups: BTreeMap<&str, Vec<&BenchResult>> = BTreeMap::new();
    for r in results {
        groups.entry(&r.method).or_default().push(r);
    }
    Ok(groups
        .into_iter()
        .map(|(method, rows)| {
            let n = rows.len() as f64;
            let mean = |f: fn(&BenchResult) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
            let gaps: Option<Vec<f64>> = rows.iter().map(|r| r.gap_pct).collect();
            SummaryRow {
                method: method.to_string(),
                count: rows.len(),
                mean_seconds: mean(|r| r.seconds),
                mean_cost: mean(|r| r.cost),
                mean_gap_pct: gaps.map(|g| g.iter().sum::<f64>() / n),
                mean_con: mean(|r| r.con),
            }
        })
        .collect())
}

pub fn write_results_csv(path: impl AsRef<Path>, results: &[BenchResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in results {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv(path: impl AsRef<Path>, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Plain-text table with right-aligned numeric columns.
pub fn format_summary_table(rows: &[SummaryRow]) -> String {
    let header = ["method", "n", "time_s", "cost", "gap_pct", "con"];
    let body: Vec<[String; 6]> = rows
        .iter()
        .map(|r| {
            [
                r.method.clone(),
                r.count.to_string(),
                format!("{:.3}", r.mean_seconds),
                format!("{:.4}", r.mean_cost),
                r.mean_gap_pct.map_or("-".to_string(), |g| format!("{g:.2}")),
                format!("{:.4}", r.mean_con),
            ]
        })
        .collect();
    let mut width = header.map(str::len);
    for row in &body {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[&str]| {
        for (k, cell) in cells.iter().enumerate() {
            if k == 0 {
                let _ = write!(out, "{cell:<w$}", w = width[0]);
            } else {
                let _ = write!(out, "  {cell:>w$}", w = width[k]);
            }
        }
        out.push('\n');
    };
    line(&mut out, &header);
    for row in &body {
        line(&mut out, &row.iter().map(String::as_str).collect::<Vec<_>>());
    }
    out
}
