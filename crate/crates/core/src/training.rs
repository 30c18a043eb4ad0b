//! CARL training: colony rollouts guided by the learned heuristic, the
//! probability-weighted absolute-deviation loss, and the parameter update.
//!
//! Each rollout runs a fresh colony for `aco.n_iterations` iterations. Every
//! iteration is one episode: the network is evaluated in train mode on the
//! previous iteration's traffic, the ants sample tours, and the loss and its
//! gradient are taken over that iteration's ants. Tour costs and the
//! pheromone trail are treated as constants of the parameters.

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aco::{
    ant_rng, pheromone_update, replay_steps, AcoParams, CostModel, HeuristicField, HeuristicWeights, PheromoneField,
    Tour, TourBuilder,
};
use crate::neural::{backward, forward, save_checkpoint, BatchStats, Mode, ModelConfig, ModelParams};
use crate::warehouse::{gen_tsp_instance, gen_warehouse_instance, TrafficState, WarehouseInstance};
use crate::{Error, Result};

/// Log-probabilities below this contribute nothing to the loss.
pub const LOG_PROB_FLOOR: f64 = -60.0;

#[derive(Debug, Clone, PartialEq)]
pub struct AntRecord {
    pub tour: Tour,
    pub cost: f64,
    pub log_selection_prob: f64,
}

/// The ants of one colony iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub records: Vec<AntRecord>,
    pub cost_avg: f64,
}

impl Episode {
    pub fn new(records: Vec<AntRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Empty("episode"));
        }
        for r in &records {
            if !(r.log_selection_prob <= 0.0) || !r.cost.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "ant record needs log probability <= 0 and finite cost, got {} and {}",
                    r.log_selection_prob, r.cost
                )));
            }
        }
        let cost_avg = records.iter().map(|r| r.cost).sum::<f64>() / records.len() as f64;
        Ok(Self { records, cost_avg })
    }

    pub fn from_tours(tours: Vec<Tour>) -> Result<Self> {
        Self::new(
            tours
                .into_iter()
                .map(|t| AntRecord { cost: t.cost, log_selection_prob: t.log_selection_prob, tour: t })
                .collect(),
        )
    }

    /// Builds an episode from bare costs and log-probabilities.
    pub fn from_costs(costs: &[f64], log_probs: &[f64]) -> Result<Self> {
        let empty = Tour { visit_order: vec![], walk: vec![], edges: vec![], log_selection_prob: 0.0, cost: 0.0 };
        Self::new(
            costs
                .iter()
                .zip(log_probs)
                .map(|(&cost, &lp)| AntRecord { tour: empty.clone(), cost, log_selection_prob: lp })
                .collect(),
        )
    }
}

fn clamped(log_p: f64) -> Option<f64> {
    (log_p >= LOG_PROB_FLOOR).then_some(log_p)
}

/// `(1/n) * sum_i |C_i - C_avg| * log2(1 + p_i)`.
pub fn carl_loss(episode: &Episode) -> f64 {
    let n = episode.records.len() as f64;
    episode
        .records
        .iter()
        .map(|r| {
            let dev = (r.cost - episode.cost_avg).abs();
            clamped(r.log_selection_prob).map_or(0.0, |lp| dev * lp.exp().ln_1p() / std::f64::consts::LN_2)
        })
        .sum::<f64>()
        / n
}

/// Derivative of [`carl_loss`] with respect to each ant's log-probability.
pub fn carl_log_prob_weights(episode: &Episode) -> Vec<f64> {
    let scale = 1.0 / (episode.records.len() as f64 * std::f64::consts::LN_2);
    episode
        .records
        .iter()
        .map(|r| {
            let dev = (r.cost - episode.cost_avg).abs();
            clamped(r.log_selection_prob).map_or(0.0, |lp| {
                let p = lp.exp();
                scale * dev * p / (1.0 + p)
            })
        })
        .collect()
}

/// Gradient of [`carl_loss`] with respect to the heuristic field the
/// episode was sampled under. Only the sampled transitions carry gradient.
pub fn carl_eta_gradient(
    instance: &WarehouseInstance,
    episode: &Episode,
    tau: &PheromoneField,
    eta: &HeuristicField,
    params: &AcoParams,
) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; instance.n_edges()];
    if params.beta == 0.0 {
        return Ok(grad);
    }
    for (record, w) in episode.records.iter().zip(carl_log_prob_weights(episode)) {
        if w == 0.0 {
            continue;
        }
        for (moves, chosen) in replay_steps(instance, &record.tour, tau, eta, params)? {
            for (k, m) in moves.iter().enumerate() {
                let indicator = if k == chosen { 1.0 } else { 0.0 };
                grad[m.edge] += w * params.beta * (indicator - m.prob) / eta.eta[m.edge];
            }
        }
    }
    Ok(grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InstanceFamily {
    /// Random points in the unit cube with a k-nearest-neighbor graph.
    Tsp { min_nodes: usize, max_nodes: usize, k_neighbors: usize },
    /// Generated warehouses of a fixed layout with a varying cargo count.
    Warehouse { aisles: usize, slots: usize, levels: usize, min_cargo: usize, max_cargo: usize },
}

impl Default for InstanceFamily {
    fn default() -> Self {
        Self::Tsp { min_nodes: 20, max_nodes: 50, k_neighbors: 10 }
    }
}

impl InstanceFamily {
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Result<WarehouseInstance> {
        match *self {
            Self::Tsp { min_nodes, max_nodes, k_neighbors } => {
                if min_nodes < 2 || min_nodes > max_nodes {
                    return Err(Error::InvalidParameter(format!("bad node range {min_nodes}..={max_nodes}")));
                }
                let n = rng.gen_range(min_nodes..=max_nodes);
                gen_tsp_instance(n, rng.gen(), k_neighbors.min(n - 1))
            }
            Self::Warehouse { aisles, slots, levels, min_cargo, max_cargo } => {
                if min_cargo < 1 || min_cargo > max_cargo {
                    return Err(Error::InvalidParameter(format!("bad cargo range {min_cargo}..={max_cargo}")));
                }
                let c = rng.gen_range(min_cargo..=max_cargo);
                gen_warehouse_instance(aisles, slots, levels, c, rng.gen())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub instances_per_epoch: usize,
    pub family: InstanceFamily,
    /// When positive, instances are drawn from a fixed pool of this size.
    pub pool_size: usize,
    pub learning_rate: f64,
    pub clip_norm: f64,
    pub optimizer: Optimizer,
    /// Denominator floor of the Adam update.
    pub adam_eps: f64,
    pub aco: AcoParams,
    pub heuristic_weights: HeuristicWeights,
    pub model: ModelConfig,
    pub seed: u64,
    /// Save a checkpoint every this many epochs; 0 disables.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            instances_per_epoch: 4,
            family: InstanceFamily::default(),
            pool_size: 0,
            learning_rate: 1e-3,
            clip_norm: 1.0,
            optimizer: Optimizer::Sgd,
            adam_eps: 1e-8,
            aco: AcoParams { n_ants: 10, n_iterations: 5, ..AcoParams::default() },
            heuristic_weights: HeuristicWeights::default(),
            model: ModelConfig::default(),
            seed: 0,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.epochs == 0 || self.instances_per_epoch == 0 {
            return bad("epochs and instances_per_epoch must be >= 1");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be >= 0");
        }
        if !(self.clip_norm > 0.0) {
            return bad("clip_norm must be > 0");
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps must be > 0");
        }
        self.aco.validate()?;
        self.heuristic_weights.validate()?;
        self.model.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Result of one training rollout on one instance.
#[derive(Debug, Clone)]
pub struct Rollout {
    /// Sum of episode losses.
    pub loss_sum: f64,
    pub n_episodes: usize,
    /// Sum of episode loss gradients.
    pub grad: ModelParams,
    pub best_cost: f64,
    pub best_con: f64,
    pub stats: Vec<BatchStats>,
    /// Every sampled visit order, in sampling order.
    pub tours: Vec<Vec<usize>>,
}

/// Runs a fresh colony on `instance` guided by `params` in train mode and
/// accumulates the loss and its gradient over every iteration.
pub fn rollout(
    instance: &WarehouseInstance,
    params: &ModelParams,
    aco: &AcoParams,
    weights: &HeuristicWeights,
) -> Result<Rollout> {
    aco.validate()?;
    let cost = CostModel::expert(instance, weights, aco.delta)?;
    let mut tau = PheromoneField::for_instance(instance);
    let mut traffic = TrafficState::new(instance);
    let mut previous = traffic.clone();
    let mut grad = params.zeros_like();
    let mut out = Rollout {
        loss_sum: 0.0,
        n_episodes: 0,
        grad: params.zeros_like(),
        best_cost: f64::INFINITY,
        best_con: 0.0,
        stats: Vec::new(),
        tours: Vec::new(),
    };
    let mut best_edges = Vec::new();
    for it in 0..aco.n_iterations {
        let prediction = forward(instance, &previous, params, Mode::Train)?;
        let eta = prediction.field()?;
        traffic.reset();
        let builder = TourBuilder::new(instance, &tau, &eta, &cost, aco);
        let mut tours = Vec::with_capacity(aco.n_ants);
        for ant in 0..aco.n_ants {
            tours.push(builder.build(&mut traffic, &mut ant_rng(aco.seed, it, ant, aco.n_ants))?);
        }
        for t in &tours {
            if t.cost < out.best_cost {
                out.best_cost = t.cost;
                best_edges.clone_from(&t.edges);
            }
            out.tours.push(t.visit_order.clone());
        }
        let next_tau = pheromone_update(&tau, &tours, aco)?;
        let episode = Episode::from_tours(tours)?;
        out.loss_sum += carl_loss(&episode);
        out.n_episodes += 1;
        let upstream = carl_eta_gradient(instance, &episode, &tau, &eta, aco)?;
        if upstream.iter().any(|&g| g != 0.0) {
            let g = backward(&prediction, &upstream, params)?;
            grad.add_scaled(&g, 1.0)?;
        }
        out.stats.push(prediction.batch_stats()?);
        tau = next_tau;
        previous.clone_from(&traffic);
    }
    out.best_con = cost.congestion_of_edges(instance, &best_edges, &traffic);
    out.grad = grad;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub mean_best_cost: f64,
    pub mean_con: f64,
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub history: Vec<EpochLog>,
}

impl TrainOutcome {
    pub fn losses(&self) -> Vec<f64> {
        self.history.iter().map(|h| h.mean_loss).collect()
    }
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Trains a freshly initialized model.
pub fn train(config: &TrainConfig, checkpoint: Option<&Path>) -> Result<TrainOutcome> {
    config.validate()?;
    train_from(config, ModelParams::new(config.model.clone())?, checkpoint)
}

/// Trains starting from `params`.
pub fn train_from(config: &TrainConfig, mut params: ModelParams, checkpoint: Option<&Path>) -> Result<TrainOutcome> {
    config.validate()?;
    params.check_shapes()?;
    let start = Instant::now();
    let pool: Vec<WarehouseInstance> = (0..config.pool_size)
        .map(|i| config.family.sample(&mut stream_rng(config.seed, u64::MAX - i as u64)))
        .collect::<Result<_>>()?;
    let mut adam = AdamState { m: vec![0.0; params.n_trainable()], v: vec![0.0; params.n_trainable()], t: 0 };
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let jobs: Vec<(WarehouseInstance, u64)> = (0..config.instances_per_epoch)
            .map(|i| {
                let stream = (epoch * config.instances_per_epoch + i) as u64;
                let mut rng = stream_rng(config.seed, stream);
                let inst = if pool.is_empty() { config.family.sample(&mut rng)? } else { pool[stream as usize % pool.len()].clone() };
                Ok((inst, rng.gen()))
            })
            .collect::<Result<_>>()?;
        let current = &params;
        let rollouts: Vec<Rollout> = jobs
            .par_iter()
            .map(|(inst, seed)| rollout(inst, current, &AcoParams { seed: *seed, ..config.aco }, &config.heuristic_weights))
            .collect::<Result<_>>()?;

        let n_episodes: usize = rollouts.iter().map(|r| r.n_episodes).sum();
        let mut grad = params.zeros_like();
        let mut loss = 0.0;
        for r in &rollouts {
            grad.add_scaled(&r.grad, 1.0 / n_episodes as f64)?;
            loss += r.loss_sum;
        }
        let mean_loss = loss / n_episodes as f64;
        if !mean_loss.is_finite() || !grad.all_finite() {
            return Err(Error::NonFinite(format!("loss or gradient at epoch {epoch} (loss {mean_loss})")));
        }
        let norm = grad.trainable_norm();
        if norm > config.clip_norm {
            grad.scale_trainable(config.clip_norm / norm);
        }
        match config.optimizer {
            Optimizer::Sgd => params.add_scaled(&grad, -config.learning_rate)?,
            Optimizer::Adam => {
                adam.t += 1;
                let g = grad.trainable_vec();
                let mut theta = params.trainable_vec();
                let c1 = 1.0 - ADAM_BETA1.powi(adam.t);
                let c2 = 1.0 - ADAM_BETA2.powi(adam.t);
                for k in 0..theta.len() {
                    adam.m[k] = ADAM_BETA1 * adam.m[k] + (1.0 - ADAM_BETA1) * g[k];
                    adam.v[k] = ADAM_BETA2 * adam.v[k] + (1.0 - ADAM_BETA2) * g[k] * g[k];
                    theta[k] -= config.learning_rate * (adam.m[k] / c1) / ((adam.v[k] / c2).sqrt() + config.adam_eps);
                }
                params.set_trainable_vec(&theta)?;
            }
        }
        for r in &rollouts {
            for s in &r.stats {
                s.apply(&mut params);
            }
        }

        let k = rollouts.len() as f64;
        history.push(EpochLog {
            epoch,
            mean_loss,
            mean_best_cost: rollouts.iter().map(|r| r.best_cost).sum::<f64>() / k,
            mean_con: rollouts.iter().map(|r| r.best_con).sum::<f64>() / k,
            wall_clock_s: start.elapsed().as_secs_f64(),
        });
        if let Some(path) = checkpoint {
            if config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0 {
                save_checkpoint(&params, path)?;
            }
        }
    }
    Ok(TrainOutcome { params, history })
}

pub fn write_log_csv(path: impl AsRef<Path>, history: &[EpochLog]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in history {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
