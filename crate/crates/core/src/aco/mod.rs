//! Ant colony optimization over warehouse instances.
//!
//! Costs always come from the expert heuristic matrix plus the congestion
//! term; the heuristic field that guides the ants may be the same expert
//! matrix or a learned one.

mod colony;
mod cost;

use serde::{Deserialize, Serialize};

use crate::warehouse::WarehouseInstance;
use crate::{Error, Result};

pub use colony::{
    construct_tour, pheromone_update, replay_steps, solve, transition_probabilities, ExpertGuide, HeuristicGuide,
    IterationStats, SolveResult, StepChoice, TourBuilder,
};
pub(crate) use colony::ant_rng;
pub use cost::{congestion_term, expert_heuristic, path_congestion, path_cost, CostModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcoParams {
    /// Pheromone exponent.
    pub alpha: f64,
    /// Heuristic exponent.
    pub beta: f64,
    /// Evaporation rate in (0, 1).
    pub rho: f64,
    /// Deposit constant.
    pub q: f64,
    pub n_ants: usize,
    pub n_iterations: usize,
    /// Congestion adjustment.
    pub delta: f64,
    pub seed: u64,
}

impl Default for AcoParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 2.0,
            rho: 0.1,
            q: 1.0,
            n_ants: 20,
            n_iterations: 50,
            delta: 0.5,
            seed: 0,
        }
    }
}

impl AcoParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be >= 0, got {}", self.alpha));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be >= 0, got {}", self.beta));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad(format!("rho must be in (0, 1), got {}", self.rho));
        }
        if !(self.q > 0.0 && self.q.is_finite()) {
            return bad(format!("q must be > 0, got {}", self.q));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return bad(format!("delta must be >= 0, got {}", self.delta));
        }
        if self.n_ants == 0 {
            return bad("n_ants must be >= 1".into());
        }
        if self.n_iterations == 0 {
            return bad("n_iterations must be >= 1".into());
        }
        Ok(())
    }
}

/// Weights of the expert heuristic: size, weight and special-handling terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeuristicWeights {
    pub alpha_h: f64,
    pub beta_h: f64,
    pub gamma_h: f64,
}

impl Default for HeuristicWeights {
    fn default() -> Self {
        Self { alpha_h: 0.1, beta_h: 0.1, gamma_h: 1.0 }
    }
}

impl HeuristicWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_h >= 0.0 && self.beta_h >= 0.0 && self.gamma_h > 0.0)
            || !(self.alpha_h.is_finite() && self.beta_h.is_finite() && self.gamma_h.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "heuristic weights need alpha_h, beta_h >= 0 and gamma_h > 0, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Per-edge pheromone, strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct PheromoneField {
    pub tau: Vec<f64>,
}

impl PheromoneField {
    pub const INITIAL: f64 = 1.0;

    pub fn uniform(n_edges: usize) -> Self {
        Self { tau: vec![Self::INITIAL; n_edges] }
    }

    pub fn for_instance(instance: &WarehouseInstance) -> Self {
        Self::uniform(instance.n_edges())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeuristicSource {
    Expert,
    Learned,
}

/// Per-edge heuristic desirability, strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicField {
    pub eta: Vec<f64>,
    pub source: HeuristicSource,
}

impl HeuristicField {
    pub fn new(eta: Vec<f64>, source: HeuristicSource) -> Result<Self> {
        if let Some(bad) = eta.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(format!("heuristic entries must be finite and > 0, got {bad}")));
        }
        Ok(Self { eta, source })
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { eta: self.eta.iter().map(|v| v * c).collect(), source: self.source }
    }
}

/// A constructed route.
///
/// `visit_order` lists every node once, starting at the depot. `walk` is the
/// node sequence actually travelled, including shortest-path detours out of
/// dead ends and, for closed routes, the return to the depot; `edges` are the
/// edge ids along `walk`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tour {
    pub visit_order: Vec<usize>,
    pub walk: Vec<usize>,
    pub edges: Vec<usize>,
    /// Natural log of the product of the sampled transition probabilities.
    pub log_selection_prob: f64,
    pub cost: f64,
}

impl Tour {
    /// Builds a tour that walks `visit_order` directly (every consecutive pair,
    /// plus the closing pair for closed routes, must be an edge).
    pub fn from_order(instance: &WarehouseInstance, visit_order: Vec<usize>) -> Result<Self> {
        let mut walk = visit_order.clone();
        if instance.route() == crate::warehouse::RouteKind::Closed {
            walk.push(visit_order[0]);
        }
        let edges = edges_along(instance, &walk)?;
        Ok(Self { visit_order, walk, edges, log_selection_prob: 0.0, cost: 0.0 })
    }

    /// True when `visit_order` is a permutation of all nodes starting at the depot.
    pub fn is_valid_permutation(&self, instance: &WarehouseInstance) -> bool {
        let n = instance.n_nodes();
        if self.visit_order.len() != n || self.visit_order.first() != Some(&instance.depot()) {
            return false;
        }
        let mut seen = vec![false; n];
        for &v in &self.visit_order {
            if v >= n || seen[v] {
                return false;
            }
            seen[v] = true;
        }
        true
    }
}

/// Edge ids along a node walk; errors on a missing edge.
pub fn edges_along(instance: &WarehouseInstance, walk: &[usize]) -> Result<Vec<usize>> {
    walk.windows(2)
        .map(|w| instance.edge_between(w[0], w[1]).ok_or(Error::MissingEdge(w[0], w[1])))
        .collect()
}
