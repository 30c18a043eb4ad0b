//! Expert heuristic matrix and the congestion-aware path cost.

use super::{edges_along, HeuristicField, HeuristicSource, HeuristicWeights, Tour};
use crate::warehouse::{manhattan_distance, TrafficState, WarehouseInstance};
use crate::{Error, Result};

/// `H = gamma * sc / (d + alpha * size + beta * wt)` per edge, where size and
/// weight of the two endpoints are summed and the special factors averaged.
pub fn expert_heuristic(instance: &WarehouseInstance, w: &HeuristicWeights) -> Result<HeuristicField> {
    w.validate()?;
    let eta = instance
        .edges()
        .iter()
        .map(|e| {
            let (a, b) = (instance.node(e.u), instance.node(e.v));
            let d = manhattan_distance(a, b);
            let size = a.size + b.size;
            let wt = a.weight + b.weight;
            let sc = 0.5 * (a.special + b.special);
            let denom = d + w.alpha_h * size + w.beta_h * wt;
            if denom <= 0.0 {
                return Err(Error::ZeroDenominator { u: e.u, v: e.v });
            }
            Ok(w.gamma_h * sc / denom)
        })
        .collect::<Result<Vec<_>>>()?;
    HeuristicField::new(eta, HeuristicSource::Expert)
}

/// Congestion penalty of one edge: `t * delta * tc / cap`.
pub fn congestion_term(edge: usize, traffic: &TrafficState, delta: f64, capacity: f64) -> f64 {
    traffic.free_flow_time[edge] * delta * (traffic.flow[edge] / capacity)
}

/// The cost model every tour is scored with: expert matrix plus congestion.
#[derive(Debug, Clone)]
pub struct CostModel {
    pub h: HeuristicField,
    pub delta: f64,
}

impl CostModel {
    pub fn expert(instance: &WarehouseInstance, w: &HeuristicWeights, delta: f64) -> Result<Self> {
        Ok(Self { h: expert_heuristic(instance, w)?, delta })
    }

    /// Sum of `1/H + congestion` over an edge sequence.
    pub fn cost_of_edges(&self, instance: &WarehouseInstance, edges: &[usize], traffic: &TrafficState) -> f64 {
        edges
            .iter()
            .map(|&e| 1.0 / self.h.eta[e] + congestion_term(e, traffic, self.delta, instance.edge(e).capacity))
            .sum()
    }

    pub fn congestion_of_edges(&self, instance: &WarehouseInstance, edges: &[usize], traffic: &TrafficState) -> f64 {
        edges
            .iter()
            .map(|&e| congestion_term(e, traffic, self.delta, instance.edge(e).capacity))
            .sum()
    }
}

/// Total cost of `tour.walk`: per travelled edge, `1/H` plus its congestion term.
pub fn path_cost(
    instance: &WarehouseInstance,
    tour: &Tour,
    h: &HeuristicField,
    traffic: &TrafficState,
    delta: f64,
) -> Result<f64> {
    let edges = edges_along(instance, &tour.walk)?;
    let model = CostModel { h: h.clone(), delta };
    Ok(model.cost_of_edges(instance, &edges, traffic))
}

/// Path-level congestion: the congestion term summed over `tour.walk`.
pub fn path_congestion(
    instance: &WarehouseInstance,
    tour: &Tour,
    traffic: &TrafficState,
    delta: f64,
) -> Result<f64> {
    let edges = edges_along(instance, &tour.walk)?;
    Ok(edges
        .iter()
        .map(|&e| congestion_term(e, traffic, delta, instance.edge(e).capacity))
        .sum())
}
