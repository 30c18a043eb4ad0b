//! Tour construction, pheromone update and the main colony loop.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AcoParams, CostModel, HeuristicField, PheromoneField, Tour};
use crate::warehouse::{RouteKind, TrafficState, WarehouseInstance};
use crate::{Error, Result};

/// One feasible move out of the current node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepChoice {
    pub node: usize,
    pub edge: usize,
    pub prob: f64,
}

#[inline]
fn edge_weight(tau: f64, eta: f64, params: &AcoParams) -> f64 {
    tau.powf(params.alpha) * eta.powf(params.beta)
}

/// Move probabilities `tau^a eta^b / sum` over the unvisited neighbors of `current`.
pub fn transition_probabilities(
    instance: &WarehouseInstance,
    current: usize,
    visited: &[bool],
    tau: &PheromoneField,
    eta: &HeuristicField,
    params: &AcoParams,
) -> Result<Vec<StepChoice>> {
    let weights: Vec<f64> = tau.tau.iter().zip(&eta.eta).map(|(&t, &e)| edge_weight(t, e, params)).collect();
    feasible_moves(instance, current, visited, &weights)
}

fn feasible_moves(
    instance: &WarehouseInstance,
    current: usize,
    visited: &[bool],
    weights: &[f64],
) -> Result<Vec<StepChoice>> {
    let mut moves: Vec<StepChoice> = instance
        .neighbors(current)
        .iter()
        .filter(|(nb, _)| !visited[*nb])
        .map(|&(node, edge)| StepChoice { node, edge, prob: weights[edge] })
        .collect();
    if moves.is_empty() {
        return Err(Error::DeadEnd(current));
    }
    let total: f64 = moves.iter().map(|m| m.prob).sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "transition weights at node {current} sum to {total}"
        )));
    }
    for m in &mut moves {
        m.prob /= total;
    }
    Ok(moves)
}

/// Random stream for one ant in one iteration.
pub(crate) fn ant_rng(seed: u64, iteration: usize, ant: usize, n_ants: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((iteration * n_ants + ant) as u64);
    rng
}

/// Shared per-iteration state for building tours: the combined edge weights
/// and the cost model.
pub struct TourBuilder<'a> {
    instance: &'a WarehouseInstance,
    cost: &'a CostModel,
    weights: Vec<f64>,
}

impl<'a> TourBuilder<'a> {
    pub fn new(
        instance: &'a WarehouseInstance,
        tau: &PheromoneField,
        eta: &HeuristicField,
        cost: &'a CostModel,
        params: &AcoParams,
    ) -> Self {
        let weights = tau.tau.iter().zip(&eta.eta).map(|(&t, &e)| edge_weight(t, e, params)).collect();
        Self { instance, cost, weights }
    }

    /// Samples one tour from the depot. Flow is added to `traffic` on every
    /// edge as it is travelled; the tour is costed with the traffic present
    /// once it is complete.
    pub fn build<R: Rng>(&self, traffic: &mut TrafficState, rng: &mut R) -> Result<Tour> {
        let inst = self.instance;
        let n = inst.n_nodes();
        let depot = inst.depot();
        let mut visited = vec![false; n];
        visited[depot] = true;
        let mut visit_order = vec![depot];
        let mut walk = vec![depot];
        let mut edges = Vec::with_capacity(n);
        let mut log_prob = 0.0;

        while visit_order.len() < n {
            let current = *walk.last().unwrap();
            match feasible_moves(inst, current, &visited, &self.weights) {
                Ok(moves) => {
                    let u: f64 = rng.gen();
                    let mut acc = 0.0;
                    let mut pick = moves[moves.len() - 1];
                    for m in &moves {
                        acc += m.prob;
                        if u < acc {
                            pick = *m;
                            break;
                        }
                    }
                    log_prob += pick.prob.ln();
                    visited[pick.node] = true;
                    visit_order.push(pick.node);
                    walk.push(pick.node);
                    edges.push(pick.edge);
                    traffic.add_traversal(pick.edge);
                }
                Err(Error::DeadEnd(_)) => {
                    let (target, path) = self.detour(current, |v| !visited[v])?;
                    for w in path.windows(2) {
                        let e = inst.edge_between(w[0], w[1]).unwrap();
                        walk.push(w[1]);
                        edges.push(e);
                        traffic.add_traversal(e);
                    }
                    visited[target] = true;
                    visit_order.push(target);
                }
                Err(e) => return Err(e),
            }
        }

        if inst.route() == RouteKind::Closed {
            let current = *walk.last().unwrap();
            if let Some(e) = inst.edge_between(current, depot) {
                walk.push(depot);
                edges.push(e);
                traffic.add_traversal(e);
            } else {
                let (_, path) = self.detour(current, |v| v == depot)?;
                for w in path.windows(2) {
                    let e = inst.edge_between(w[0], w[1]).unwrap();
                    walk.push(w[1]);
                    edges.push(e);
                    traffic.add_traversal(e);
                }
            }
        }

        let cost = self.cost.cost_of_edges(inst, &edges, traffic);
        Ok(Tour { visit_order, walk, edges, log_selection_prob: log_prob, cost })
    }

    /// Cheapest path (by `1/H`) from `from` to the nearest node accepted by
    /// `is_target`. Returns the target and the node path including both ends.
    fn detour(&self, from: usize, is_target: impl Fn(usize) -> bool) -> Result<(usize, Vec<usize>)> {
        let inst = self.instance;
        let n = inst.n_nodes();
        let mut dist = vec![f64::INFINITY; n];
        let mut prev = vec![usize::MAX; n];
        let mut heap = BinaryHeap::new();
        dist[from] = 0.0;
        heap.push(Reverse((OrdF64(0.0), from)));
        while let Some(Reverse((OrdF64(d), u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            if u != from && is_target(u) {
                let mut path = vec![u];
                let mut at = u;
                while at != from {
                    at = prev[at];
                    path.push(at);
                }
                path.reverse();
                return Ok((u, path));
            }
            for &(v, e) in inst.neighbors(u) {
                let nd = d + 1.0 / self.cost.h.eta[e];
                if nd < dist[v] {
                    dist[v] = nd;
                    prev[v] = u;
                    heap.push(Reverse((OrdF64(nd), v)));
                }
            }
        }
        Err(Error::Unreachable { from })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Builds a single tour. See [`TourBuilder::build`].
pub fn construct_tour<R: Rng>(
    instance: &WarehouseInstance,
    tau: &PheromoneField,
    eta: &HeuristicField,
    traffic: &mut TrafficState,
    params: &AcoParams,
    cost: &CostModel,
    rng: &mut R,
) -> Result<Tour> {
    TourBuilder::new(instance, tau, eta, cost, params).build(traffic, rng)
}

/// Evaporates every edge by `1 - rho` and deposits `q / cost` on each edge
/// used by each tour (once per tour).
pub fn pheromone_update(tau: &PheromoneField, tours: &[Tour], params: &AcoParams) -> Result<PheromoneField> {
    let mut next: Vec<f64> = tau.tau.iter().map(|t| (1.0 - params.rho) * t).collect();
    let mut stamp = vec![usize::MAX; next.len()];
    for (k, tour) in tours.iter().enumerate() {
        if !(tour.cost > 0.0 && tour.cost.is_finite()) {
            return Err(Error::NonPositiveCost(tour.cost));
        }
        let deposit = params.q / tour.cost;
        for &e in &tour.edges {
            if stamp[e] != k {
                stamp[e] = k;
                next[e] += deposit;
            }
        }
    }
    // evaporation alone can underflow after very long idle stretches
    for t in &mut next {
        *t = t.max(f64::MIN_POSITIVE);
    }
    Ok(PheromoneField { tau: next })
}

/// Supplies the heuristic field for each colony iteration.
pub trait HeuristicGuide {
    /// `previous` holds the flow of the previous iteration (zero before the first).
    fn field(&mut self, instance: &WarehouseInstance, previous: &TrafficState, iteration: usize) -> Result<HeuristicField>;
}

/// A fixed heuristic field.
pub struct ExpertGuide(pub HeuristicField);

impl HeuristicGuide for ExpertGuide {
    fn field(&mut self, _: &WarehouseInstance, _: &TrafficState, _: usize) -> Result<HeuristicField> {
        Ok(self.0.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationStats {
    pub best: f64,
    pub mean: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub best: Tour,
    /// Congestion of the best tour under the final iteration's traffic.
    pub best_con: f64,
    pub history: Vec<IterationStats>,
    pub final_traffic: TrafficState,
}

/// Runs the colony: each iteration resets the flow, lets every ant build a
/// tour in turn and then updates the pheromone once.
pub fn solve(
    instance: &WarehouseInstance,
    cost: &CostModel,
    guide: &mut dyn HeuristicGuide,
    params: &AcoParams,
) -> Result<SolveResult> {
    params.validate()?;
    let mut tau = PheromoneField::for_instance(instance);
    let mut traffic = TrafficState::new(instance);
    let mut previous = traffic.clone();
    let mut best: Option<Tour> = None;
    let mut history = Vec::with_capacity(params.n_iterations);

    for it in 0..params.n_iterations {
        let eta = guide.field(instance, &previous, it)?;
        traffic.reset();
        let builder = TourBuilder::new(instance, &tau, &eta, cost, params);
        let mut tours = Vec::with_capacity(params.n_ants);
        for ant in 0..params.n_ants {
            let mut rng = ant_rng(params.seed, it, ant, params.n_ants);
            tours.push(builder.build(&mut traffic, &mut rng)?);
        }
        let iter_best = tours.iter().min_by(|a, b| a.cost.total_cmp(&b.cost)).unwrap();
        let mean = tours.iter().map(|t| t.cost).sum::<f64>() / tours.len() as f64;
        history.push(IterationStats { best: iter_best.cost, mean });
        if best.as_ref().is_none_or(|b| iter_best.cost < b.cost) {
            best = Some(iter_best.clone());
        }
        tau = pheromone_update(&tau, &tours, params)?;
        previous.clone_from(&traffic);
    }

    let best = best.unwrap();
    let best_con = cost.congestion_of_edges(instance, &best.edges, &traffic);
    Ok(SolveResult { best, best_con, history, final_traffic: traffic })
}

/// Recomputes the move distribution of every sampled step of `tour`.
///
/// Returns, per sampled step, the feasible moves and the index of the move
/// taken. Dead-end detours are deterministic and contribute no step.
pub fn replay_steps(
    instance: &WarehouseInstance,
    tour: &Tour,
    tau: &PheromoneField,
    eta: &HeuristicField,
    params: &AcoParams,
) -> Result<Vec<(Vec<StepChoice>, usize)>> {
    let weights: Vec<f64> = tau.tau.iter().zip(&eta.eta).map(|(&t, &e)| edge_weight(t, e, params)).collect();
    let mut visited = vec![false; instance.n_nodes()];
    visited[tour.visit_order[0]] = true;
    let mut steps = Vec::with_capacity(tour.visit_order.len());
    for w in tour.visit_order.windows(2) {
        match feasible_moves(instance, w[0], &visited, &weights) {
            Ok(moves) => {
                let k = moves
                    .iter()
                    .position(|m| m.node == w[1])
                    .ok_or(Error::MissingEdge(w[0], w[1]))?;
                steps.push((moves, k));
            }
            Err(Error::DeadEnd(_)) => {}
            Err(e) => return Err(e),
        }
        visited[w[1]] = true;
    }
    Ok(steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aco::{expert_heuristic, HeuristicSource, HeuristicWeights};
    use crate::warehouse::{gen_tsp_instance, gen_warehouse_instance, Cargo, Edge};
    use approx::assert_relative_eq;

    fn star(tau: [f64; 2], eta: [f64; 2]) -> (WarehouseInstance, PheromoneField, HeuristicField) {
        let nodes = vec![Cargo::at(0.0, 0.0, 0.0), Cargo::at(1.0, 0.0, 0.0), Cargo::at(0.0, 1.0, 0.0)];
        let e = |u, v| Edge { u, v, capacity: 20.0, free_flow_time: 1.0 };
        let inst = WarehouseInstance::new(nodes, vec![e(0, 1), e(0, 2)], 0, RouteKind::Open).unwrap();
        let t = PheromoneField { tau: tau.to_vec() };
        let h = HeuristicField::new(eta.to_vec(), HeuristicSource::Expert).unwrap();
        (inst, t, h)
    }

    fn probs(tau: [f64; 2], eta: [f64; 2], alpha: f64, beta: f64) -> Vec<f64> {
        let (inst, t, h) = star(tau, eta);
        let params = AcoParams { alpha, beta, ..Default::default() };
        let visited = [true, false, false];
        transition_probabilities(&inst, 0, &visited, &t, &h, &params)
            .unwrap()
            .iter()
            .map(|m| m.prob)
            .collect()
    }

    #[test]
    fn transition_examples() {
        assert_eq!(probs([1.0, 1.0], [1.0, 1.0], 1.0, 1.0), vec![0.5, 0.5]);
        let p = probs([4.0, 1.0], [1.0, 1.0], 1.0, 0.0);
        assert_relative_eq!(p[0], 0.8, epsilon = 1e-15);
        assert_relative_eq!(p[1], 0.2, epsilon = 1e-15);
        let p = probs([1.0, 1.0], [3.0, 1.0], 1.0, 1.0);
        assert_relative_eq!(p[0], 0.75, epsilon = 1e-15);
        assert_relative_eq!(p[1], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn dead_end_is_reported() {
        let (inst, t, h) = star([1.0, 1.0], [1.0, 1.0]);
        let visited = [true, true, true];
        let r = transition_probabilities(&inst, 0, &visited, &t, &h, &AcoParams::default());
        assert!(matches!(r, Err(Error::DeadEnd(0))));
    }

    fn expert_setup(inst: &WarehouseInstance, delta: f64) -> (CostModel, HeuristicField) {
        let cost = CostModel::expert(inst, &HeuristicWeights::default(), delta).unwrap();
        let h = cost.h.clone();
        (cost, h)
    }

    #[test]
    fn two_node_tour_is_forced() {
        let inst = gen_tsp_instance(2, 5, 1).unwrap();
        let (cost, h) = expert_setup(&inst, 0.0);
        let tau = PheromoneField::for_instance(&inst);
        let mut traffic = TrafficState::new(&inst);
        let mut rng = ant_rng(0, 0, 0, 1);
        let tour = construct_tour(&inst, &tau, &h, &mut traffic, &AcoParams::default(), &cost, &mut rng).unwrap();
        assert_eq!(tour.visit_order, vec![0, 1]);
        assert_eq!(tour.walk, vec![0, 1, 0]);
        assert_eq!(tour.log_selection_prob, 0.0);
        assert_eq!(traffic.flow, vec![2.0]);
    }

    #[test]
    fn collinear_greedy_order_dominates() {
        // nodes at x = 0, 1, 2; eta = 1/d; alpha = 0, beta = 1
        let nodes = vec![Cargo::at(0.0, 0.0, 0.0), Cargo::at(1.0, 0.0, 0.0), Cargo::at(2.0, 0.0, 0.0)];
        let e = |u, v, t| Edge { u, v, capacity: 20.0, free_flow_time: t };
        let inst =
            WarehouseInstance::new(nodes, vec![e(0, 1, 1.0), e(0, 2, 2.0), e(1, 2, 1.0)], 0, RouteKind::Open).unwrap();
        let h = HeuristicField::new(vec![1.0, 0.5, 1.0], HeuristicSource::Expert).unwrap();
        let cost = CostModel { h: h.clone(), delta: 0.0 };
        let tau = PheromoneField::for_instance(&inst);
        let params = AcoParams { alpha: 0.0, beta: 1.0, ..Default::default() };
        // enumerated: order (1, 2) has probability 1 / (1 + 0.5) = 2/3, order (2, 1) has 1/3
        let mut count_12 = 0;
        for ant in 0..3000 {
            let mut t = TrafficState::new(&inst);
            let mut rng = ant_rng(9, 0, ant, 3000);
            let tour = construct_tour(&inst, &tau, &h, &mut t, &params, &cost, &mut rng).unwrap();
            if tour.visit_order == vec![0, 1, 2] {
                count_12 += 1;
                assert_relative_eq!(tour.log_selection_prob, (2.0f64 / 3.0).ln(), epsilon = 1e-12);
            } else {
                assert_relative_eq!(tour.log_selection_prob, (1.0f64 / 3.0).ln(), epsilon = 1e-12);
            }
        }
        let frac = count_12 as f64 / 3000.0;
        assert!(frac >= 0.5 && (frac - 2.0 / 3.0).abs() < 0.03, "{frac}");
    }

    #[test]
    fn tours_are_permutations_and_log_prob_replays() {
        let inst = gen_tsp_instance(25, 4, 4).unwrap();
        let (cost, h) = expert_setup(&inst, 0.5);
        let mut tau = PheromoneField::for_instance(&inst);
        for (i, t) in tau.tau.iter_mut().enumerate() {
            *t = 0.5 + (i % 7) as f64 * 0.3;
        }
        let params = AcoParams { alpha: 1.3, beta: 2.0, ..Default::default() };
        let mut traffic = TrafficState::new(&inst);
        for ant in 0..30 {
            let mut rng = ant_rng(1, 0, ant, 30);
            let tour = construct_tour(&inst, &tau, &h, &mut traffic, &params, &cost, &mut rng).unwrap();
            assert!(tour.is_valid_permutation(&inst));
            assert!(tour.log_selection_prob <= 0.0);
            let steps = replay_steps(&inst, &tour, &tau, &h, &params).unwrap();
            let replayed: f64 = steps.iter().map(|(m, k)| m[*k].prob.ln()).sum();
            assert_relative_eq!(replayed, tour.log_selection_prob, epsilon = 1e-12);
            assert_eq!(*tour.walk.last().unwrap(), 0);
        }
    }

    #[test]
    fn traffic_accumulates_across_ants() {
        let inst = gen_tsp_instance(10, 2, 9).unwrap();
        let (cost, h) = expert_setup(&inst, 0.5);
        let tau = PheromoneField::for_instance(&inst);
        let params = AcoParams::default();
        let mut traffic = TrafficState::new(&inst);
        let mut total_edges = 0;
        for ant in 0..5 {
            let mut rng = ant_rng(3, 0, ant, 5);
            let tour = construct_tour(&inst, &tau, &h, &mut traffic, &params, &cost, &mut rng).unwrap();
            total_edges += tour.edges.len();
            let expect = cost.cost_of_edges(&inst, &tour.edges, &traffic);
            assert_eq!(tour.cost, expect);
        }
        assert_eq!(traffic.flow.iter().sum::<f64>(), total_edges as f64);
    }

    #[test]
    fn sparse_graph_uses_detours() {
        let inst = gen_warehouse_instance(4, 6, 3, 30, 8).unwrap();
        let (cost, h) = expert_setup(&inst, 0.2);
        let tau = PheromoneField::for_instance(&inst);
        let params = AcoParams::default();
        let mut detoured = false;
        for ant in 0..20 {
            let mut traffic = TrafficState::new(&inst);
            let mut rng = ant_rng(4, 0, ant, 20);
            let tour = construct_tour(&inst, &tau, &h, &mut traffic, &params, &cost, &mut rng).unwrap();
            assert!(tour.is_valid_permutation(&inst));
            assert_eq!(tour.edges.len() + 1, tour.walk.len());
            detoured |= tour.walk.len() > tour.visit_order.len();
            let check = crate::aco::path_cost(&inst, &tour, &cost.h, &traffic, 0.2).unwrap();
            assert_relative_eq!(check, tour.cost, epsilon = 1e-12);
        }
        assert!(detoured);
    }

    fn tour_on(edges: Vec<usize>, cost: f64) -> Tour {
        Tour { visit_order: vec![], walk: vec![], edges, log_selection_prob: 0.0, cost }
    }

    #[test]
    fn update_examples() {
        let tau = PheromoneField::uniform(2);
        let params = AcoParams { rho: 0.1, q: 1.0, ..Default::default() };
        let next = pheromone_update(&tau, &[], &params).unwrap();
        assert_eq!(next.tau, vec![0.9, 0.9]);
        let next = pheromone_update(&tau, &[tour_on(vec![0], 4.0)], &params).unwrap();
        assert_relative_eq!(next.tau[0] - 0.9, 0.25, epsilon = 1e-15);
        assert_eq!(next.tau[1], 0.9);
        let next = pheromone_update(&tau, &[tour_on(vec![0], 2.0), tour_on(vec![0, 1], 4.0)], &params).unwrap();
        assert_relative_eq!(next.tau[0] - 0.9, 0.75, epsilon = 1e-15);
        // an edge walked twice by one ant is credited once
        let next = pheromone_update(&tau, &[tour_on(vec![1, 1], 4.0)], &params).unwrap();
        assert_relative_eq!(next.tau[1] - 0.9, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn update_rejects_nonpositive_cost() {
        let tau = PheromoneField::uniform(1);
        let params = AcoParams::default();
        assert!(matches!(
            pheromone_update(&tau, &[tour_on(vec![0], 0.0)], &params),
            Err(Error::NonPositiveCost(_))
        ));
    }

    #[test]
    fn solve_rejects_zero_iterations() {
        let inst = gen_tsp_instance(5, 0, 4).unwrap();
        let (cost, h) = expert_setup(&inst, 0.0);
        let params = AcoParams { n_iterations: 0, ..Default::default() };
        assert!(solve(&inst, &cost, &mut ExpertGuide(h), &params).is_err());
    }

    #[test]
    fn solve_is_deterministic() {
        let inst = gen_tsp_instance(15, 3, 6).unwrap();
        let (cost, h) = expert_setup(&inst, 0.5);
        let params = AcoParams { n_ants: 8, n_iterations: 10, seed: 77, ..Default::default() };
        let a = solve(&inst, &cost, &mut ExpertGuide(h.clone()), &params).unwrap();
        let b = solve(&inst, &cost, &mut ExpertGuide(h), &params).unwrap();
        assert_eq!(a.best, b.best);
        assert_eq!(a.history, b.history);
        assert_eq!(a.best_con.to_bits(), b.best_con.to_bits());
    }

    #[test]
    fn solve_best_is_history_minimum() {
        let inst = gen_tsp_instance(15, 8, 6).unwrap();
        let (cost, h) = expert_setup(&inst, 0.5);
        let params = AcoParams { n_ants: 8, n_iterations: 12, seed: 1, ..Default::default() };
        let r = solve(&inst, &cost, &mut ExpertGuide(h), &params).unwrap();
        let min = r.history.iter().map(|s| s.best).fold(f64::INFINITY, f64::min);
        assert_eq!(r.best.cost, min);
        assert!(r.history.iter().all(|s| s.best <= s.mean));
        let con = cost.congestion_of_edges(&inst, &r.best.edges, &r.final_traffic);
        assert_eq!(r.best_con, con);
    }

    #[test]
    fn zero_delta_cost_is_inverse_heuristic_sum() {
        let inst = gen_tsp_instance(12, 6, 5).unwrap();
        let (cost, h) = expert_setup(&inst, 0.0);
        let params = AcoParams { n_ants: 5, n_iterations: 5, delta: 0.0, ..Default::default() };
        let r = solve(&inst, &cost, &mut ExpertGuide(h.clone()), &params).unwrap();
        let pure: f64 = r.best.edges.iter().map(|&e| 1.0 / h.eta[e]).sum();
        assert_eq!(r.best.cost, pure);
        assert_eq!(r.best_con, 0.0);
    }

    #[test]
    fn expert_heuristic_drives_solver_on_warehouse() {
        let inst = gen_warehouse_instance(5, 5, 2, 20, 3).unwrap();
        let h = expert_heuristic(&inst, &HeuristicWeights::default()).unwrap();
        let cost = CostModel { h: h.clone(), delta: 0.2 };
        let params = AcoParams { n_ants: 5, n_iterations: 5, delta: 0.2, ..Default::default() };
        let r = solve(&inst, &cost, &mut ExpertGuide(h), &params).unwrap();
        assert!(r.best.is_valid_permutation(&inst));
        assert!(r.best_con > 0.0);
    }
}
