//! Static and dynamic input features, and the directed view of the graph the
//! network runs on.

use ndarray::{Array1, Array2};

use crate::aco::{expert_heuristic, HeuristicWeights};
use crate::warehouse::{TrafficState, WarehouseInstance};
use crate::Result;

pub const NODE_STATIC_DIM: usize = 6;
pub const NODE_DYNAMIC_DIM: usize = 3;
pub const EDGE_STATIC_DIM: usize = 3;
/// Edge input width: the static columns followed by the flow ratio.
pub const EDGE_INPUT_DIM: usize = EDGE_STATIC_DIM + 1;

/// Directed edges of an undirected instance. Undirected edge `e` becomes
/// `2e` (u -> v) and `2e + 1` (v -> u).
#[derive(Debug, Clone)]
pub struct GraphIndex {
    pub n: usize,
    pub src: Vec<usize>,
    pub dst: Vec<usize>,
    /// Directed edge ids leaving each node.
    pub out: Vec<Vec<usize>>,
}

impl GraphIndex {
    pub fn new(instance: &WarehouseInstance) -> Self {
        let n = instance.n_nodes();
        let m = 2 * instance.n_edges();
        let mut src = Vec::with_capacity(m);
        let mut dst = Vec::with_capacity(m);
        let mut out = vec![Vec::new(); n];
        for (e, edge) in instance.edges().iter().enumerate() {
            src.extend([edge.u, edge.v]);
            dst.extend([edge.v, edge.u]);
            out[edge.u].push(2 * e);
            out[edge.v].push(2 * e + 1);
        }
        Self { n, src, dst, out }
    }

    pub fn n_directed(&self) -> usize {
        self.src.len()
    }

    pub fn n_undirected(&self) -> usize {
        self.src.len() / 2
    }
}

/// Model inputs for one instance under one traffic state.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBundle {
    /// Per node: x, y, z, size, weight, special, min-max scaled per instance.
    pub node_static: Array2<f64>,
    /// Per node: mean and max flow/capacity over incident edges, depot flag.
    pub node_dynamic: Array2<f64>,
    /// Per edge: distance, expert heuristic and capacity, each divided by its maximum.
    pub edge_static: Array2<f64>,
    /// Per edge: flow / capacity.
    pub edge_dynamic: Array1<f64>,
}

impl FeatureBundle {
    pub fn extract(instance: &WarehouseInstance, traffic: &TrafficState, weights: &HeuristicWeights) -> Result<Self> {
        traffic.validate()?;
        let n = instance.n_nodes();
        let ne = instance.n_edges();

        let mut node_static = Array2::zeros((n, NODE_STATIC_DIM));
        for (i, c) in instance.nodes().iter().enumerate() {
            for (k, v) in [c.x, c.y, c.z, c.size, c.weight, c.special].into_iter().enumerate() {
                node_static[[i, k]] = v;
            }
        }
        for mut col in node_static.columns_mut() {
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let span = hi - lo;
            col.mapv_inplace(|v| if span > 0.0 { (v - lo) / span } else { 0.0 });
        }

        let ratio: Vec<f64> = instance
            .edges()
            .iter()
            .enumerate()
            .map(|(e, edge)| traffic.flow[e] / edge.capacity)
            .collect();
        let mut node_dynamic = Array2::zeros((n, NODE_DYNAMIC_DIM));
        for i in 0..n {
            let nb = instance.neighbors(i);
            if !nb.is_empty() {
                let sum: f64 = nb.iter().map(|&(_, e)| ratio[e]).sum();
                let max = nb.iter().map(|&(_, e)| ratio[e]).fold(0.0, f64::max);
                node_dynamic[[i, 0]] = sum / nb.len() as f64;
                node_dynamic[[i, 1]] = max;
            }
            node_dynamic[[i, 2]] = if i == instance.depot() { 1.0 } else { 0.0 };
        }

        let h = expert_heuristic(instance, weights)?;
        let mut edge_static = Array2::zeros((ne, EDGE_STATIC_DIM));
        for e in 0..ne {
            edge_static[[e, 0]] = instance.edge_length(e);
            edge_static[[e, 1]] = h.eta[e];
            edge_static[[e, 2]] = instance.edge(e).capacity;
        }
        for mut col in edge_static.columns_mut() {
            let hi = col.iter().copied().fold(0.0, f64::max);
            col.mapv_inplace(|v| if hi > 0.0 { v / hi } else { 0.0 });
        }

        Ok(Self { node_static, node_dynamic, edge_static, edge_dynamic: Array1::from(ratio) })
    }

    /// Distance divided by the instance's largest edge length, per undirected edge.
    pub fn scaled_distance(&self) -> Array1<f64> {
        self.edge_static.column(0).to_owned()
    }

    /// Edge input rows, one per directed edge.
    pub fn edge_inputs(&self, graph: &GraphIndex) -> Array2<f64> {
        let m = graph.n_directed();
        let mut out = Array2::zeros((m, EDGE_INPUT_DIM));
        for d in 0..m {
            let e = d / 2;
            for k in 0..EDGE_STATIC_DIM {
                out[[d, k]] = self.edge_static[[e, k]];
            }
            out[[d, EDGE_STATIC_DIM]] = self.edge_dynamic[e];
        }
        out
    }
}
