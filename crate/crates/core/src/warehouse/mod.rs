//! Warehouse and TSP instances: cargo nodes, undirected edges with capacities,
//! and the per-edge traffic state used by the congestion term.

mod generate;

use std::collections::{BTreeSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use generate::{
    gen_tsp_instance, gen_tsp_instance_with, gen_warehouse_instance, TspGenConfig,
    DEFAULT_CAPACITY, DEFAULT_K_NEIGHBORS,
};

/// Spatial dimension of every node.
pub const DIMENSION: usize = 3;

/// Current instance file format version.
pub const FORMAT_VERSION: u32 = 1;

/// One cargo item (or waypoint): position plus handling attributes.
///
/// `special` is a multiplicative handling factor in `(0, 1]`; 1 means no
/// special constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cargo {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub size: f64,
    pub weight: f64,
    pub special: f64,
}

impl Cargo {
    /// A waypoint with unit attributes.
    pub fn at(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z, size: 1.0, weight: 1.0, special: 1.0 }
    }

    pub fn coords(&self) -> [f64; DIMENSION] {
        [self.x, self.y, self.z]
    }

    pub fn validate(&self) -> Result<()> {
        if !self.coords().iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidInstance("non-finite coordinate".into()));
        }
        if !(self.size > 0.0 && self.size.is_finite()) {
            return Err(Error::InvalidInstance(format!("size must be > 0, got {}", self.size)));
        }
        if !(self.weight > 0.0 && self.weight.is_finite()) {
            return Err(Error::InvalidInstance(format!(
                "weight must be > 0, got {}",
                self.weight
            )));
        }
        if !(self.special > 0.0 && self.special <= 1.0) {
            return Err(Error::InvalidInstance(format!(
                "special must be in (0, 1], got {}",
                self.special
            )));
        }
        Ok(())
    }
}

/// L1 distance over the three spatial coordinates.
pub fn manhattan_distance(a: &Cargo, b: &Cargo) -> f64 {
    a.coords()
        .iter()
        .zip(b.coords().iter())
        .map(|(p, q)| (p - q).abs())
        .sum()
}

/// An undirected edge. `capacity` counts simultaneous traversals,
/// `free_flow_time` is the uncongested travel time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub capacity: f64,
    pub free_flow_time: f64,
}

impl Edge {
    pub fn other(&self, node: usize) -> usize {
        if node == self.u {
            self.v
        } else {
            self.u
        }
    }
}

/// Whether a route returns to the depot (TSP) or ends at the last pick.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RouteKind {
    #[default]
    Closed,
    Open,
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    version: u32,
    nodes: Vec<Cargo>,
    edges: Vec<Edge>,
    depot: usize,
    #[serde(default)]
    route: RouteKind,
}

/// A validated, immutable routing instance.
#[derive(Debug, Clone, PartialEq)]
pub struct WarehouseInstance {
    nodes: Vec<Cargo>,
    edges: Vec<Edge>,
    depot: usize,
    route: RouteKind,
    /// `(neighbor, edge id)` per node, sorted by neighbor id.
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl WarehouseInstance {
    pub fn new(nodes: Vec<Cargo>, edges: Vec<Edge>, depot: usize, route: RouteKind) -> Result<Self> {
        let n = nodes.len();
        if n < 2 {
            return Err(Error::InvalidInstance(format!("need at least 2 nodes, got {n}")));
        }
        if depot >= n {
            return Err(Error::InvalidInstance(format!("depot {depot} out of range")));
        }
        for c in &nodes {
            c.validate()?;
        }
        let mut seen = BTreeSet::new();
        let mut adjacency = vec![Vec::new(); n];
        for (id, e) in edges.iter().enumerate() {
            if e.u >= n || e.v >= n {
                return Err(Error::InvalidInstance(format!("edge ({}, {}) out of range", e.u, e.v)));
            }
            if e.u == e.v {
                return Err(Error::InvalidInstance(format!("self edge on node {}", e.u)));
            }
            if !seen.insert((e.u.min(e.v), e.u.max(e.v))) {
                return Err(Error::InvalidInstance(format!("duplicate edge ({}, {})", e.u, e.v)));
            }
            if !(e.capacity > 0.0 && e.capacity.is_finite()) {
                return Err(Error::InvalidInstance(format!("edge {id} capacity must be > 0")));
            }
            if !(e.free_flow_time > 0.0 && e.free_flow_time.is_finite()) {
                return Err(Error::InvalidInstance(format!("edge {id} free-flow time must be > 0")));
            }
            adjacency[e.u].push((e.v, id));
            adjacency[e.v].push((e.u, id));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let instance = Self { nodes, edges, depot, route, adjacency };
        if !instance.is_connected() {
            return Err(Error::InvalidInstance("edge set is not connected".into()));
        }
        Ok(instance)
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[Cargo] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &Cargo {
        &self.nodes[i]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> &Edge {
        &self.edges[id]
    }

    pub fn depot(&self) -> usize {
        self.depot
    }

    pub fn route(&self) -> RouteKind {
        self.route
    }

    pub fn with_route(mut self, route: RouteKind) -> Self {
        self.route = route;
        self
    }

    /// `(neighbor, edge id)` pairs, sorted by neighbor.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn edge_between(&self, u: usize, v: usize) -> Option<usize> {
        let list = self.adjacency.get(u)?;
        list.binary_search_by_key(&v, |&(nb, _)| nb).ok().map(|k| list[k].1)
    }

    pub fn edge_length(&self, id: usize) -> f64 {
        let e = &self.edges[id];
        manhattan_distance(&self.nodes[e.u], &self.nodes[e.v])
    }

    pub fn is_complete(&self) -> bool {
        let n = self.n_nodes();
        self.n_edges() == n * (n - 1) / 2
    }

    pub fn is_connected(&self) -> bool {
        let n = self.n_nodes();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == n
    }

    pub fn to_json(&self) -> Result<String> {
        let file = InstanceFile {
            version: FORMAT_VERSION,
            nodes: self.nodes.clone(),
            edges: self.edges.clone(),
            depot: self.depot,
            route: self.route,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text)?;
        if file.version != FORMAT_VERSION {
            return Err(Error::InvalidInstance(format!(
                "unsupported format version {}",
                file.version
            )));
        }
        Self::new(file.nodes, file.edges, file.depot, file.route)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Per-edge traffic: current traversal counts and free-flow travel times.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficState {
    pub flow: Vec<f64>,
    pub free_flow_time: Vec<f64>,
}

impl TrafficState {
    /// Zero flow on every edge of `instance`.
    pub fn new(instance: &WarehouseInstance) -> Self {
        Self {
            flow: vec![0.0; instance.n_edges()],
            free_flow_time: instance.edges().iter().map(|e| e.free_flow_time).collect(),
        }
    }

    pub fn reset(&mut self) {
        self.flow.iter_mut().for_each(|f| *f = 0.0);
    }

    pub fn add_traversal(&mut self, edge: usize) {
        self.flow[edge] += 1.0;
    }

    pub fn validate(&self) -> Result<()> {
        if self.flow.iter().any(|&f| !(f >= 0.0 && f.is_finite())) {
            return Err(Error::InvalidInstance("traffic flow must be finite and >= 0".into()));
        }
        if self.free_flow_time.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::InvalidInstance("free-flow time must be > 0".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> WarehouseInstance {
        let nodes = vec![Cargo::at(0.0, 0.0, 0.0), Cargo::at(1.0, 0.0, 0.0), Cargo::at(0.0, 1.0, 0.0)];
        let edges = vec![
            Edge { u: 0, v: 1, capacity: 20.0, free_flow_time: 1.0 },
            Edge { u: 1, v: 2, capacity: 20.0, free_flow_time: 2.0 },
            Edge { u: 0, v: 2, capacity: 20.0, free_flow_time: 1.0 },
        ];
        WarehouseInstance::new(nodes, edges, 0, RouteKind::Closed).unwrap()
    }

    #[test]
    fn manhattan_examples() {
        let o = Cargo::at(0.0, 0.0, 0.0);
        assert_eq!(manhattan_distance(&o, &Cargo::at(1.0, 2.0, 3.0)), 6.0);
        assert_eq!(manhattan_distance(&Cargo::at(2.0, 2.0, 2.0), &Cargo::at(2.0, 2.0, 2.0)), 0.0);
        assert_eq!(manhattan_distance(&Cargo::at(5.0, 0.0, 1.0), &Cargo::at(1.0, 3.0, 1.0)), 7.0);
    }

    #[test]
    fn cargo_validation() {
        let mut c = Cargo::at(0.0, 0.0, 0.0);
        assert!(c.validate().is_ok());
        c.special = 0.0;
        assert!(c.validate().is_err());
        c.special = 1.0;
        c.size = -1.0;
        assert!(c.validate().is_err());
        c.size = 1.0;
        c.x = f64::NAN;
        assert!(c.validate().is_err());
    }

    #[test]
    fn rejects_malformed_graphs() {
        let nodes = vec![Cargo::at(0.0, 0.0, 0.0), Cargo::at(1.0, 0.0, 0.0), Cargo::at(2.0, 0.0, 0.0)];
        let e = |u, v| Edge { u, v, capacity: 20.0, free_flow_time: 1.0 };
        // disconnected
        assert!(WarehouseInstance::new(nodes.clone(), vec![e(0, 1)], 0, RouteKind::Closed).is_err());
        // self edge
        assert!(WarehouseInstance::new(nodes.clone(), vec![e(0, 1), e(1, 1), e(1, 2)], 0, RouteKind::Closed).is_err());
        // duplicate in either orientation
        assert!(WarehouseInstance::new(nodes.clone(), vec![e(0, 1), e(1, 0), e(1, 2)], 0, RouteKind::Closed).is_err());
        // zero capacity
        let mut bad = e(1, 2);
        bad.capacity = 0.0;
        assert!(WarehouseInstance::new(nodes.clone(), vec![e(0, 1), bad], 0, RouteKind::Closed).is_err());
        // single node
        assert!(WarehouseInstance::new(nodes[..1].to_vec(), vec![], 0, RouteKind::Closed).is_err());
    }

    #[test]
    fn adjacency_lookup() {
        let inst = triangle();
        assert_eq!(inst.edge_between(0, 1), Some(0));
        assert_eq!(inst.edge_between(2, 1), Some(1));
        assert_eq!(inst.edge_between(0, 0), None);
        assert!(inst.is_complete());
        assert_eq!(inst.neighbors(0), &[(1, 0), (2, 2)]);
    }

    #[test]
    fn json_roundtrip_preserves_bits() {
        let mut nodes = triangle().nodes().to_vec();
        nodes[1].x = 0.1 + 0.2;
        nodes[2].size = 1.0 / 3.0;
        let inst = WarehouseInstance::new(nodes, triangle().edges().to_vec(), 0, RouteKind::Open).unwrap();
        let back = WarehouseInstance::from_json(&inst.to_json().unwrap()).unwrap();
        assert_eq!(back, inst);
        assert_eq!(back.node(1).x.to_bits(), (0.1f64 + 0.2).to_bits());
    }

    #[test]
    fn json_rejects_wrong_version() {
        let text = triangle().to_json().unwrap().replace("\"version\": 1", "\"version\": 2");
        assert!(WarehouseInstance::from_json(&text).is_err());
    }

    #[test]
    fn route_defaults_to_closed() {
        let text = r#"{"version":1,"nodes":[{"x":0,"y":0,"z":0,"size":1,"weight":1,"special":1},
            {"x":1,"y":0,"z":0,"size":1,"weight":1,"special":1}],
            "edges":[{"u":0,"v":1,"capacity":20,"free_flow_time":1}],"depot":0}"#;
        let inst = WarehouseInstance::from_json(text).unwrap();
        assert_eq!(inst.route(), RouteKind::Closed);
    }

    #[test]
    fn traffic_starts_empty() {
        let inst = triangle();
        let mut t = TrafficState::new(&inst);
        assert_eq!(t.flow, vec![0.0; 3]);
        assert_eq!(t.free_flow_time, vec![1.0, 2.0, 1.0]);
        t.add_traversal(1);
        t.add_traversal(1);
        assert_eq!(t.flow[1], 2.0);
        t.reset();
        assert_eq!(t.flow[1], 0.0);
    }
}
