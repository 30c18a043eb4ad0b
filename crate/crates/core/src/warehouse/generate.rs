//! Seeded synthetic instance generators.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{manhattan_distance, Cargo, Edge, RouteKind, WarehouseInstance};
use crate::{Error, Result};

pub const DEFAULT_CAPACITY: f64 = 20.0;
pub const DEFAULT_K_NEIGHBORS: usize = 10;

/// Distance between neighbouring aisles.
const AISLE_PITCH: f64 = 2.0;
/// Distance between neighbouring slots along an aisle.
const SLOT_PITCH: f64 = 1.0;
/// Height of one shelf level.
const LEVEL_HEIGHT: f64 = 1.0;

const MIN_FREE_FLOW_TIME: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TspGenConfig {
    pub n: usize,
    pub seed: u64,
    pub k_neighbors: usize,
    /// Fix z at 0.
    pub planar: bool,
    pub capacity: f64,
}

impl TspGenConfig {
    pub fn new(n: usize, seed: u64, k_neighbors: usize) -> Self {
        Self { n, seed, k_neighbors, planar: false, capacity: DEFAULT_CAPACITY }
    }
}

/// Uniform random points in the unit cube with a k-nearest-neighbor edge set.
pub fn gen_tsp_instance(n: usize, seed: u64, k_neighbors: usize) -> Result<WarehouseInstance> {
    gen_tsp_instance_with(&TspGenConfig::new(n, seed, k_neighbors))
}

pub fn gen_tsp_instance_with(cfg: &TspGenConfig) -> Result<WarehouseInstance> {
    let n = cfg.n;
    if n < 2 {
        return Err(Error::InvalidParameter(format!("n must be >= 2, got {n}")));
    }
    if cfg.k_neighbors == 0 || cfg.k_neighbors >= n {
        return Err(Error::InvalidParameter(format!(
            "k_neighbors must be in 1..{n}, got {}",
            cfg.k_neighbors
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let nodes: Vec<Cargo> = (0..n)
        .map(|_| {
            let x = rng.gen::<f64>();
            let y = rng.gen::<f64>();
            let z = if cfg.planar { 0.0 } else { rng.gen::<f64>() };
            Cargo::at(x, y, z)
        })
        .collect();

    let mut pairs = BTreeSet::new();
    for i in 0..n {
        let mut others: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (manhattan_distance(&nodes[i], &nodes[j]), j))
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in others.iter().take(cfg.k_neighbors) {
            pairs.insert((i.min(j), i.max(j)));
        }
    }
    repair_connectivity(&nodes, &mut pairs);

    let edges = pairs
        .into_iter()
        .map(|(u, v)| Edge {
            u,
            v,
            capacity: cfg.capacity,
            free_flow_time: manhattan_distance(&nodes[u], &nodes[v]).max(MIN_FREE_FLOW_TIME),
        })
        .collect();
    WarehouseInstance::new(nodes, edges, 0, RouteKind::Closed)
}

/// Joins components by repeatedly adding the shortest edge between the
/// component holding node 0 and the rest of the graph.
fn repair_connectivity(nodes: &[Cargo], pairs: &mut BTreeSet<(usize, usize)>) {
    let n = nodes.len();
    loop {
        let mut uf = UnionFind::new(n);
        for &(u, v) in pairs.iter() {
            uf.union(u, v);
        }
        let root = uf.find(0);
        let (inside, outside): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| uf.find(i) == root);
        if outside.is_empty() {
            return;
        }
        let mut best = (f64::INFINITY, 0, 0);
        for &i in &inside {
            for &j in &outside {
                let d = manhattan_distance(&nodes[i], &nodes[j]);
                if d < best.0 {
                    best = (d, i, j);
                }
            }
        }
        pairs.insert((best.1.min(best.2), best.1.max(best.2)));
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[rb.max(ra)] = rb.min(ra);
        }
    }
}

/// Slot address on the shelf grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Slot {
    aisle: usize,
    level: usize,
    pos: usize,
}

/// A shelf grid of `shelves_x` aisles, `shelves_y` slots per aisle and
/// `levels` shelf levels, with `n_cargo` randomly occupied slots.
///
/// Nodes are the depot (grid origin) plus the occupied slots. Consecutive
/// occupied slots in one aisle row are linked; rows are entered from the
/// aisle-end lift column, where the first occupied slot of each level links
/// to the next occupied level of the same aisle, the lowest such entry links
/// across to the next aisle, and the far ends of same-level rows in
/// neighbouring aisles are linked by a back cross-aisle.
pub fn gen_warehouse_instance(
    shelves_x: usize,
    shelves_y: usize,
    levels: usize,
    n_cargo: usize,
    seed: u64,
) -> Result<WarehouseInstance> {
    if shelves_x == 0 || shelves_y == 0 || levels == 0 || n_cargo == 0 {
        return Err(Error::InvalidParameter("grid dimensions and cargo count must be positive".into()));
    }
    let slots = shelves_x * shelves_y * levels;
    if n_cargo > slots {
        return Err(Error::InvalidParameter(format!(
            "{n_cargo} cargo do not fit in {slots} slots"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, slots, n_cargo).into_vec();
    picked.sort_unstable();

    let mut nodes = vec![Cargo::at(0.0, 0.0, 0.0)];
    let mut addr = Vec::with_capacity(n_cargo);
    for flat in picked {
        let aisle = flat / (shelves_y * levels);
        let rem = flat % (shelves_y * levels);
        let level = rem / shelves_y;
        let pos = rem % shelves_y;
        let size = rng.gen_range(0.5..=2.0);
        let weight = rng.gen_range(1.0..=10.0);
        let special = if rng.gen_bool(0.2) { 0.5 } else { 1.0 };
        nodes.push(Cargo {
            x: aisle as f64 * AISLE_PITCH,
            y: (pos + 1) as f64 * SLOT_PITCH,
            z: level as f64 * LEVEL_HEIGHT,
            size,
            weight,
            special,
        });
        addr.push(Slot { aisle, level, pos });
    }

    // rows keyed by (aisle, level), node ids ordered along the aisle
    let mut rows: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (k, s) in addr.iter().enumerate() {
        rows.entry((s.aisle, s.level)).or_default().push(k + 1);
    }
    for row in rows.values_mut() {
        row.sort_by_key(|&id| addr[id - 1].pos);
    }

    let mut pairs = BTreeSet::new();
    let mut link = |a: usize, b: usize| {
        if a != b {
            pairs.insert((a.min(b), a.max(b)));
        }
    };
    for row in rows.values() {
        for w in row.windows(2) {
            link(w[0], w[1]);
        }
    }
    // lift columns: heads of consecutive occupied levels within an aisle
    let mut aisle_entries = Vec::new();
    for aisle in 0..shelves_x {
        let heads: Vec<usize> = (0..levels)
            .filter_map(|l| rows.get(&(aisle, l)).map(|r| r[0]))
            .collect();
        for w in heads.windows(2) {
            link(w[0], w[1]);
        }
        if let Some(&h) = heads.first() {
            aisle_entries.push(h);
        }
    }
    // front cross-aisle, starting at the depot
    let mut prev = 0;
    for &h in &aisle_entries {
        link(prev, h);
        prev = h;
    }
    // back cross-aisle between row tails on the same level
    for level in 0..levels {
        let tails: Vec<usize> = (0..shelves_x)
            .filter_map(|a| rows.get(&(a, level)).map(|r| *r.last().unwrap()))
            .collect();
        for w in tails.windows(2) {
            link(w[0], w[1]);
        }
    }

    let edges = pairs
        .into_iter()
        .map(|(u, v)| Edge {
            u,
            v,
            capacity: DEFAULT_CAPACITY,
            free_flow_time: manhattan_distance(&nodes[u], &nodes[v]).max(MIN_FREE_FLOW_TIME),
        })
        .collect();
    WarehouseInstance::new(nodes, edges, 0, RouteKind::Open)
}
