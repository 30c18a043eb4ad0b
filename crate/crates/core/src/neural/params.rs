//! Model parameters, their layout and initialization.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{EDGE_INPUT_DIM, EDGE_STATIC_DIM, NODE_DYNAMIC_DIM, NODE_STATIC_DIM};
use crate::aco::HeuristicWeights;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Node and edge embedding width.
    pub hidden: usize,
    pub gnn_layers: usize,
    /// Width of the static and dynamic fusion projections.
    pub fusion_width: usize,
    /// Hidden widths of the decoder; a single sigmoid unit follows.
    pub decoder_hidden: Vec<usize>,
    pub bn_eps: f64,
    pub bn_momentum: f64,
    pub init_sigma: f64,
    pub init_seed: u64,
    /// Weights of the expert heuristic fed in as an edge feature.
    pub heuristic_weights: HeuristicWeights,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            gnn_layers: 12,
            fusion_width: 32,
            decoder_hidden: vec![32, 32],
            bn_eps: 1e-5,
            bn_momentum: 0.1,
            init_sigma: 1.0,
            init_seed: 0,
            heuristic_weights: HeuristicWeights::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.hidden == 0 || self.fusion_width == 0 || self.decoder_hidden.contains(&0) {
            return bad("layer widths must be positive");
        }
        if !(self.bn_eps > 0.0 && self.bn_eps.is_finite()) {
            return bad("bn_eps must be > 0");
        }
        if !(0.0..=1.0).contains(&self.bn_momentum) {
            return bad("bn_momentum must be in [0, 1]");
        }
        if !(self.init_sigma > 0.0 && self.init_sigma.is_finite()) {
            return bad("init_sigma must be > 0");
        }
        self.heuristic_weights.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

impl BatchNorm {
    pub fn new(width: usize) -> Self {
        Self {
            gamma: Array1::ones(width),
            beta: Array1::zeros(width),
            running_mean: Array1::zeros(width),
            running_var: Array1::ones(width),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnnLayerParams {
    /// Self branch of the node update.
    pub w1: Array2<f64>,
    /// Neighbor message, gated by the edge embedding.
    pub w2: Array2<f64>,
    /// Source-node term of the edge update.
    pub w3: Array2<f64>,
    /// Target-node term of the edge update.
    pub w4: Array2<f64>,
    pub we: Array2<f64>,
    pub bn_node: BatchNorm,
    pub bn_edge: BatchNorm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams {
    pub ws: Array2<f64>,
    pub wd: Array2<f64>,
    /// Maps fused outputs back to the embedding width.
    pub squeeze: Array2<f64>,
    /// `ln(sigma)` of the radial kernel, one element.
    pub log_sigma: Array1<f64>,
    /// Slope and offset of the distance bias, one element each.
    pub t_weight: Array1<f64>,
    pub t_bias: Array1<f64>,
}

impl FusionParams {
    pub fn sigma(&self) -> f64 {
        self.log_sigma[0].exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRole {
    Trainable,
    RunningStat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub embed_node: Array2<f64>,
    pub embed_edge: Array2<f64>,
    pub layers: Vec<GnnLayerParams>,
    pub fusion: FusionParams,
    pub decoder: Vec<DenseLayer>,
}

/// A named view of one parameter tensor.
pub struct Block<'a> {
    pub name: String,
    pub role: ParamRole,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
}

pub struct BlockMut<'a> {
    pub name: String,
    pub role: ParamRole,
    pub shape: Vec<usize>,
    pub data: &'a mut [f64],
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let bound = 1.0 / (cols as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-bound..=bound))
}

/// Expands to one `$visit(name, role, shape, data)` call per tensor, in
/// checkpoint order.
macro_rules! tensor_list {
    ($p:expr, $visit:ident, $iter:ident, $slice:ident) => {{
        use ParamRole::{RunningStat as R, Trainable as T};
        macro_rules! t {
            ($name:expr, $role:expr, $a:expr) => {{
                let shape = $a.shape().to_vec();
                $visit($name, $role, shape, $a.$slice().expect("standard layout"))
            }};
        }
        t!("embed.node".to_string(), T, $p.embed_node);
        t!("embed.edge".to_string(), T, $p.embed_edge);
        for (l, layer) in $p.layers.$iter().enumerate() {
            t!(format!("gnn.{l}.w1"), T, layer.w1);
            t!(format!("gnn.{l}.w2"), T, layer.w2);
            t!(format!("gnn.{l}.w3"), T, layer.w3);
            t!(format!("gnn.{l}.w4"), T, layer.w4);
            t!(format!("gnn.{l}.we"), T, layer.we);
            t!(format!("gnn.{l}.bn_node.gamma"), T, layer.bn_node.gamma);
            t!(format!("gnn.{l}.bn_node.beta"), T, layer.bn_node.beta);
            t!(format!("gnn.{l}.bn_node.running_mean"), R, layer.bn_node.running_mean);
            t!(format!("gnn.{l}.bn_node.running_var"), R, layer.bn_node.running_var);
            t!(format!("gnn.{l}.bn_edge.gamma"), T, layer.bn_edge.gamma);
            t!(format!("gnn.{l}.bn_edge.beta"), T, layer.bn_edge.beta);
            t!(format!("gnn.{l}.bn_edge.running_mean"), R, layer.bn_edge.running_mean);
            t!(format!("gnn.{l}.bn_edge.running_var"), R, layer.bn_edge.running_var);
        }
        t!("fusion.ws".to_string(), T, $p.fusion.ws);
        t!("fusion.wd".to_string(), T, $p.fusion.wd);
        t!("fusion.squeeze".to_string(), T, $p.fusion.squeeze);
        t!("fusion.log_sigma".to_string(), T, $p.fusion.log_sigma);
        t!("fusion.t_weight".to_string(), T, $p.fusion.t_weight);
        t!("fusion.t_bias".to_string(), T, $p.fusion.t_bias);
        for (k, layer) in $p.decoder.$iter().enumerate() {
            t!(format!("decoder.{k}.w"), T, layer.w);
            t!(format!("decoder.{k}.b"), T, layer.b);
        }
    }};
}

impl ModelParams {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let h = config.hidden;
        let embed_node = uniform(&mut rng, h, NODE_STATIC_DIM);
        let embed_edge = uniform(&mut rng, h, EDGE_INPUT_DIM);
        let layers = (0..config.gnn_layers)
            .map(|_| GnnLayerParams {
                w1: uniform(&mut rng, h, h),
                w2: uniform(&mut rng, h, h),
                w3: uniform(&mut rng, h, h),
                w4: uniform(&mut rng, h, h),
                we: uniform(&mut rng, h, h),
                bn_node: BatchNorm::new(h),
                bn_edge: BatchNorm::new(h),
            })
            .collect();
        let f = config.fusion_width;
        let fusion = FusionParams {
            ws: uniform(&mut rng, f, h + NODE_STATIC_DIM),
            wd: uniform(&mut rng, f, NODE_DYNAMIC_DIM),
            squeeze: uniform(&mut rng, h, f),
            log_sigma: Array1::from_elem(1, config.init_sigma.ln()),
            t_weight: Array1::zeros(1),
            t_bias: Array1::zeros(1),
        };
        let mut decoder = Vec::new();
        let mut fan_in = 3 * h;
        for &width in config.decoder_hidden.iter().chain(std::iter::once(&1)) {
            let w = uniform(&mut rng, width, fan_in);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let b = Array1::from_shape_simple_fn(width, || rng.gen_range(-bound..=bound));
            decoder.push(DenseLayer { w, b });
            fan_in = width;
        }
        Ok(Self { config, embed_node, embed_edge, layers, fusion, decoder })
    }

    /// Same layout with every trainable entry zero and batch-norm stats at their identity values.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.for_each_mut(|b| {
            if b.role == ParamRole::Trainable {
                b.data.fill(0.0);
            }
        });
        z
    }

    /// Every tensor in a fixed order with a stable name.
    pub fn blocks<'a>(&'a self) -> Vec<Block<'a>> {
        let mut out = Vec::new();
        let mut visit = |name: String, role, shape: Vec<usize>, data: &'a [f64]| {
            out.push(Block { name, role, shape, data });
        };
        tensor_list!(self, visit, iter, as_slice);
        out
    }

    /// Visits every tensor mutably, in the same order as [`ModelParams::blocks`].
    pub fn for_each_mut(&mut self, mut f: impl FnMut(BlockMut<'_>)) {
        let mut visit = |name: String, role, shape: Vec<usize>, data: &mut [f64]| {
            f(BlockMut { name, role, shape, data });
        };
        tensor_list!(self, visit, iter_mut, as_slice_mut);
    }

    /// Number of trainable scalars.
    pub fn n_trainable(&self) -> usize {
        self.blocks().iter().filter(|b| b.role == ParamRole::Trainable).map(|b| b.data.len()).sum()
    }

    /// Trainable scalars flattened in block order.
    pub fn trainable_vec(&self) -> Vec<f64> {
        self.blocks()
            .iter()
            .filter(|b| b.role == ParamRole::Trainable)
            .flat_map(|b| b.data.iter().copied())
            .collect()
    }

    /// Overwrites the trainable scalars from a flat vector in block order.
    pub fn set_trainable_vec(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.n_trainable() {
            return Err(Error::Shape(format!("expected {} values, got {}", self.n_trainable(), values.len())));
        }
        let mut offset = 0;
        self.for_each_mut(|b| {
            if b.role == ParamRole::Trainable {
                b.data.copy_from_slice(&values[offset..offset + b.data.len()]);
                offset += b.data.len();
            }
        });
        Ok(())
    }

    /// `self += scale * other` over trainable entries.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) -> Result<()> {
        let delta = other.trainable_vec();
        let mut current = self.trainable_vec();
        if delta.len() != current.len() {
            return Err(Error::Shape("parameter layouts differ".into()));
        }
        for (c, d) in current.iter_mut().zip(&delta) {
            *c += scale * d;
        }
        self.set_trainable_vec(&current)
    }

    pub fn scale_trainable(&mut self, factor: f64) {
        self.for_each_mut(|b| {
            if b.role == ParamRole::Trainable {
                b.data.iter_mut().for_each(|v| *v *= factor);
            }
        });
    }

    /// Euclidean norm over trainable entries.
    pub fn trainable_norm(&self) -> f64 {
        self.trainable_vec().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.data.iter().all(|v| v.is_finite()))
    }

    /// Zeroes every weight through which traffic reaches the output: the
    /// dynamic fusion projection and the flow column of the edge embedding.
    pub fn zero_dynamic_weights(&mut self) {
        self.fusion.wd.fill(0.0);
        self.embed_edge.column_mut(EDGE_STATIC_DIM).fill(0.0);
    }

    /// Checks that every tensor has the shape implied by `config`.
    pub fn check_shapes(&self) -> Result<()> {
        let reference = ModelParams::new(self.config.clone())?;
        let ours = self.blocks();
        let theirs = reference.blocks();
        if ours.len() != theirs.len() {
            return Err(Error::Shape(format!("expected {} blocks, found {}", theirs.len(), ours.len())));
        }
        for (a, b) in ours.iter().zip(&theirs) {
            if a.name != b.name || a.shape != b.shape {
                return Err(Error::Shape(format!("block {} has shape {:?}, expected {:?}", a.name, a.shape, b.shape)));
            }
        }
        if !self.all_finite() {
            return Err(Error::NonFinite("model parameters".into()));
        }
        Ok(())
    }
}
