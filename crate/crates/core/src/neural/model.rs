//! The full forward pass from an instance to a heuristic field, and its
//! reverse-mode gradient.

use ndarray::{concatenate, s, Array1, Axis};

use super::features::{FeatureBundle, GraphIndex};
use super::layers::{
    bn_update_running, decode_backward, decode_heuristics, embed_backward, embed_inputs, fuse_backward,
    fuse_features, gnn_layer, gnn_layer_backward, DecoderCache, EmbedCache, FusionCache, LayerCache, Mode,
    Neighborhoods,
};
use super::params::ModelParams;
use crate::aco::{HeuristicField, HeuristicGuide, HeuristicSource};
use crate::warehouse::{TrafficState, WarehouseInstance};
use crate::{Error, Result};

/// Added to every decoder output so no heuristic entry is zero.
pub const ETA_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct ForwardCache {
    graph: GraphIndex,
    nbhd: Neighborhoods,
    embed: EmbedCache,
    layers: Vec<LayerCache>,
    fusion: FusionCache,
    decoder: DecoderCache,
}

/// Decoder output per undirected edge, plus what the backward pass needs
/// when the forward ran in train mode.
#[derive(Debug, Clone)]
pub struct HeuristicPrediction {
    pub eta_hat: Vec<f64>,
    pub mode: Mode,
    cache: Option<ForwardCache>,
}

impl HeuristicPrediction {
    pub fn field(&self) -> Result<HeuristicField> {
        HeuristicField::new(self.eta_hat.iter().map(|y| y + ETA_EPSILON).collect(), HeuristicSource::Learned)
    }

    pub fn has_cache(&self) -> bool {
        self.cache.is_some()
    }

    /// Attention rows of the fusion block, aligned with each node's
    /// neighborhood (itself first, then its graph neighbors).
    pub fn attention(&self) -> Option<&[Vec<f64>]> {
        self.cache.as_ref().map(|c| c.fusion.attention.as_slice())
    }

    /// Drops cached activations.
    pub fn into_light(mut self) -> Self {
        self.cache = None;
        self
    }
}

/// Runs the network on `instance` under `traffic`. Train mode uses batch
/// statistics and keeps the activations for [`backward`]; eval mode uses
/// running statistics and does not keep the encoder activations.
pub fn forward(
    instance: &WarehouseInstance,
    traffic: &TrafficState,
    params: &ModelParams,
    mode: Mode,
) -> Result<HeuristicPrediction> {
    let features = FeatureBundle::extract(instance, traffic, &params.config.heuristic_weights)?;
    forward_features(instance, &features, params, mode)
}

pub fn forward_features(
    instance: &WarehouseInstance,
    features: &FeatureBundle,
    params: &ModelParams,
    mode: Mode,
) -> Result<HeuristicPrediction> {
    let graph = GraphIndex::new(instance);
    let eps = params.config.bn_eps;
    let (mut x, mut omega, embed) =
        embed_inputs(&features.node_static, &features.edge_inputs(&graph), &params.embed_node, &params.embed_edge)?;
    let mut layers = Vec::with_capacity(params.layers.len());
    for p in &params.layers {
        let (xn, on, cache) = gnn_layer(&x, &omega, &graph, p, eps, mode)?;
        x = xn;
        omega = on;
        if mode == Mode::Train {
            layers.push(cache);
        }
    }
    let sfm_s = concatenate(Axis(1), &[x.view(), features.node_static.view()])
        .map_err(|e| Error::Shape(e.to_string()))?;
    let nbhd = Neighborhoods::from_graph(&graph, &features.scaled_distance());
    let (z, fusion) = fuse_features(&sfm_s, &features.node_dynamic, &nbhd, &params.fusion)?;
    let (eta_hat, decoder) = decode_heuristics(&z, &omega, &graph, &params.decoder)?;
    if eta_hat.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("decoder output".into()));
    }
    let cache = ForwardCache { graph, nbhd, embed, layers, fusion, decoder };
    Ok(HeuristicPrediction { eta_hat, mode, cache: Some(cache) })
}

/// Gradient of `sum_e upstream[e] * eta_hat[e]` with respect to every
/// trainable entry. Running statistics in the result are meaningless.
pub fn backward(prediction: &HeuristicPrediction, upstream: &[f64], params: &ModelParams) -> Result<ModelParams> {
    let cache = match (&prediction.cache, prediction.mode) {
        (Some(c), Mode::Train) => c,
        _ => return Err(Error::MissingCache),
    };
    if upstream.len() != prediction.eta_hat.len() {
        return Err(Error::Shape(format!(
            "upstream gradient has {} entries for {} edges",
            upstream.len(),
            prediction.eta_hat.len()
        )));
    }
    let mut g = params.zeros_like();
    let graph = &cache.graph;
    let (gz, mut gomega) = decode_backward(upstream, &cache.decoder, graph, &params.decoder, &mut g.decoder);
    let gsfm = fuse_backward(&gz, &cache.fusion, &cache.nbhd, &params.fusion, &mut g.fusion);
    let h = params.config.hidden;
    let mut gx = gsfm.slice(s![.., 0..h]).to_owned();
    for (l, layer_cache) in cache.layers.iter().enumerate().rev() {
        let (a, b) = gnn_layer_backward(&gx, &gomega, layer_cache, graph, &params.layers[l], &mut g.layers[l]);
        gx = a;
        gomega = b;
    }
    embed_backward(&gx, &gomega, &cache.embed, &mut g.embed_node, &mut g.embed_edge);
    if !g.all_finite() {
        return Err(Error::NonFinite("parameter gradient".into()));
    }
    Ok(g)
}

/// Batch means and variances of every normalization in one train-mode pass.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    n_nodes: usize,
    n_directed: usize,
    layers: Vec<[(Array1<f64>, Array1<f64>); 2]>,
}

impl HeuristicPrediction {
    pub fn batch_stats(&self) -> Result<BatchStats> {
        let cache = match (&self.cache, self.mode) {
            (Some(c), Mode::Train) => c,
            _ => return Err(Error::MissingCache),
        };
        let layers = cache
            .layers
            .iter()
            .map(|c| [(c.bn_node.mean.clone(), c.bn_node.var.clone()), (c.bn_edge.mean.clone(), c.bn_edge.var.clone())])
            .collect();
        Ok(BatchStats { n_nodes: cache.graph.n, n_directed: cache.graph.n_directed(), layers })
    }
}

impl BatchStats {
    /// Folds these statistics into the running estimates of `params`.
    pub fn apply(&self, params: &mut ModelParams) {
        let momentum = params.config.bn_momentum;
        for (p, [node, edge]) in params.layers.iter_mut().zip(&self.layers) {
            bn_update_running(&mut p.bn_node, &node.0, &node.1, self.n_nodes, momentum);
            bn_update_running(&mut p.bn_edge, &edge.0, &edge.1, self.n_directed, momentum);
        }
    }
}

/// Folds the batch statistics of a train-mode forward into the running estimates.
pub fn update_running_stats(params: &mut ModelParams, prediction: &HeuristicPrediction) -> Result<()> {
    prediction.batch_stats()?.apply(params);
    Ok(())
}

/// Supplies a colony with learned heuristics, re-evaluated each iteration
/// from the previous iteration's traffic.
pub struct LearnedGuide<'a> {
    pub params: &'a ModelParams,
}

impl HeuristicGuide for LearnedGuide<'_> {
    fn field(&mut self, instance: &WarehouseInstance, previous: &TrafficState, _: usize) -> Result<HeuristicField> {
        predict_field(instance, previous, self.params)
    }
}

/// Convenience: forward in eval mode and return the heuristic field.
pub fn predict_field(
    instance: &WarehouseInstance,
    traffic: &TrafficState,
    params: &ModelParams,
) -> Result<HeuristicField> {
    forward(instance, traffic, params, Mode::Eval)?.field()
}
