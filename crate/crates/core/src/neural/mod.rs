//! Learned heuristic: a residual message-passing encoder over directed
//! edges, radial-kernel fusion of static and traffic features, and a
//! per-edge sigmoid decoder. Gradients are derived by hand.

mod checkpoint;
mod features;
mod layers;
mod model;
mod params;

pub use checkpoint::{from_bytes, load_checkpoint, save_checkpoint, to_bytes, CHECKPOINT_VERSION, MAGIC};
pub use features::{
    FeatureBundle, GraphIndex, EDGE_INPUT_DIM, EDGE_STATIC_DIM, NODE_DYNAMIC_DIM, NODE_STATIC_DIM,
};
pub use layers::{
    bn_backward, bn_forward, decode_backward, decode_heuristics, embed_inputs, fuse_backward, fuse_features,
    gnn_layer, gnn_layer_backward, sigmoid, silu, silu_grad, silu_linear, softmax, BnCache, Mode, Neighborhoods,
};
pub use model::{
    backward, forward, forward_features, predict_field, update_running_stats, BatchStats, HeuristicPrediction,
    LearnedGuide, ETA_EPSILON,
};
pub use params::{BatchNorm, DenseLayer, FusionParams, GnnLayerParams, ModelConfig, ModelParams, ParamRole};
