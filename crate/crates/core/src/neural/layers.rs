//! Encoder, fusion and decoder blocks, each with a hand-derived backward pass.

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};

use super::features::GraphIndex;
use super::params::{BatchNorm, DenseLayer, FusionParams, GnnLayerParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

pub fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

pub fn silu(u: f64) -> f64 {
    u * sigmoid(u)
}

pub fn silu_grad(u: f64) -> f64 {
    let s = sigmoid(u);
    s * (1.0 + u * (1.0 - s))
}

fn check_cols(a: &Array2<f64>, cols: usize, what: &str) -> Result<()> {
    if a.ncols() != cols {
        return Err(Error::Shape(format!("{what}: expected {cols} columns, got {}", a.ncols())));
    }
    Ok(())
}

/// `SiLU(input · Wᵀ)` row by row; returns the activation and the pre-activation.
pub fn silu_linear(input: &Array2<f64>, w: &Array2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
    check_cols(input, w.ncols(), "linear input")?;
    let pre = input.dot(&w.t());
    Ok((pre.mapv(silu), pre))
}

#[derive(Debug, Clone)]
pub struct EmbedCache {
    pub node_in: Array2<f64>,
    pub edge_in: Array2<f64>,
    pub node_pre: Array2<f64>,
    pub edge_pre: Array2<f64>,
}

/// Projects raw node and edge inputs to the hidden width.
pub fn embed_inputs(
    node_in: &Array2<f64>,
    edge_in: &Array2<f64>,
    w_node: &Array2<f64>,
    w_edge: &Array2<f64>,
) -> Result<(Array2<f64>, Array2<f64>, EmbedCache)> {
    let (x, node_pre) = silu_linear(node_in, w_node)?;
    let (omega, edge_pre) = silu_linear(edge_in, w_edge)?;
    let cache = EmbedCache { node_in: node_in.clone(), edge_in: edge_in.clone(), node_pre, edge_pre };
    Ok((x, omega, cache))
}

pub fn embed_backward(
    gx: &Array2<f64>,
    gomega: &Array2<f64>,
    cache: &EmbedCache,
    g_node: &mut Array2<f64>,
    g_edge: &mut Array2<f64>,
) {
    let gpre = gx * &cache.node_pre.mapv(silu_grad);
    *g_node += &gpre.t().dot(&cache.node_in);
    let gpre = gomega * &cache.edge_pre.mapv(silu_grad);
    *g_edge += &gpre.t().dot(&cache.edge_in);
}

#[derive(Debug, Clone)]
pub struct BnCache {
    pub xhat: Array2<f64>,
    pub inv_std: Array1<f64>,
    /// Output before the activation.
    pub y: Array2<f64>,
    pub mean: Array1<f64>,
    /// Biased batch variance.
    pub var: Array1<f64>,
    pub mode: Mode,
}

pub fn bn_forward(h: &Array2<f64>, bn: &BatchNorm, eps: f64, mode: Mode) -> BnCache {
    let (mean, var) = match mode {
        Mode::Train => {
            let mean = h.mean_axis(Axis(0)).expect("non-empty batch");
            let var = h.var_axis(Axis(0), 0.0);
            (mean, var)
        }
        Mode::Eval => (bn.running_mean.clone(), bn.running_var.clone()),
    };
    let inv_std = var.mapv(|v| 1.0 / (v + eps).sqrt());
    let xhat = (h - &mean) * &inv_std;
    let y = &xhat * &bn.gamma + &bn.beta;
    BnCache { xhat, inv_std, y, mean, var, mode }
}

/// Returns the gradient with respect to the batch input and accumulates the
/// scale and shift gradients. Differentiates through the batch statistics.
pub fn bn_backward(gy: &Array2<f64>, cache: &BnCache, bn: &BatchNorm, g: &mut BatchNorm) -> Array2<f64> {
    let n = gy.nrows() as f64;
    g.beta += &gy.sum_axis(Axis(0));
    g.gamma += &(gy * &cache.xhat).sum_axis(Axis(0));
    let gxhat = gy * &bn.gamma;
    let sum_g = gxhat.sum_axis(Axis(0));
    let sum_gx = (&gxhat * &cache.xhat).sum_axis(Axis(0));
    let mut gh = gxhat * n - &sum_g - &(&cache.xhat * &sum_gx);
    gh *= &(&cache.inv_std / n);
    gh
}

/// Folds batch statistics into the running estimates (unbiased variance).
pub fn bn_update_running(bn: &mut BatchNorm, mean: &Array1<f64>, var: &Array1<f64>, batch: usize, momentum: f64) {
    let unbias = if batch > 1 { batch as f64 / (batch as f64 - 1.0) } else { 1.0 };
    bn.running_mean = &bn.running_mean * (1.0 - momentum) + mean * momentum;
    bn.running_var = &bn.running_var * (1.0 - momentum) + &(var * (unbias * momentum));
}

fn gather(a: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    a.select(Axis(0), idx)
}

fn scatter_add(rows: usize, g: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((rows, g.ncols()));
    for (r, &i) in idx.iter().enumerate() {
        let mut dst = out.row_mut(i);
        dst += &g.row(r);
    }
    out
}

#[derive(Debug, Clone)]
pub struct LayerCache {
    pub x: Array2<f64>,
    pub omega: Array2<f64>,
    pub x2: Array2<f64>,
    pub bn_node: BnCache,
    pub bn_edge: BnCache,
}

/// One residual message-passing layer over directed edges.
pub fn gnn_layer(
    x: &Array2<f64>,
    omega: &Array2<f64>,
    graph: &GraphIndex,
    p: &GnnLayerParams,
    eps: f64,
    mode: Mode,
) -> Result<(Array2<f64>, Array2<f64>, LayerCache)> {
    let h = p.w1.nrows();
    check_cols(x, h, "node embedding")?;
    check_cols(omega, h, "edge embedding")?;
    if x.nrows() != graph.n || omega.nrows() != graph.n_directed() {
        return Err(Error::Shape(format!(
            "embeddings have {}x{} rows, graph has {} nodes and {} directed edges",
            x.nrows(),
            omega.nrows(),
            graph.n,
            graph.n_directed()
        )));
    }
    if let Some(i) = graph.out.iter().position(|o| o.is_empty()) {
        return Err(Error::IsolatedNode(i));
    }
    let x1 = x.dot(&p.w1.t());
    let x2 = x.dot(&p.w2.t());
    let x3 = x.dot(&p.w3.t());
    let x4 = x.dot(&p.w4.t());

    let mut hn = x1;
    for (i, out) in graph.out.iter().enumerate() {
        let inv = 1.0 / out.len() as f64;
        let mut row = hn.row_mut(i);
        for &d in out {
            Zip::from(&mut row)
                .and(omega.row(d))
                .and(x2.row(graph.dst[d]))
                .for_each(|r, &w, &m| *r += inv * w * m);
        }
    }
    let bn_node = bn_forward(&hn, &p.bn_node, eps, mode);
    let x_new = x + &bn_node.y.mapv(silu);

    let he = omega.dot(&p.we.t()) + gather(&x3, &graph.src) + gather(&x4, &graph.dst);
    let bn_edge = bn_forward(&he, &p.bn_edge, eps, mode);
    let omega_new = omega + &bn_edge.y.mapv(silu);

    let cache = LayerCache { x: x.clone(), omega: omega.clone(), x2, bn_node, bn_edge };
    Ok((x_new, omega_new, cache))
}

/// Returns gradients with respect to the layer inputs and accumulates
/// parameter gradients into `g`.
pub fn gnn_layer_backward(
    gx_out: &Array2<f64>,
    gomega_out: &Array2<f64>,
    cache: &LayerCache,
    graph: &GraphIndex,
    p: &GnnLayerParams,
    g: &mut GnnLayerParams,
) -> (Array2<f64>, Array2<f64>) {
    let n = graph.n;
    let gyn = gx_out * &cache.bn_node.y.mapv(silu_grad);
    let ghn = bn_backward(&gyn, &cache.bn_node, &p.bn_node, &mut g.bn_node);

    let mut gomega = gomega_out.clone();
    let mut gx2 = Array2::<f64>::zeros(cache.x2.raw_dim());
    for (i, out) in graph.out.iter().enumerate() {
        let inv = 1.0 / out.len() as f64;
        let gi = ghn.row(i);
        for &d in out {
            let j = graph.dst[d];
            Zip::from(gomega.row_mut(d)).and(gi).and(cache.x2.row(j)).for_each(|o, &a, &m| *o += inv * a * m);
            Zip::from(gx2.row_mut(j)).and(gi).and(cache.omega.row(d)).for_each(|o, &a, &w| *o += inv * a * w);
        }
    }

    let gye = gomega_out * &cache.bn_edge.y.mapv(silu_grad);
    let ghe = bn_backward(&gye, &cache.bn_edge, &p.bn_edge, &mut g.bn_edge);
    gomega += &ghe.dot(&p.we);
    g.we += &ghe.t().dot(&cache.omega);
    let gx3 = scatter_add(n, &ghe, &graph.src);
    let gx4 = scatter_add(n, &ghe, &graph.dst);

    let gx1 = &ghn;
    g.w1 += &gx1.t().dot(&cache.x);
    g.w2 += &gx2.t().dot(&cache.x);
    g.w3 += &gx3.t().dot(&cache.x);
    g.w4 += &gx4.t().dot(&cache.x);
    let gx = gx_out + &gx1.dot(&p.w1) + &gx2.dot(&p.w2) + &gx3.dot(&p.w3) + &gx4.dot(&p.w4);
    (gx, gomega)
}

/// Fusion neighborhoods: each node's graph neighbors plus itself, with the
/// scaled distance to each member.
#[derive(Debug, Clone)]
pub struct Neighborhoods {
    pub members: Vec<Vec<(usize, f64)>>,
}

impl Neighborhoods {
    pub fn from_graph(graph: &GraphIndex, scaled_distance: &Array1<f64>) -> Self {
        let members = graph
            .out
            .iter()
            .enumerate()
            .map(|(i, out)| {
                let mut m: Vec<(usize, f64)> = vec![(i, 0.0)];
                m.extend(out.iter().map(|&d| (graph.dst[d], scaled_distance[d / 2])));
                m
            })
            .collect();
        Self { members }
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&s| (s - m).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}

#[derive(Debug, Clone)]
pub struct FusionCache {
    pub sfm_s: Array2<f64>,
    pub sfm_d: Array2<f64>,
    pub qs: Array2<f64>,
    pub o: Array2<f64>,
    /// Attention weights aligned with `Neighborhoods::members`.
    pub attention: Vec<Vec<f64>>,
    pub sq_dist: Vec<Vec<f64>>,
}

/// Radial-kernel attention over static projections, added to the dynamic
/// projection, then squeezed back to the embedding width.
pub fn fuse_features(
    sfm_s: &Array2<f64>,
    sfm_d: &Array2<f64>,
    nbhd: &Neighborhoods,
    p: &FusionParams,
) -> Result<(Array2<f64>, FusionCache)> {
    check_cols(sfm_s, p.ws.ncols(), "static fusion input")?;
    check_cols(sfm_d, p.wd.ncols(), "dynamic fusion input")?;
    let n = sfm_s.nrows();
    if sfm_d.nrows() != n || nbhd.members.len() != n {
        return Err(Error::Shape("fusion inputs disagree on node count".into()));
    }
    if nbhd.members.iter().any(|m| m.is_empty()) {
        return Err(Error::Empty("fusion neighborhood"));
    }
    let sigma = p.sigma();
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma must be > 0, got {sigma}")));
    }
    let qs = sfm_s.dot(&p.ws.t());
    let mut o = sfm_d.dot(&p.wd.t());
    let inv_two_var = 0.5 / (sigma * sigma);
    let mut attention = Vec::with_capacity(n);
    let mut sq_dist = Vec::with_capacity(n);
    for (i, members) in nbhd.members.iter().enumerate() {
        let dist: Vec<f64> = members
            .iter()
            .map(|&(j, _)| Zip::from(qs.row(i)).and(qs.row(j)).fold(0.0, |acc, &a, &b| acc + (a - b) * (a - b)))
            .collect();
        let logits: Vec<f64> = members
            .iter()
            .zip(&dist)
            .map(|(&(_, dhat), &d2)| -d2 * inv_two_var + p.t_weight[0] * dhat + p.t_bias[0])
            .collect();
        let a = softmax(&logits);
        let mut row = o.row_mut(i);
        for (&(j, _), &aij) in members.iter().zip(&a) {
            row.scaled_add(aij, &qs.row(j));
        }
        attention.push(a);
        sq_dist.push(dist);
    }
    let z = o.dot(&p.squeeze.t());
    let cache = FusionCache { sfm_s: sfm_s.clone(), sfm_d: sfm_d.clone(), qs, o, attention, sq_dist };
    Ok((z, cache))
}

/// Returns the gradient with respect to `sfm_s`; the dynamic input is data.
pub fn fuse_backward(
    gz: &Array2<f64>,
    cache: &FusionCache,
    nbhd: &Neighborhoods,
    p: &FusionParams,
    g: &mut FusionParams,
) -> Array2<f64> {
    g.squeeze += &gz.t().dot(&cache.o);
    let go = gz.dot(&p.squeeze);
    g.wd += &go.t().dot(&cache.sfm_d);

    let sigma = p.sigma();
    let inv_var = 1.0 / (sigma * sigma);
    let qs = &cache.qs;
    let mut gqs = Array2::<f64>::zeros(qs.raw_dim());
    let (mut g_ls, mut g_tw, mut g_tb) = (0.0, 0.0, 0.0);
    for (i, members) in nbhd.members.iter().enumerate() {
        let a = &cache.attention[i];
        let goi = go.row(i);
        let ga: Vec<f64> = members.iter().map(|&(j, _)| goi.dot(&qs.row(j))).collect();
        let mean: f64 = a.iter().zip(&ga).map(|(x, y)| x * y).sum();
        for (k, &(j, dhat)) in members.iter().enumerate() {
            gqs.row_mut(j).scaled_add(a[k], &goi);
            let gs = a[k] * (ga[k] - mean);
            if i != j && gs != 0.0 {
                let diff = &qs.row(i) - &qs.row(j);
                gqs.row_mut(i).scaled_add(-gs * inv_var, &diff);
                gqs.row_mut(j).scaled_add(gs * inv_var, &diff);
            }
            g_ls += gs * cache.sq_dist[i][k] * inv_var;
            g_tw += gs * dhat;
            g_tb += gs;
        }
    }
    g.log_sigma[0] += g_ls;
    g.t_weight[0] += g_tw;
    g.t_bias[0] += g_tb;
    g.ws += &gqs.t().dot(&cache.sfm_s);
    gqs.dot(&p.ws)
}

#[derive(Debug, Clone)]
pub struct DecoderCache {
    /// Input of every dense layer, starting with the concatenated edge rows.
    pub inputs: Vec<Array2<f64>>,
    pub pre: Vec<Array2<f64>>,
    /// Sigmoid output per directed edge.
    pub y_directed: Array1<f64>,
}

/// Per-edge MLP over `[z_src, z_dst, omega]`; the two directions of an
/// undirected edge are averaged.
pub fn decode_heuristics(
    z: &Array2<f64>,
    omega: &Array2<f64>,
    graph: &GraphIndex,
    decoder: &[DenseLayer],
) -> Result<(Vec<f64>, DecoderCache)> {
    let h = z.ncols();
    if omega.ncols() != h || omega.nrows() != graph.n_directed() || z.nrows() != graph.n {
        return Err(Error::Shape("decoder inputs disagree with the graph".into()));
    }
    let first = decoder.first().ok_or(Error::Empty("decoder layers"))?;
    if first.w.ncols() != 3 * h {
        return Err(Error::Shape(format!("decoder expects {} inputs, edges supply {}", first.w.ncols(), 3 * h)));
    }
    if decoder.last().map(|l| l.w.nrows()) != Some(1) {
        return Err(Error::Shape("decoder must end in a single unit".into()));
    }
    let m = graph.n_directed();
    let mut input = Array2::zeros((m, 3 * h));
    input.slice_mut(s![.., 0..h]).assign(&gather(z, &graph.src));
    input.slice_mut(s![.., h..2 * h]).assign(&gather(z, &graph.dst));
    input.slice_mut(s![.., 2 * h..]).assign(omega);

    let mut inputs = Vec::with_capacity(decoder.len());
    let mut pre = Vec::with_capacity(decoder.len());
    let mut act = input;
    for (k, layer) in decoder.iter().enumerate() {
        check_cols(&act, layer.w.ncols(), "decoder layer")?;
        let u = act.dot(&layer.w.t()) + &layer.b;
        let next = if k + 1 == decoder.len() { u.mapv(sigmoid) } else { u.mapv(silu) };
        inputs.push(act);
        pre.push(u);
        act = next;
    }
    let y_directed = act.column(0).to_owned();
    let y = (0..graph.n_undirected()).map(|e| 0.5 * (y_directed[2 * e] + y_directed[2 * e + 1])).collect();
    Ok((y, DecoderCache { inputs, pre, y_directed }))
}

/// Returns gradients with respect to the node inputs and edge embeddings.
pub fn decode_backward(
    gy: &[f64],
    cache: &DecoderCache,
    graph: &GraphIndex,
    decoder: &[DenseLayer],
    g: &mut [DenseLayer],
) -> (Array2<f64>, Array2<f64>) {
    let m = graph.n_directed();
    let mut grad = Array2::from_shape_fn((m, 1), |(d, _)| {
        let y = cache.y_directed[d];
        0.5 * gy[d / 2] * y * (1.0 - y)
    });
    for k in (0..decoder.len()).rev() {
        if k + 1 != decoder.len() {
            grad *= &cache.pre[k].mapv(silu_grad);
        }
        g[k].w += &grad.t().dot(&cache.inputs[k]);
        g[k].b += &grad.sum_axis(Axis(0));
        grad = grad.dot(&decoder[k].w);
    }
    let h = grad.ncols() / 3;
    let view: ArrayView2<f64> = grad.view();
    let gz = scatter_add(graph.n, &view.slice(s![.., 0..h]).to_owned(), &graph.src)
        + scatter_add(graph.n, &view.slice(s![.., h..2 * h]).to_owned(), &graph.dst);
    let gomega = view.slice(s![.., 2 * h..]).to_owned();
    (gz, gomega)
}
