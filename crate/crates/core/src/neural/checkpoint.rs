//! Binary checkpoints.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! b"NAHC"  u32 version  u32 block_count
//! per block:  u32 name_len  name (UTF-8)  u32 rank  u64 dim * rank
//! per block, same order:  f32 values, row-major
//! ```
//!
//! The last block, `meta.config`, holds the batch-norm epsilon and momentum
//! and the expert heuristic weights used for the edge features.

use std::path::Path;

use super::params::{ModelConfig, ModelParams};
use crate::aco::HeuristicWeights;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"NAHC";
pub const CHECKPOINT_VERSION: u32 = 1;
const META_BLOCK: &str = "meta.config";

struct RawBlock {
    name: String,
    shape: Vec<usize>,
    values: Vec<f32>,
}

fn meta_values(config: &ModelConfig) -> Vec<f64> {
    let w = &config.heuristic_weights;
    vec![config.bn_eps, config.bn_momentum, w.alpha_h, w.beta_h, w.gamma_h]
}

pub fn to_bytes(params: &ModelParams) -> Vec<u8> {
    let mut blocks: Vec<(String, Vec<usize>, Vec<f64>)> =
        params.blocks().into_iter().map(|b| (b.name, b.shape, b.data.to_vec())).collect();
    let meta = meta_values(&params.config);
    blocks.push((META_BLOCK.to_string(), vec![meta.len()], meta));

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(blocks.len() as u32).to_le_bytes());
    for (name, shape, _) in &blocks {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for &d in shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
    }
    for (_, _, values) in &blocks {
        for &v in values {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

fn parse(bytes: &[u8]) -> Result<Vec<RawBlock>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4).ok() != Some(MAGIC.as_slice()) {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let count = r.u32()? as usize;
    let mut manifest = Vec::new();
    let mut total: usize = 0;
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Checkpoint("block name is not UTF-8".into()))?
            .to_string();
        let rank = r.u32()? as usize;
        let mut shape = Vec::with_capacity(rank.min(8));
        for _ in 0..rank {
            shape.push(usize::try_from(r.u64()?).map_err(|_| Error::Checkpoint("dimension overflow".into()))?);
        }
        let numel = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| Error::Checkpoint(format!("block {name} is too large")))?;
        total = total.checked_add(numel).ok_or_else(|| Error::Checkpoint("size overflow".into()))?;
        manifest.push((name, shape, numel));
    }
    let expected = total.checked_mul(4).and_then(|b| b.checked_add(r.pos));
    if expected != Some(bytes.len()) {
        return Err(Error::Checkpoint(format!(
            "size mismatch: manifest implies {} bytes, file has {}",
            expected.map_or("overflowing".to_string(), |e| e.to_string()),
            bytes.len()
        )));
    }
    manifest
        .into_iter()
        .map(|(name, shape, numel)| {
            let raw = r.take(numel * 4)?;
            let values = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
            Ok(RawBlock { name, shape, values })
        })
        .collect()
}

fn config_from_blocks(blocks: &[RawBlock]) -> Result<ModelConfig> {
    let find = |name: &str| {
        blocks
            .iter()
            .find(|b| b.name == name)
            .ok_or_else(|| Error::Checkpoint(format!("missing block {name}")))
    };
    let dim0 = |name: &str| -> Result<usize> {
        find(name)?.shape.first().copied().ok_or_else(|| Error::Checkpoint(format!("block {name} has rank 0")))
    };
    let gnn_layers = (0..).take_while(|l| blocks.iter().any(|b| b.name == format!("gnn.{l}.w1"))).count();
    let n_decoder = (0..).take_while(|k| blocks.iter().any(|b| b.name == format!("decoder.{k}.w"))).count();
    if n_decoder == 0 {
        return Err(Error::Checkpoint("no decoder layers".into()));
    }
    let decoder_hidden = (0..n_decoder - 1).map(|k| dim0(&format!("decoder.{k}.w"))).collect::<Result<_>>()?;
    let meta = find(META_BLOCK)?;
    if meta.values.len() != 5 {
        return Err(Error::Checkpoint(format!("{META_BLOCK} must hold 5 values")));
    }
    let m: Vec<f64> = meta.values.iter().map(|&v| v as f64).collect();
    Ok(ModelConfig {
        hidden: dim0("embed.node")?,
        gnn_layers,
        fusion_width: dim0("fusion.ws")?,
        decoder_hidden,
        bn_eps: m[0],
        bn_momentum: m[1],
        heuristic_weights: HeuristicWeights { alpha_h: m[2], beta_h: m[3], gamma_h: m[4] },
        ..ModelConfig::default()
    })
}

pub fn from_bytes(bytes: &[u8]) -> Result<ModelParams> {
    let blocks = parse(bytes)?;
    let config = config_from_blocks(&blocks)?;
    let mut params = ModelParams::new(config).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut tensors = blocks.iter().filter(|b| b.name != META_BLOCK);
    let mut problem = None;
    params.for_each_mut(|dst| {
        if problem.is_some() {
            return;
        }
        match tensors.next() {
            Some(src) if src.name == dst.name && src.shape == dst.shape => {
                for (d, &s) in dst.data.iter_mut().zip(&src.values) {
                    *d = s as f64;
                }
            }
            Some(src) => {
                problem = Some(format!(
                    "block {} {:?} where {} {:?} was expected",
                    src.name, src.shape, dst.name, dst.shape
                ))
            }
            None => problem = Some(format!("missing block {}", dst.name)),
        }
    });
    if let Some(p) = problem {
        return Err(Error::Checkpoint(p));
    }
    if let Some(extra) = tensors.next() {
        return Err(Error::Checkpoint(format!("unexpected block {}", extra.name)));
    }
    if !params.all_finite() {
        return Err(Error::Checkpoint("non-finite parameter values".into()));
    }
    if !(params.fusion.sigma() > 0.0) {
        return Err(Error::Checkpoint("sigma must be positive".into()));
    }
    Ok(params)
}

pub fn save_checkpoint(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_bytes(params))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelParams> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingCheckpoint(Some(path.to_path_buf())),
        _ => Error::Io(e),
    })?;
    from_bytes(&bytes)
}
