//! The two-channel model: a GNN over DRNL one-hot labels, a GNN over
//! semantic embeddings of the same subgraph, attention fusion and the
//! shared classifier.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::fusion::{attention_backward, attention_fuse, joint_loss_with_grad, FusionParams, JointLoss, PairEmbedding};
use super::layers::{Gnn, NormAdj, Parameter};
use super::matrix::Matrix;
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::rng;
use crate::subgraph::{EnclosingSubgraph, MAX_LABEL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Width of the one-hot DRNL input.
    pub label_dim: usize,
    /// Width of the semantic node embeddings.
    pub semantic_dim: usize,
    pub hidden: Vec<usize>,
    /// Pair embedding width `h`.
    pub pair_dim: usize,
    /// Attention hidden width `h'`.
    pub attention_dim: usize,
    /// Include `H[u] ⊙ H[v]` in the readout.
    pub pair_product: bool,
    pub alpha: f64,
    pub beta: f64,
}

impl ModelConfig {
    pub fn with_semantic_dim(semantic_dim: usize) -> Self {
        ModelConfig {
            label_dim: MAX_LABEL,
            semantic_dim,
            hidden: vec![32, 32, 32],
            pair_dim: 32,
            attention_dim: 16,
            pair_product: true,
            alpha: 1.0,
            beta: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.label_dim == 0 || self.semantic_dim == 0 || self.pair_dim == 0 || self.attention_dim == 0 {
            return Err(Error::validation("model widths must be positive"));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::validation("hidden widths must be positive"));
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0) {
            return Err(Error::validation("alpha and beta must be non-negative"));
        }
        Ok(())
    }
}

/// One labelled candidate pair, ready for the model.
#[derive(Debug, Clone)]
pub struct Example {
    pub adj: NormAdj,
    /// Global ids of the subgraph nodes; targets at 0 and 1.
    pub nodes: Vec<usize>,
    /// DRNL label buckets per local node.
    pub labels: Vec<usize>,
    pub y: f64,
}

impl Example {
    pub fn new(sub: &EnclosingSubgraph, y: f64) -> Self {
        Example {
            adj: NormAdj::from_subgraph(sub),
            nodes: sub.nodes.clone(),
            labels: (0..sub.node_count()).map(|i| sub.label_bucket(i)).collect(),
            y,
        }
    }

    pub fn label_features(&self, width: usize) -> Matrix {
        let mut m = Matrix::zeros(self.nodes.len(), width);
        for (i, &l) in self.labels.iter().enumerate() {
            m.set(i, l.min(width - 1), 1.0);
        }
        m
    }

    pub fn semantic_features(&self, emb: &EmbeddingMatrix) -> Matrix {
        let mut m = Matrix::zeros(self.nodes.len(), emb.dim());
        for (i, &g) in self.nodes.iter().enumerate() {
            m.row_mut(i).copy_from_slice(emb.row(g));
        }
        m
    }
}

/// Logits of the three heads for one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelLogits {
    pub topology: f64,
    pub semantic: f64,
    pub fused: f64,
    pub weights: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BsalModel {
    pub config: ModelConfig,
    pub topology: Gnn,
    pub semantic: Gnn,
    pub fusion: FusionParams,
}

impl BsalModel {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut r = rng::named(seed, "init");
        let topology = Gnn::new(config.label_dim, &config.hidden, config.pair_dim, config.pair_product, &mut r);
        let semantic = Gnn::new(config.semantic_dim, &config.hidden, config.pair_dim, config.pair_product, &mut r);
        let mut fusion = FusionParams::new(config.pair_dim, config.attention_dim, &mut r);
        fusion.alpha_loss = config.alpha;
        fusion.beta_loss = config.beta;
        Ok(BsalModel {
            config,
            topology,
            semantic,
            fusion,
        })
    }

    /// Topology GNN, semantic GNN, then fusion parameters.
    pub fn parameters(&self) -> Vec<&Parameter> {
        let mut out = self.topology.parameters();
        out.extend(self.semantic.parameters());
        out.extend(self.fusion.parameters());
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out = self.topology.parameters_mut();
        out.extend(self.semantic.parameters_mut());
        out.extend(self.fusion.parameters_mut());
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|p| p.value.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.parameters()
            .iter()
            .flat_map(|p| p.value.as_slice().iter().copied())
            .collect()
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let mut offset = 0;
        for p in self.parameters_mut() {
            let n = p.value.len();
            p.value.as_mut_slice().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
    }

    fn embed(&self, ex: &Example, semantic: &Matrix) -> Result<(Vec<f64>, Vec<f64>)> {
        let labels = ex.label_features(self.config.label_dim);
        let (z_t, _) = self.topology.forward(&ex.adj, &labels, 0, 1)?;
        let (z_s, _) = self.semantic.forward(&ex.adj, semantic, 0, 1)?;
        Ok((z_t, z_s))
    }

    pub fn pair_embedding(&self, ex: &Example, emb: &EmbeddingMatrix) -> Result<PairEmbedding> {
        let (z_t, z_s) = self.embed(ex, &ex.semantic_features(emb))?;
        attention_fuse(&self.fusion, &z_t, &z_s)
    }

    pub fn predict(&self, ex: &Example, emb: &EmbeddingMatrix) -> Result<ChannelLogits> {
        let pair = self.pair_embedding(ex, emb)?;
        Ok(ChannelLogits {
            topology: self.fusion.logit(&pair.z_t)?,
            semantic: self.fusion.logit(&pair.z_s)?,
            fused: self.fusion.logit(&pair.fused)?,
            weights: pair.weights,
        })
    }

    /// Loss and gradients for one example, with the semantic input given
    /// explicitly. Gradients follow [`BsalModel::parameters`] order; the
    /// last element is `∂L/∂semantic`.
    pub fn loss_and_grad_with_input(&self, ex: &Example, semantic: &Matrix) -> Result<(JointLoss, Vec<Matrix>)> {
        let labels = ex.label_features(self.config.label_dim);
        let (z_t, cache_t) = self.topology.forward(&ex.adj, &labels, 0, 1)?;
        let (z_s, cache_s) = self.semantic.forward(&ex.adj, semantic, 0, 1)?;
        let pair = attention_fuse(&self.fusion, &z_t, &z_s)?;
        let (loss, lg) = joint_loss_with_grad(&pair, ex.y, &self.fusion)?;
        let fg = attention_backward(&self.fusion, &pair, &lg.d_fused);
        let d_z_t: Vec<f64> = lg.d_z_t.iter().zip(&fg.d_z_t).map(|(a, b)| a + b).collect();
        let d_z_s: Vec<f64> = lg.d_z_s.iter().zip(&fg.d_z_s).map(|(a, b)| a + b).collect();
        let (gt, _) = self.topology.backward(&ex.adj, &labels, 0, 1, &cache_t, &d_z_t)?;
        let (gs, d_sem) = self
            .semantic
            .backward(&ex.adj, semantic, 0, 1, &cache_s, &d_z_s)?;
        let mut grads = gt.into_flat();
        grads.extend(gs.into_flat());
        grads.extend([fg.w, fg.b, fg.q, lg.classifier.weight, lg.classifier.bias]);
        grads.push(d_sem);
        Ok((loss, grads))
    }

    pub fn loss_and_grad(&self, ex: &Example, emb: &EmbeddingMatrix) -> Result<(JointLoss, Vec<Matrix>)> {
        let (loss, mut grads) = self.loss_and_grad_with_input(ex, &ex.semantic_features(emb))?;
        grads.pop();
        Ok((loss, grads))
    }

    pub fn zero_grad(&mut self) {
        self.parameters_mut().into_iter().for_each(Parameter::zero_grad);
    }

    pub fn write_checkpoint<W: Write>(&self, mut out: W) -> Result<()> {
        let header = serde_json::to_vec(&self.config)?;
        out.write_all(CHECKPOINT_MAGIC)?;
        out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        out.write_all(&(header.len() as u32).to_le_bytes())?;
        out.write_all(&header)?;
        let params = self.parameters();
        out.write_all(&(params.len() as u32).to_le_bytes())?;
        for p in params {
            out.write_all(&(p.value.rows() as u64).to_le_bytes())?;
            out.write_all(&(p.value.cols() as u64).to_le_bytes())?;
            for x in p.value.as_slice() {
                out.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Format("not a model checkpoint".into()));
        }
        let version = read_u32(&mut input)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let len = read_u32(&mut input)? as usize;
        let mut header = vec![0u8; len];
        input.read_exact(&mut header)?;
        let config: ModelConfig = serde_json::from_slice(&header)?;
        let mut model = BsalModel::new(config, 0)?;
        let count = read_u32(&mut input)? as usize;
        let mut params = model.parameters_mut();
        if count != params.len() {
            return Err(Error::Format(format!(
                "checkpoint has {count} tensors, model expects {}",
                params.len()
            )));
        }
        for p in params.iter_mut() {
            let rows = read_u64(&mut input)? as usize;
            let cols = read_u64(&mut input)? as usize;
            if (rows, cols) != p.value.shape() {
                return Err(Error::Format(format!(
                    "tensor shape {rows}x{cols} does not match {:?}",
                    p.value.shape()
                )));
            }
            for x in p.value.as_mut_slice() {
                *x = f64::from_le_bytes(read_u64(&mut input)?.to_le_bytes());
            }
        }
        Ok(model)
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"BSALCKPT";
const CHECKPOINT_VERSION: u32 = 1;

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::subgraph::{extract_enclosing, SubgraphConfig};

    fn small_config() -> ModelConfig {
        ModelConfig {
            hidden: vec![4, 4],
            pair_dim: 5,
            attention_dim: 3,
            ..ModelConfig::with_semantic_dim(6)
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let model = BsalModel::new(small_config(), 9).unwrap();
        let mut buf = Vec::new();
        model.write_checkpoint(&mut buf).unwrap();
        let back = BsalModel::read_checkpoint(&buf[..]).unwrap();
        assert_eq!(back, model);
        buf[0] = b'X';
        assert!(BsalModel::read_checkpoint(&buf[..]).is_err());
    }

    #[test]
    fn grads_align_with_parameters() {
        let model = BsalModel::new(small_config(), 1).unwrap();
        let g = Graph::from_edges(5, [(0, 2), (2, 1), (1, 3), (3, 4), (0, 4)]).unwrap();
        let sub = extract_enclosing(&g, 0, 1, &SubgraphConfig::default()).unwrap();
        let ex = Example::new(&sub, 1.0);
        let emb = EmbeddingMatrix::new(5, 6, (0..30).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        let (loss, grads) = model.loss_and_grad(&ex, &emb).unwrap();
        assert!(loss.total.is_finite());
        let params = model.parameters();
        assert_eq!(grads.len(), params.len());
        for (g, p) in grads.iter().zip(params) {
            assert_eq!(g.shape(), p.value.shape());
        }
    }

    #[test]
    fn flat_round_trip() {
        let mut model = BsalModel::new(small_config(), 2).unwrap();
        let flat = model.to_flat();
        assert_eq!(flat.len(), model.parameter_count());
        let other = BsalModel::new(small_config(), 3).unwrap();
        model.set_flat(&other.to_flat());
        assert_eq!(model, other);
    }
}
