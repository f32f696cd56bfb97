//! Minibatch training with early stopping on validation AUC.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::model::{BsalModel, ChannelLogits, Example, ModelConfig};
use super::optim::Adam;
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::eval;
use crate::{par, rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            epochs: 400,
            patience: 20,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

/// Training and validation examples plus the semantic embedding they index.
pub struct Dataset<'a> {
    pub train: &'a [Example],
    pub val: &'a [Example],
    pub semantic: &'a EmbeddingMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub alpha: f64,
    pub beta: f64,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_auc: Option<f64>,
    pub stopped_early: bool,
}

pub struct TrainedModel {
    pub model: BsalModel,
    pub log: TrainingLog,
}

/// Channel logits for every example, in order.
pub fn predict_all(model: &BsalModel, examples: &[Example], emb: &EmbeddingMatrix) -> Result<Vec<ChannelLogits>> {
    par::try_map(examples, |_, ex| model.predict(ex, emb))
}

fn fused_auc(model: &BsalModel, examples: &[Example], emb: &EmbeddingMatrix) -> Result<f64> {
    let logits = predict_all(model, examples, emb)?;
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for (ex, l) in examples.iter().zip(&logits) {
        if ex.y == 1.0 {
            pos.push(l.fused);
        } else {
            neg.push(l.fused);
        }
    }
    eval::auc(&pos, &neg)
}

/// Trains a fresh model and returns the checkpoint with the best
/// validation AUC.
///
/// Per-example gradients run in parallel and are summed in example order,
/// so results do not depend on the thread count.
pub fn train(dataset: &Dataset<'_>, model_cfg: ModelConfig, cfg: &TrainConfig) -> Result<TrainedModel> {
    if dataset.train.is_empty() {
        return Err(Error::validation("training set is empty"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::validation("batch size must be positive"));
    }
    let mut model = BsalModel::new(model_cfg, cfg.seed)?;
    let mut opt = Adam::new(cfg.learning_rate);
    let mut order: Vec<usize> = (0..dataset.train.len()).collect();
    let mut shuffle_rng = rng::named(cfg.seed, "shuffle");

    let has_val = dataset.val.iter().any(|e| e.y == 1.0) && dataset.val.iter().any(|e| e.y == 0.0);
    let mut best = model.clone();
    let mut best_auc = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut records = Vec::new();
    let mut stopped_early = false;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let results = par::try_map(batch, |_, &i| model.loss_and_grad(&dataset.train[i], dataset.semantic))?;
            model.zero_grad();
            let scale = 1.0 / batch.len() as f64;
            for (loss, grads) in &results {
                if !loss.total.is_finite() {
                    return Err(Error::Numerical(format!(
                        "non-finite loss at epoch {epoch}, batch {b} (logits {:?})",
                        loss.logits
                    )));
                }
                loss_sum += loss.total;
                for (p, g) in model.parameters_mut().into_iter().zip(grads) {
                    add_scaled(&mut p.grad, g, scale);
                }
            }
            opt.step(&mut model.parameters_mut());
            if model.parameters().iter().any(|p| !p.value.is_finite()) {
                return Err(Error::Numerical(format!(
                    "parameter update produced non-finite values at epoch {epoch}, batch {b}"
                )));
            }
        }
        let train_loss = loss_sum / dataset.train.len() as f64;
        let val_auc = if has_val {
            Some(fused_auc(&model, dataset.val, dataset.semantic)?)
        } else {
            None
        };
        records.push(EpochRecord {
            epoch,
            train_loss,
            val_auc,
        });
        if val_auc.is_none_or(|a| a > best_auc) {
            best_auc = val_auc.unwrap_or(best_auc);
            best_epoch = epoch;
            best = model.clone();
        } else if epoch - best_epoch >= cfg.patience {
            stopped_early = true;
            break;
        }
    }

    Ok(TrainedModel {
        log: TrainingLog {
            alpha: best.config.alpha,
            beta: best.config.beta,
            epochs: records,
            best_epoch,
            best_val_auc: has_val.then_some(best_auc),
            stopped_early,
        },
        model: best,
    })
}

fn add_scaled(acc: &mut Matrix, g: &Matrix, s: f64) {
    for (a, x) in acc.as_mut_slice().iter_mut().zip(g.as_slice()) {
        *a += s * x;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::subgraph::{extract_enclosing, SubgraphConfig};

    fn toy() -> (Vec<Example>, EmbeddingMatrix) {
        // Two triangles joined by a bridge; positives close a triangle,
        // negatives span the bridge.
        let g = Graph::from_edges(8, [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (5, 7), (3, 5)]).unwrap();
        let cfg = SubgraphConfig::default();
        let mut out = Vec::new();
        for (u, v, y) in [(0, 1, 1.0), (5, 6, 1.0), (6, 7, 1.0), (0, 7, 0.0), (1, 6, 0.0), (0, 4, 0.0)] {
            out.push(Example::new(&extract_enclosing(&g, u, v, &cfg).unwrap(), y));
        }
        let emb = EmbeddingMatrix::new(8, 4, (0..32).map(|i| ((i * 13 % 7) as f64 - 3.0) / 10.0).collect()).unwrap();
        (out, emb)
    }

    fn small_cfg() -> ModelConfig {
        ModelConfig {
            hidden: vec![8, 8],
            pair_dim: 8,
            attention_dim: 4,
            ..ModelConfig::with_semantic_dim(4)
        }
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let (ex, emb) = toy();
        let ds = Dataset {
            train: &[],
            val: &ex,
            semantic: &emb,
        };
        assert!(train(&ds, small_cfg(), &TrainConfig::default()).is_err());
    }

    #[test]
    fn frozen_validation_stops_after_patience() {
        let (ex, emb) = toy();
        let ds = Dataset {
            train: &ex,
            val: &ex,
            semantic: &emb,
        };
        let cfg = TrainConfig {
            learning_rate: 0.0,
            patience: 5,
            batch_size: 2,
            ..Default::default()
        };
        let out = train(&ds, small_cfg(), &cfg).unwrap();
        assert!(out.log.stopped_early);
        assert_eq!(out.log.best_epoch, 1);
        assert_eq!(out.log.epochs.len(), 1 + 5);
    }

    #[test]
    fn training_is_deterministic() {
        let (ex, emb) = toy();
        let ds = Dataset {
            train: &ex,
            val: &ex,
            semantic: &emb,
        };
        let cfg = TrainConfig {
            epochs: 5,
            batch_size: 4,
            seed: 3,
            ..Default::default()
        };
        let a = train(&ds, small_cfg(), &cfg).unwrap();
        let b = train(&ds, small_cfg(), &cfg).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.log, b.log);
    }
}
