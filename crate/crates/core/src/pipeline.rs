//! End-to-end runs: semantic graph, semantic embedding, subgraph examples,
//! training and per-channel test evaluation.

use serde::{Deserialize, Serialize};

use crate::embedding::{node2vec, EmbeddingMatrix, SkipGramConfig, WalkConfig};
use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::graph::{Edge, EdgeSplit, FeatureMatrix, Graph, Stage};
use crate::neural::model::{BsalModel, ChannelLogits, Example, ModelConfig};
use crate::neural::train::{predict_all, train, Dataset, TrainConfig, TrainingLog};
use crate::rng;
use crate::semantic::{build_semantic_graph, default_k, SemanticGraphConfig, SimilarityMeasure};
use crate::subgraph::{batch_extract, SubgraphConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsalConfig {
    /// Neighbors per node in the semantic graph; `None` uses the rounded
    /// average degree of the full graph.
    pub k: Option<usize>,
    pub measure: SimilarityMeasure,
    pub walk: WalkConfig,
    pub skipgram: SkipGramConfig,
    pub subgraph: SubgraphConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl BsalConfig {
    /// Defaults with every stage seeded from one master seed.
    pub fn with_seed(seed: u64) -> Self {
        let mut cfg = BsalConfig {
            k: None,
            measure: SimilarityMeasure::EuclideanDistance,
            walk: WalkConfig::default(),
            skipgram: SkipGramConfig::default(),
            subgraph: SubgraphConfig::default(),
            model: ModelConfig::with_semantic_dim(SkipGramConfig::default().dim),
            train: TrainConfig::default(),
        };
        cfg.reseed(seed);
        cfg
    }

    pub fn reseed(&mut self, seed: u64) {
        self.walk.seed = rng::substream(seed, "semantic/walks");
        self.skipgram.seed = rng::substream(seed, "semantic/skipgram");
        self.subgraph.seed = rng::substream(seed, "subgraph");
        self.train.seed = rng::substream(seed, "train");
    }
}

/// Test-set reports for the fused score and each channel alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelReports {
    pub fused: EvalReport,
    pub topology: EvalReport,
    pub semantic: EvalReport,
}

pub struct BsalOutcome {
    pub model: BsalModel,
    pub log: TrainingLog,
    pub semantic_graph: Graph,
    pub semantic_embedding: EmbeddingMatrix,
    pub reports: ChannelReports,
}

/// Semantic graph and its node2vec embedding.
pub fn semantic_embedding(split: &EdgeSplit, features: &FeatureMatrix, cfg: &BsalConfig) -> Result<(Graph, EmbeddingMatrix)> {
    if features.rows() != split.node_count() {
        return Err(Error::validation(format!(
            "feature matrix has {} rows but the graph has {} nodes",
            features.rows(),
            split.node_count()
        )));
    }
    let k = cfg.k.unwrap_or_else(|| default_k(&split.full_graph()));
    let sg = build_semantic_graph(features, &SemanticGraphConfig { k, measure: cfg.measure })?;
    let emb = node2vec(&sg, &cfg.walk, &cfg.skipgram)?;
    Ok((sg, emb))
}

/// Labelled examples for positives then negatives, extracted from `observed`.
pub fn examples(observed: &Graph, pos: &[Edge], neg: &[Edge], cfg: &SubgraphConfig) -> Result<Vec<Example>> {
    let pairs: Vec<Edge> = pos.iter().chain(neg).copied().collect();
    let subs = batch_extract(observed, &pairs, cfg)?;
    Ok(subs
        .iter()
        .enumerate()
        .map(|(i, s)| Example::new(s, if i < pos.len() { 1.0 } else { 0.0 }))
        .collect())
}

/// Channel logits for arbitrary pairs under a trained model.
pub fn score_pairs(
    model: &BsalModel,
    observed: &Graph,
    pairs: &[Edge],
    emb: &EmbeddingMatrix,
    cfg: &SubgraphConfig,
) -> Result<Vec<ChannelLogits>> {
    let ex = examples(observed, pairs, &[], cfg)?;
    predict_all(model, &ex, emb)
}

/// Per-channel reports for one stage.
pub fn channel_reports(
    model: &BsalModel,
    split: &EdgeSplit,
    stage: Stage,
    emb: &EmbeddingMatrix,
    cfg: &SubgraphConfig,
    dataset: &str,
) -> Result<ChannelReports> {
    let pos = score_pairs(model, &split.observed_graph, split.positives(stage), emb, cfg)?;
    let neg = score_pairs(model, &split.observed_graph, split.negatives(stage), emb, cfg)?;
    let pick = |f: fn(&ChannelLogits) -> f64, name: &str| -> Result<EvalReport> {
        let p: Vec<f64> = pos.iter().map(f).collect();
        let n: Vec<f64> = neg.iter().map(f).collect();
        EvalReport::from_scores(name, dataset, stage, split.seed, &p, &n)
    };
    Ok(ChannelReports {
        fused: pick(|l| l.fused, "BSAL")?,
        topology: pick(|l| l.topology, "BSAL-topology")?,
        semantic: pick(|l| l.semantic, "BSAL-semantic")?,
    })
}

/// Full training run on a split.
pub fn run_bsal(split: &EdgeSplit, features: &FeatureMatrix, cfg: &BsalConfig, dataset: &str) -> Result<BsalOutcome> {
    let (semantic_graph, semantic_embedding) = semantic_embedding(split, features, cfg)?;
    let observed = &split.observed_graph;
    let train_ex = examples(observed, &split.train_pos, &split.train_neg, &cfg.subgraph)?;
    let val_ex = examples(observed, &split.val_pos, &split.val_neg, &cfg.subgraph)?;
    let model_cfg = ModelConfig {
        semantic_dim: semantic_embedding.dim(),
        ..cfg.model.clone()
    };
    let trained = train(
        &Dataset {
            train: &train_ex,
            val: &val_ex,
            semantic: &semantic_embedding,
        },
        model_cfg,
        &cfg.train,
    )?;
    let reports = channel_reports(&trained.model, split, Stage::Test, &semantic_embedding, &cfg.subgraph, dataset)?;
    Ok(BsalOutcome {
        model: trained.model,
        log: trained.log,
        semantic_graph,
        semantic_embedding,
        reports,
    })
}

/// Inner-product scores from a node2vec embedding of the observed graph.
pub fn embedding_scores(emb: &EmbeddingMatrix, pairs: &[Edge]) -> Result<Vec<f64>> {
    pairs
        .iter()
        .map(|&(u, v)| {
            if u >= emb.rows() || v >= emb.rows() {
                Err(Error::NodeOutOfRange {
                    id: u.max(v),
                    node_count: emb.rows(),
                })
            } else {
                Ok(emb.dot(u, v))
            }
        })
        .collect()
}
