//! Semantic topology: a kNN graph over node attributes.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, Graph};
use crate::rng;

/// Pairwise score; larger always means more similar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimilarityMeasure {
    InnerProduct,
    /// `-‖x_i - x_j‖²`
    EuclideanDistance,
    Cosine,
    /// `exp(-‖x_i - x_j‖ / t)`, with the norm unsquared.
    GaussianKernel { t: f64 },
}

impl Default for SimilarityMeasure {
    fn default() -> Self {
        SimilarityMeasure::EuclideanDistance
    }
}

impl SimilarityMeasure {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SimilarityMeasure::GaussianKernel { t } if !(t > 0.0 && t.is_finite()) => {
                Err(Error::validation("gaussian bandwidth t must be positive"))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SimilarityMeasure::InnerProduct => "inner_product",
            SimilarityMeasure::EuclideanDistance => "euclidean",
            SimilarityMeasure::Cosine => "cosine",
            SimilarityMeasure::GaussianKernel { .. } => "gaussian",
        }
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn similarity(x_i: &[f64], x_j: &[f64], measure: SimilarityMeasure) -> Result<f64> {
    if x_i.len() != x_j.len() {
        return Err(Error::shape(format!(
            "similarity between vectors of width {} and {}",
            x_i.len(),
            x_j.len()
        )));
    }
    let dot = || -> f64 { x_i.iter().zip(x_j).map(|(a, b)| a * b).sum() };
    Ok(match measure {
        SimilarityMeasure::InnerProduct => dot(),
        SimilarityMeasure::EuclideanDistance => -squared_distance(x_i, x_j),
        SimilarityMeasure::Cosine => {
            let ni = x_i.iter().map(|a| a * a).sum::<f64>().sqrt();
            let nj = x_j.iter().map(|a| a * a).sum::<f64>().sqrt();
            if ni == 0.0 || nj == 0.0 {
                return Err(Error::validation("cosine similarity of a zero vector"));
            }
            dot() / (ni * nj)
        }
        SimilarityMeasure::GaussianKernel { t } => (-squared_distance(x_i, x_j).sqrt() / t).exp(),
    })
}

/// Average degree `2m/n`, rounded, at least 1.
pub fn default_k(graph: &Graph) -> usize {
    default_k_from_counts(graph.node_count(), graph.edge_count())
}

pub fn default_k_from_counts(node_count: usize, edge_count: usize) -> usize {
    if node_count == 0 {
        return 1;
    }
    ((2 * edge_count) as f64 / node_count as f64).round().max(1.0) as usize
}

/// Median-heuristic bandwidth: the median pairwise Euclidean distance over
/// at most 1000 sampled rows.
pub fn median_bandwidth(features: &FeatureMatrix, seed: u64) -> f64 {
    let n = features.rows();
    let picked: Vec<usize> = if n > 1000 {
        let mut idx = sample(&mut rng::named(seed, "bandwidth"), n, 1000).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..n).collect()
    };
    let mut dists = Vec::with_capacity(picked.len() * picked.len() / 2);
    for (a, &i) in picked.iter().enumerate() {
        for &j in &picked[a + 1..] {
            dists.push(squared_distance(features.row(i), features.row(j)).sqrt());
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    let mid = dists.len() / 2;
    let (_, m, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    if *m > 0.0 {
        *m
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemanticGraphConfig {
    pub k: usize,
    pub measure: SimilarityMeasure,
}

/// Indices of the `k` best-scoring candidates, highest score first and
/// smaller id first among equal scores.
pub(crate) fn top_k(scores: impl Iterator<Item = (usize, f64)>, k: usize) -> Vec<usize> {
    let better = |a: &(usize, f64), b: &(usize, f64)| a.1 > b.1 || (a.1 == b.1 && a.0 < b.0);
    let mut best: Vec<(usize, f64)> = Vec::with_capacity(k + 1);
    for cand in scores {
        if best.len() == k && !better(&cand, best.last().unwrap()) {
            continue;
        }
        let pos = best.partition_point(|b| better(b, &cand));
        best.insert(pos, cand);
        best.truncate(k);
    }
    best.into_iter().map(|(j, _)| j).collect()
}

/// Links every node to its `k` most similar other nodes, then symmetrizes
/// by union. Rows are processed in parallel; the edge set does not depend
/// on scheduling.
pub fn build_semantic_graph(features: &FeatureMatrix, cfg: &SemanticGraphConfig) -> Result<Graph> {
    cfg.measure.validate()?;
    let n = features.rows();
    if cfg.k == 0 {
        return Err(Error::validation("k must be at least 1"));
    }
    if cfg.k >= n {
        return Err(Error::validation(format!(
            "k = {} requires more than {} nodes",
            cfg.k, n
        )));
    }
    if matches!(cfg.measure, SimilarityMeasure::Cosine) {
        if let Some(i) = (0..n).find(|&i| features.row(i).iter().all(|&x| x == 0.0)) {
            return Err(Error::validation(format!("row {i} is zero under cosine similarity")));
        }
    }
    let rows: Vec<Vec<usize>> = crate::par::map_range(n, |i| {
        let xi = features.row(i);
        top_k(
            (0..n).filter(|&j| j != i).map(|j| {
                let s = similarity(xi, features.row(j), cfg.measure).expect("validated widths");
                (j, s)
            }),
            cfg.k,
        )
    });
    let edges = rows
        .iter()
        .enumerate()
        .flat_map(|(i, nbrs)| nbrs.iter().map(move |&j| (i, j)));
    Graph::from_edges(n, edges)
}
