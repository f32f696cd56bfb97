//! Seeded graph and feature generators used by tests, benches and the CLI.

use std::collections::HashSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::Normal;

use crate::error::{Error, Result};
use crate::graph::{canonical, Edge, FeatureMatrix, Graph};
use crate::rng::{self, Rng};

/// A generated graph with node features and ground-truth classes.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub graph: Graph,
    pub features: FeatureMatrix,
    pub labels: Vec<usize>,
}

/// Random recursive tree: node `i` attaches to a uniform earlier node.
pub fn random_tree(n: usize, seed: u64) -> Result<Graph> {
    let mut r = rng::named(seed, "tree");
    Graph::from_edges(n, (1..n).map(|i| (r.random_range(0..i), i)))
}

fn gaussian_rows(r: &mut Rng, centers: &[Vec<f64>], assign: &[usize], sigma: f64) -> Result<FeatureMatrix> {
    let dim = centers.first().map_or(0, Vec::len);
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::validation(e.to_string()))?;
    let mut values = Vec::with_capacity(assign.len() * dim);
    for &c in assign {
        values.extend(centers[c].iter().map(|m| m + noise.sample(r)));
    }
    FeatureMatrix::new(assign.len(), dim, values)
}

fn balanced_labels(n: usize, k: usize) -> Vec<usize> {
    (0..n).map(|i| i * k / n).collect()
}

/// `k` isotropic Gaussian blobs with centers on a scaled simplex-like
/// layout (`separation` apart along distinct axes).
pub fn gaussian_clusters(n: usize, k: usize, dim: usize, separation: f64, sigma: f64, seed: u64) -> Result<(FeatureMatrix, Vec<usize>)> {
    if k == 0 || dim < k {
        return Err(Error::validation("gaussian clusters need 1 <= k <= dim"));
    }
    let mut r = rng::named(seed, "gaussian");
    let centers: Vec<Vec<f64>> = (0..k)
        .map(|c| (0..dim).map(|d| if d == c { separation / std::f64::consts::SQRT_2 } else { 0.0 }).collect())
        .collect();
    let labels = balanced_labels(n, k);
    Ok((gaussian_rows(&mut r, &centers, &labels, sigma)?, labels))
}

/// Stochastic block model with equal blocks.
pub fn planted_partition(n: usize, blocks: usize, p_in: f64, p_out: f64, seed: u64) -> Result<(Graph, Vec<usize>)> {
    if !(0.0..=1.0).contains(&p_in) || !(0.0..=1.0).contains(&p_out) || blocks == 0 {
        return Err(Error::validation("planted partition needs probabilities in [0, 1] and blocks > 0"));
    }
    let mut r = rng::named(seed, "sbm");
    let labels = balanced_labels(n, blocks);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if labels[u] == labels[v] { p_in } else { p_out };
            if r.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Ok((Graph::from_edges(n, edges)?, labels))
}

/// Community structure in the graph, pure noise in the features.
pub fn topology_informative(seed: u64) -> Result<Dataset> {
    let (n, blocks) = (600, 120);
    let (graph, labels) = planted_partition(n, blocks, 0.8, 0.001, rng::substream(seed, "A/graph"))?;
    let mut r = rng::named(seed, "A/features");
    let noise = Normal::new(0.0, 1.0).map_err(|e| Error::validation(e.to_string()))?;
    let dim = 2;
    let values = (0..n * dim).map(|_| noise.sample(&mut r)).collect();
    Ok(Dataset {
        name: "synthetic-A".into(),
        graph,
        features: FeatureMatrix::new(n, dim, values)?,
        labels,
    })
}

/// Clustered features; edges are sparse random links inside each feature
/// cluster with almost no local structure.
pub fn feature_informative(seed: u64) -> Result<Dataset> {
    let (n, blocks, dim) = (400, 4, 16);
    let (features, labels) = gaussian_clusters(n, blocks, dim, 6.0, 1.0, rng::substream(seed, "B/features"))?;
    let mut r = rng::named(seed, "B/graph");
    let per_block = n / blocks;
    let target = 3 * per_block / 2;
    let mut edges = HashSet::new();
    for b in 0..blocks {
        let lo = b * per_block;
        let mut count = 0;
        while count < target {
            let u = lo + r.random_range(0..per_block);
            let v = lo + r.random_range(0..per_block);
            if u != v && edges.insert(canonical(u, v)) {
                count += 1;
            }
        }
    }
    let mut edges: Vec<Edge> = edges.into_iter().collect();
    edges.sort_unstable();
    Ok(Dataset {
        name: "synthetic-B".into(),
        graph: Graph::from_edges(n, edges)?,
        features,
        labels,
    })
}

/// Knobs for the citation-style generator.
#[derive(Debug, Clone, PartialEq)]
pub struct CitationConfig {
    pub class_sizes: Vec<usize>,
    pub edges: usize,
    pub vocabulary: usize,
    pub words_per_node: usize,
    pub topic_words: usize,
    pub topic_fraction: f64,
    pub homophily: f64,
    pub closure: f64,
    pub weight_exponent: f64,
}

impl Default for CitationConfig {
    /// Cora-format sizes: 2708 nodes in 7 classes, 5278 undirected edges,
    /// 1433 binary word features.
    fn default() -> Self {
        CitationConfig {
            class_sizes: vec![351, 217, 418, 818, 426, 298, 180],
            edges: 5278,
            vocabulary: 1433,
            words_per_node: 18,
            topic_words: 120,
            topic_fraction: 0.5,
            homophily: 0.8,
            closure: 0.4,
            weight_exponent: 2.2,
        }
    }
}

/// Citation-like graph: power-law node weights, class homophily, triadic
/// closure, and bag-of-words features drawn partly from a class topic.
pub fn citation_like(cfg: &CitationConfig, seed: u64) -> Result<Dataset> {
    let n: usize = cfg.class_sizes.iter().sum();
    if n < 3 || cfg.edges < n || cfg.edges > n * (n - 1) / 4 {
        return Err(Error::validation("citation generator needs n >= 3 and n <= edges <= n(n-1)/4"));
    }
    if cfg.topic_words > cfg.vocabulary || cfg.words_per_node > cfg.vocabulary {
        return Err(Error::validation("topic and per-node word counts must fit the vocabulary"));
    }
    let mut r = rng::named(seed, "citation");
    let mut labels: Vec<usize> = cfg.class_sizes.iter().enumerate().flat_map(|(c, &s)| std::iter::repeat_n(c, s)).collect();
    labels.shuffle(&mut r);
    let classes = cfg.class_sizes.len();

    // Pareto weights give a heavy-tailed degree sequence.
    let weights: Vec<f64> = (0..n)
        .map(|_| (1.0 - r.random::<f64>()).powf(-1.0 / (cfg.weight_exponent - 1.0)).min(n as f64))
        .collect();
    let bad = |e: rand::distr::weighted::Error| Error::validation(e.to_string());
    let global = WeightedIndex::new(&weights).map_err(bad)?;
    let members: Vec<Vec<usize>> = (0..classes).map(|c| (0..n).filter(|&i| labels[i] == c).collect()).collect();
    let by_class: Vec<WeightedIndex<f64>> = members
        .iter()
        .map(|m| WeightedIndex::new(m.iter().map(|&i| weights[i])).map_err(bad))
        .collect::<Result<_>>()?;

    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut seen: HashSet<Edge> = HashSet::new();
    let mut add = |u: usize, v: usize, adj: &mut Vec<Vec<usize>>| -> bool {
        if u != v && seen.insert(canonical(u, v)) {
            adj[u].push(v);
            adj[v].push(u);
            true
        } else {
            false
        }
    };
    let homophilous = |u: usize, r: &mut Rng| -> usize {
        if r.random_bool(cfg.homophily) {
            members[labels[u]][by_class[labels[u]].sample(r)]
        } else {
            global.sample(r)
        }
    };
    // Every node gets at least one link.
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut r);
    let mut count = 0;
    for &u in &order {
        while adj[u].is_empty() {
            let v = homophilous(u, &mut r);
            if add(u, v, &mut adj) {
                count += 1;
            }
        }
    }
    while count < cfg.edges {
        let u = global.sample(&mut r);
        let v = if r.random_bool(cfg.closure) && !adj[u].is_empty() {
            let w = adj[u][r.random_range(0..adj[u].len())];
            adj[w][r.random_range(0..adj[w].len())]
        } else {
            homophilous(u, &mut r)
        };
        if add(u, v, &mut adj) {
            count += 1;
        }
    }
    let mut edges: Vec<Edge> = seen.into_iter().collect();
    edges.sort_unstable();
    let graph = Graph::from_edges(n, edges)?;

    let mut vocab: Vec<usize> = (0..cfg.vocabulary).collect();
    let topics: Vec<Vec<usize>> = (0..classes)
        .map(|_| {
            vocab.shuffle(&mut r);
            vocab[..cfg.topic_words].to_vec()
        })
        .collect();
    let mut values = vec![0.0; n * cfg.vocabulary];
    for i in 0..n {
        let row = &mut values[i * cfg.vocabulary..(i + 1) * cfg.vocabulary];
        let mut placed = 0;
        while placed < cfg.words_per_node {
            let w = if r.random_bool(cfg.topic_fraction) {
                topics[labels[i]][r.random_range(0..cfg.topic_words)]
            } else {
                r.random_range(0..cfg.vocabulary)
            };
            if row[w] == 0.0 {
                row[w] = 1.0;
                placed += 1;
            }
        }
    }
    Ok(Dataset {
        name: "cora-synthetic".into(),
        graph,
        features: FeatureMatrix::new(n, cfg.vocabulary, values)?,
        labels,
    })
}
