//! node2vec: biased second-order random walks and skip-gram with negative
//! sampling.
//!
//! Used twice: as a standalone link-prediction baseline (inner product of
//! embeddings) and to embed the semantic kNN graph for the semantic channel.

use std::io::{Read, Write};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub walks_per_node: usize,
    pub walk_length: usize,
    /// Return parameter: weight `1/p` for stepping back to the previous node.
    pub p: f64,
    /// In-out parameter: weight `1/q` for moving away from the previous node.
    pub q: f64,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            walks_per_node: 10,
            walk_length: 80,
            p: 1.0,
            q: 1.0,
            seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.walk_length < 2 {
            return Err(Error::validation("walk_length must be at least 2"));
        }
        if self.walks_per_node < 1 {
            return Err(Error::validation("walks_per_node must be at least 1"));
        }
        if !(self.p > 0.0 && self.q > 0.0) {
            return Err(Error::validation("node2vec p and q must be positive"));
        }
        Ok(())
    }
}

pub type Walk = Vec<usize>;

/// `walks_per_node` walks from every node that has at least one neighbor.
///
/// The corpus is ordered round by round, then by start node. Each walk owns
/// an RNG derived from `(seed, round, start)`, so the corpus does not depend
/// on how the work is scheduled.
pub fn generate_walks(graph: &Graph, cfg: &WalkConfig) -> Result<Vec<Walk>> {
    cfg.validate()?;
    if graph.node_count() == 0 {
        return Err(Error::validation("cannot walk an empty graph"));
    }
    let base = rng::substream(cfg.seed, "walks");
    let starts: Vec<(usize, usize)> = (0..cfg.walks_per_node)
        .flat_map(|r| {
            (0..graph.node_count())
                .filter(|&u| graph.degree(u) > 0)
                .map(move |u| (r, u))
        })
        .collect();
    Ok(crate::par::map(&starts, |&(round, start)| {
        let mut rng = rng::rng_from(rng::mix(&[base, round as u64, start as u64]));
        walk_from(graph, start, cfg, &mut rng)
    }))
}

fn walk_from(graph: &Graph, start: usize, cfg: &WalkConfig, rng: &mut Rng) -> Walk {
    let mut walk = Vec::with_capacity(cfg.walk_length);
    walk.push(start);
    let unbiased = cfg.p == 1.0 && cfg.q == 1.0;
    let (w_return, w_out) = (1.0 / cfg.p, 1.0 / cfg.q);
    let mut weights: Vec<f64> = Vec::new();
    while walk.len() < cfg.walk_length {
        let cur = *walk.last().unwrap();
        let nbrs = graph.neighbors(cur);
        if nbrs.is_empty() {
            break;
        }
        let next = match walk.len() {
            1 => nbrs[rng.random_range(0..nbrs.len())],
            _ if unbiased => nbrs[rng.random_range(0..nbrs.len())],
            len => {
                let prev = walk[len - 2];
                weights.clear();
                weights.extend(nbrs.iter().map(|&x| {
                    if x == prev {
                        w_return
                    } else if graph.has_edge(x, prev) {
                        1.0
                    } else {
                        w_out
                    }
                }));
                let total: f64 = weights.iter().sum();
                let mut target = rng.random::<f64>() * total;
                let mut pick = nbrs.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    if target < *w {
                        pick = i;
                        break;
                    }
                    target -= w;
                }
                nbrs[pick]
            }
        };
        walk.push(next);
    }
    walk
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives_per_positive: usize,
    /// Starting learning rate; decays linearly to 1e-4 of itself.
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Worker count for lock-free (Hogwild) updates. `1` is sequential and
    /// deterministic; larger values trade reproducibility for speed.
    pub threads: usize,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dim: 128,
            window: 5,
            negatives_per_positive: 5,
            learning_rate: 0.025,
            epochs: 5,
            seed: 0,
            threads: 1,
        }
    }
}

impl SkipGramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 1 || self.window < 1 {
            return Err(Error::validation("skip-gram dim and window must be at least 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::validation("skip-gram learning rate must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Dense row-per-node embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    values: Vec<f64>,
}

const EMBEDDING_MAGIC: &[u8; 8] = b"BSALEMB1";

impl EmbeddingMatrix {
    pub fn new(rows: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * dim {
            return Err(Error::shape(format!(
                "{} values for a {rows}x{dim} embedding",
                values.len()
            )));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("non-finite embedding entry".into()));
        }
        Ok(EmbeddingMatrix { rows, dim, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dot(&self, u: usize, v: usize) -> f64 {
        dot(self.row(u), self.row(v))
    }

    pub fn max_row_norm(&self) -> f64 {
        (0..self.rows)
            .map(|i| dot(self.row(i), self.row(i)).sqrt())
            .fold(0.0, f64::max)
    }

    /// Magic, `rows` and `dim` as little-endian u64, then row-major
    /// little-endian f64 values.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(EMBEDDING_MAGIC)?;
        out.write_all(&(self.rows as u64).to_le_bytes())?;
        out.write_all(&(self.dim as u64).to_le_bytes())?;
        for x in &self.values {
            out.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != EMBEDDING_MAGIC {
            return Err(Error::Format("not an embedding file".into()));
        }
        let mut word = [0u8; 8];
        input.read_exact(&mut word)?;
        let rows = u64::from_le_bytes(word) as usize;
        input.read_exact(&mut word)?;
        let dim = u64::from_le_bytes(word) as usize;
        let mut values = Vec::with_capacity(rows * dim);
        for _ in 0..rows * dim {
            input.read_exact(&mut word)?;
            values.push(f64::from_le_bytes(word));
        }
        Self::new(rows, dim, values)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for i in 0..self.rows {
            let cells: Vec<String> = self.row(i).iter().map(|x| format!("{x}")).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Draws nodes with probability proportional to `count^0.75`.
#[derive(Debug, Clone)]
struct NoiseDistribution {
    cumulative: Vec<f64>,
}

impl NoiseDistribution {
    fn from_corpus(corpus: &[Walk], node_count: usize) -> Self {
        let mut counts = vec![0u64; node_count];
        for walk in corpus {
            for &u in walk {
                counts[u] += 1;
            }
        }
        let mut acc = 0.0;
        let cumulative = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(0.75);
                acc
            })
            .collect();
        NoiseDistribution { cumulative }
    }

    fn sample(&self, rng: &mut Rng) -> usize {
        let total = *self.cumulative.last().unwrap_or(&0.0);
        let target = rng.random::<f64>() * total;
        let i = self.cumulative.partition_point(|&c| c <= target);
        i.min(self.cumulative.len() - 1)
    }
}

/// Shared weight storage. Relaxed atomics let Hogwild workers update rows
/// without locks; with a single worker they behave like plain floats.
struct Weights(Vec<AtomicU64>);

impl Weights {
    fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        Weights(values.into_iter().map(|x| AtomicU64::new(x.to_bits())).collect())
    }

    #[inline]
    fn get(&self, i: usize) -> f64 {
        f64::from_bits(self.0[i].load(Ordering::Relaxed))
    }

    #[inline]
    fn add(&self, i: usize, delta: f64) {
        self.0[i].store((self.get(i) + delta).to_bits(), Ordering::Relaxed);
    }

    fn to_vec(&self) -> Vec<f64> {
        (0..self.0.len()).map(|i| self.get(i)).collect()
    }
}

/// Skip-gram model with separate center (`input`) and context (`output`)
/// vectors.
pub struct SkipGram {
    cfg: SkipGramConfig,
    node_count: usize,
    input: Weights,
    output: Weights,
    noise: NoiseDistribution,
    total_tokens: usize,
    processed: AtomicUsize,
}

impl SkipGram {
    /// Center vectors start uniform in `[-0.5/dim, 0.5/dim]`, context
    /// vectors at zero.
    pub fn new(corpus: &[Walk], node_count: usize, cfg: &SkipGramConfig) -> Result<Self> {
        cfg.validate()?;
        if let Some(&bad) = corpus.iter().flatten().find(|&&u| u >= node_count) {
            return Err(Error::NodeOutOfRange {
                id: bad,
                node_count,
            });
        }
        let mut init = rng::named(cfg.seed, "skipgram/init");
        let half = 0.5 / cfg.dim as f64;
        let input = Weights::from_values((0..node_count * cfg.dim).map(|_| init.random_range(-half..half)));
        let output = Weights::from_values(std::iter::repeat_n(0.0, node_count * cfg.dim));
        Ok(SkipGram {
            cfg: *cfg,
            node_count,
            input,
            output,
            noise: NoiseDistribution::from_corpus(corpus, node_count),
            total_tokens: corpus.iter().map(Vec::len).sum::<usize>() * cfg.epochs.max(1),
            processed: AtomicUsize::new(0),
        })
    }

    fn current_lr(&self) -> f64 {
        let done = self.processed.load(Ordering::Relaxed) as f64;
        let frac = 1.0 - done / self.total_tokens.max(1) as f64;
        self.cfg.learning_rate * frac.max(1e-4)
    }

    /// One positive pair plus its negatives.
    fn update(&self, center: usize, context: usize, lr: f64, rng: &mut Rng, grad: &mut [f64]) {
        let dim = self.cfg.dim;
        let c0 = center * dim;
        grad.iter_mut().for_each(|g| *g = 0.0);
        for k in 0..=self.cfg.negatives_per_positive {
            let (target, label) = if k == 0 {
                (context, 1.0)
            } else {
                let t = self.noise.sample(rng);
                if t == context {
                    continue;
                }
                (t, 0.0)
            };
            let t0 = target * dim;
            let f: f64 = (0..dim).map(|i| self.input.get(c0 + i) * self.output.get(t0 + i)).sum();
            let g = (label - sigmoid(f)) * lr;
            for i in 0..dim {
                grad[i] += g * self.output.get(t0 + i);
                self.output.add(t0 + i, g * self.input.get(c0 + i));
            }
        }
        for i in 0..dim {
            self.input.add(c0 + i, grad[i]);
        }
    }

    fn train_walks(&self, walks: &[Walk], rng: &mut Rng) {
        let mut grad = vec![0.0; self.cfg.dim];
        let window = self.cfg.window;
        for walk in walks {
            let lr = self.current_lr();
            for (i, &center) in walk.iter().enumerate() {
                let reach = window - rng.random_range(0..window);
                let lo = i.saturating_sub(reach);
                let hi = (i + reach).min(walk.len() - 1);
                for j in lo..=hi {
                    if j != i {
                        self.update(center, walk[j], lr, rng, &mut grad);
                    }
                }
            }
            self.processed.fetch_add(walk.len(), Ordering::Relaxed);
        }
    }

    /// One pass over the corpus. The context window is shrunk uniformly at
    /// random per position, as in word2vec.
    pub fn train_epoch(&self, corpus: &[Walk], epoch: usize) {
        let seed = rng::mix(&[rng::substream(self.cfg.seed, "skipgram/sgd"), epoch as u64]);
        let threads = self.cfg.threads.max(1);
        if threads == 1 || !crate::par::is_parallel() || corpus.len() < threads {
            self.train_walks(corpus, &mut rng::rng_from(seed));
            return;
        }
        let chunk = corpus.len().div_ceil(threads);
        let chunks: Vec<(usize, &[Walk])> = corpus.chunks(chunk).enumerate().collect();
        crate::par::map(&chunks, |&(w, walks)| {
            self.train_walks(walks, &mut rng::rng_from(rng::mix(&[seed, w as u64])));
        });
    }

    /// Negative-sampling loss `-[ln σ(c·w) + Σ ln σ(-c·n)]` summed over a
    /// fixed batch of `(center, context, negatives)` triples.
    pub fn loss(&self, batch: &[(usize, usize, Vec<usize>)]) -> f64 {
        let dim = self.cfg.dim;
        let score = |c: usize, t: usize| -> f64 {
            (0..dim).map(|i| self.input.get(c * dim + i) * self.output.get(t * dim + i)).sum()
        };
        batch
            .iter()
            .map(|(c, w, negs)| {
                -sigmoid(score(*c, *w)).ln()
                    - negs.iter().map(|&n| sigmoid(-score(*c, n)).ln()).sum::<f64>()
            })
            .sum()
    }

    pub fn embedding(&self) -> Result<EmbeddingMatrix> {
        EmbeddingMatrix::new(self.node_count, self.cfg.dim, self.input.to_vec())
    }
}

/// Trains center embeddings on a walk corpus. An empty corpus or zero epochs
/// leaves the random initialization untouched.
pub fn train_skipgram(corpus: &[Walk], node_count: usize, cfg: &SkipGramConfig) -> Result<EmbeddingMatrix> {
    let model = SkipGram::new(corpus, node_count, cfg)?;
    if !corpus.is_empty() {
        for epoch in 0..cfg.epochs {
            model.train_epoch(corpus, epoch);
        }
    }
    model.embedding()
}

pub fn node2vec(graph: &Graph, walk_cfg: &WalkConfig, sg_cfg: &SkipGramConfig) -> Result<EmbeddingMatrix> {
    let corpus = generate_walks(graph, walk_cfg)?;
    train_skipgram(&corpus, graph.node_count(), sg_cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Edge;

    fn g(n: usize, edges: &[Edge]) -> Graph {
        Graph::from_edges(n, edges.iter().copied()).unwrap()
    }

    #[test]
    fn single_edge_walk_alternates() {
        let graph = g(2, &[(0, 1)]);
        let cfg = WalkConfig {
            walks_per_node: 1,
            walk_length: 4,
            ..Default::default()
        };
        let walks = generate_walks(&graph, &cfg).unwrap();
        assert_eq!(walks, vec![vec![0, 1, 0, 1], vec![1, 0, 1, 0]]);
    }

    #[test]
    fn isolated_nodes_contribute_nothing() {
        let graph = g(4, &[(0, 1)]);
        let walks = generate_walks(&graph, &WalkConfig::default()).unwrap();
        assert_eq!(walks.len(), 20);
        assert!(walks.iter().all(|w| w[0] < 2));
    }

    #[test]
    fn biased_walks_are_valid_paths() {
        let graph = g(6, &[(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 5), (5, 3)]);
        let cfg = WalkConfig {
            p: 0.5,
            q: 2.0,
            walk_length: 30,
            seed: 9,
            ..Default::default()
        };
        let walks = generate_walks(&graph, &cfg).unwrap();
        for w in &walks {
            assert_eq!(w.len(), 30);
            assert!(w.windows(2).all(|p| graph.has_edge(p[0], p[1])));
        }
        assert_eq!(walks, generate_walks(&graph, &cfg).unwrap());
    }

    #[test]
    fn return_parameter_biases_backtracking() {
        // 0-1 with 1 also touching 2 and 3: after 0 -> 1, a tiny p makes
        // stepping back to 0 dominant.
        let graph = g(4, &[(0, 1), (1, 2), (1, 3)]);
        let cfg = |p: f64| WalkConfig {
            walks_per_node: 200,
            walk_length: 3,
            p,
            q: 1.0,
            seed: 4,
        };
        let back = |p: f64| {
            generate_walks(&graph, &cfg(p))
                .unwrap()
                .iter()
                .filter(|w| w[0] == 0 && w[2] == 0)
                .count()
        };
        assert!(back(0.01) > 190);
        assert!(back(100.0) < 10);
    }

    #[test]
    fn rejects_bad_configs() {
        let graph = g(2, &[(0, 1)]);
        let bad = WalkConfig {
            walk_length: 1,
            ..Default::default()
        };
        assert!(generate_walks(&graph, &bad).is_err());
        let corpus = vec![vec![0, 5]];
        assert!(matches!(
            train_skipgram(&corpus, 2, &SkipGramConfig::default()),
            Err(Error::NodeOutOfRange { id: 5, .. })
        ));
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let corpus = vec![vec![0, 1, 0, 1]];
        let cfg = SkipGramConfig {
            dim: 8,
            epochs: 0,
            ..Default::default()
        };
        let m = train_skipgram(&corpus, 3, &cfg).unwrap();
        assert_eq!((m.rows(), m.dim()), (3, 8));
        assert!(m.values().iter().all(|x| x.abs() <= 0.5 / 8.0));
        let trained = train_skipgram(&corpus, 3, &SkipGramConfig { epochs: 1, ..cfg }).unwrap();
        assert_eq!(m.row(2), trained.row(2));
        assert_ne!(m.row(0), trained.row(0));
    }

    #[test]
    fn empty_graph_embedding_is_initialization() {
        let graph = Graph::empty(5);
        let sg = SkipGramConfig {
            dim: 4,
            ..Default::default()
        };
        let m = node2vec(&graph, &WalkConfig::default(), &sg).unwrap();
        let init = train_skipgram(&[], 5, &SkipGramConfig { epochs: 0, ..sg }).unwrap();
        assert_eq!(m, init);
    }

    #[test]
    fn binary_round_trip() {
        let m = EmbeddingMatrix::new(2, 3, vec![1.0, -2.5, 3.0, 0.0, 1e-300, -7.0]).unwrap();
        let mut buf = Vec::new();
        m.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 16 + 48);
        assert_eq!(&buf[8..16], &2u64.to_le_bytes());
        assert_eq!(EmbeddingMatrix::read_binary(&buf[..]).unwrap(), m);
        assert!(EmbeddingMatrix::read_binary(&b"garbage-garbage-garbage"[..]).is_err());
    }
}
