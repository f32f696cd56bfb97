//! Undirected graphs in CSR form, node attribute matrices, edge-list and CSV
//! ingestion, and the train/validation/test edge split.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Unordered node pair, stored with the smaller id first.
pub type Edge = (usize, usize);

/// Canonical orientation `(min, max)`.
#[inline]
pub fn canonical(u: usize, v: usize) -> Edge {
    if u <= v {
        (u, v)
    } else {
        (v, u)
    }
}

/// Immutable simple undirected graph.
///
/// Neighbor lists are sorted, deduplicated and free of self-loops; every
/// edge appears in both endpoints' lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    edge_count: usize,
}

impl Graph {
    /// Builds a graph from arbitrary pairs. Duplicates (in either
    /// orientation) collapse and self-loops are dropped.
    pub fn from_edges<I>(node_count: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = Edge>,
    {
        let mut pairs: Vec<Edge> = Vec::new();
        for (u, v) in edges {
            for id in [u, v] {
                if id >= node_count {
                    return Err(Error::NodeOutOfRange { id, node_count });
                }
            }
            if u != v {
                pairs.push(canonical(u, v));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();

        let mut degree = vec![0usize; node_count];
        for &(u, v) in &pairs {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = Vec::with_capacity(node_count + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut cursor = offsets[..node_count].to_vec();
        let mut neighbors = vec![0usize; 2 * pairs.len()];
        for &(u, v) in &pairs {
            neighbors[cursor[u]] = v;
            cursor[u] += 1;
            neighbors[cursor[v]] = u;
            cursor[v] += 1;
        }
        for u in 0..node_count {
            neighbors[offsets[u]..offsets[u + 1]].sort_unstable();
        }
        Ok(Graph {
            offsets,
            neighbors,
            edge_count: pairs.len(),
        })
    }

    pub fn empty(node_count: usize) -> Self {
        Graph {
            offsets: vec![0; node_count + 1],
            neighbors: Vec::new(),
            edge_count: 0,
        }
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Undirected edges, each counted once.
    #[inline]
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Edge count under the both-directions convention of dataset tables.
    pub fn directed_edge_count(&self) -> usize {
        2 * self.edge_count
    }

    #[inline]
    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.neighbors[self.offsets[u]..self.offsets[u + 1]]
    }

    #[inline]
    pub fn degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.node_count() && v < self.node_count() && self.neighbors(u).binary_search(&v).is_ok()
    }

    pub fn check_node(&self, id: usize) -> Result<()> {
        if id < self.node_count() {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange {
                id,
                node_count: self.node_count(),
            })
        }
    }

    /// Edges in canonical orientation, sorted.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        (0..self.node_count()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    pub fn average_degree(&self) -> f64 {
        if self.node_count() == 0 {
            0.0
        } else {
            self.directed_edge_count() as f64 / self.node_count() as f64
        }
    }

    /// Writes `u v` lines, one per undirected edge.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# nodes {}", self.node_count())?;
        for (u, v) in self.edges() {
            writeln!(out, "{u} {v}")?;
        }
        Ok(())
    }
}

/// Reads a whitespace-separated edge list. Blank lines and lines starting
/// with `#` are skipped; a `# nodes N` header (as written by
/// [`Graph::write_edge_list`]) acts as a node count hint so isolated
/// trailing nodes survive a round trip.
pub fn load_edge_list<R: BufRead>(source: R, node_count_hint: Option<usize>) -> Result<Graph> {
    let mut edges = Vec::new();
    let mut max_id: Option<usize> = None;
    let mut header_hint: Option<usize> = None;
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            let mut it = comment.split_whitespace();
            if let (Some("nodes"), Some(n)) = (it.next(), it.next()) {
                header_hint = n.parse().ok();
            }
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected two node ids, got {trimmed:?}"),
            });
        };
        let parse = |s: &str| -> Result<usize> {
            let id: i64 = s.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("not an integer node id: {s:?}"),
            })?;
            usize::try_from(id).map_err(|_| {
                Error::validation(format!("line {lineno}: negative node id {id}"))
            })
        };
        let (u, v) = (parse(a)?, parse(b)?);
        max_id = Some(max_id.map_or(u.max(v), |m| m.max(u).max(v)));
        edges.push((u, v));
    }
    let from_ids = max_id.map_or(0, |m| m + 1);
    let node_count = from_ids
        .max(node_count_hint.unwrap_or(0))
        .max(header_hint.unwrap_or(0));
    Graph::from_edges(node_count, edges)
}

/// Dense node attributes, row `i` belongs to node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    dim: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * dim {
            return Err(Error::shape(format!(
                "{} values for a {rows}x{dim} feature matrix",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::validation(format!(
                "non-finite feature at row {}",
                pos / dim.max(1)
            )));
        }
        Ok(FeatureMatrix { rows, dim, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::shape(format!("row {i} has width {} != {dim}", rows[i].len())));
        }
        Self::new(rows.len(), dim, rows.concat())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Rows reordered so that new row `i` is old row `order[i]`.
    pub fn select_rows(&self, order: &[usize]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(order.len() * self.dim);
        for &i in order {
            values.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            rows: order.len(),
            dim: self.dim,
            values,
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for i in 0..self.rows {
            let line: Vec<String> = self.row(i).iter().map(|x| format!("{x}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Reads one comma-separated row per node, in node-id order.
pub fn load_features<R: BufRead>(source: R, graph: &Graph) -> Result<FeatureMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let row = trimmed
            .split(',')
            .map(|cell| {
                let cell = cell.trim();
                cell.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::Parse {
                        line: idx + 1,
                        msg: format!("not a finite number: {cell:?}"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: format!("expected {} columns, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.len() != graph.node_count() {
        return Err(Error::validation(format!(
            "feature file has {} rows but the graph has {} nodes",
            rows.len(),
            graph.node_count()
        )));
    }
    FeatureMatrix::from_rows(&rows)
}

/// Fractions of the positive edges assigned to train, validation and test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.85,
            val: 0.05,
            test: 0.10,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(Error::validation("split ratios must be positive"));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::validation("split ratios must sum to 1"));
        }
        Ok(())
    }
}

/// Positive and negative pairs for each stage plus the training-only graph.
#[derive(Debug, Clone)]
pub struct EdgeSplit {
    pub train_pos: Vec<Edge>,
    pub val_pos: Vec<Edge>,
    pub test_pos: Vec<Edge>,
    pub train_neg: Vec<Edge>,
    pub val_neg: Vec<Edge>,
    pub test_neg: Vec<Edge>,
    pub observed_graph: Graph,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Train,
    Val,
    Test,
}

impl EdgeSplit {
    pub fn node_count(&self) -> usize {
        self.observed_graph.node_count()
    }

    pub fn positives(&self, stage: Stage) -> &[Edge] {
        match stage {
            Stage::Train => &self.train_pos,
            Stage::Val => &self.val_pos,
            Stage::Test => &self.test_pos,
        }
    }

    pub fn negatives(&self, stage: Stage) -> &[Edge] {
        match stage {
            Stage::Train => &self.train_neg,
            Stage::Val => &self.val_neg,
            Stage::Test => &self.test_neg,
        }
    }

    /// Graph over every positive pair of the three stages.
    pub fn full_graph(&self) -> Graph {
        let all = self
            .train_pos
            .iter()
            .chain(&self.val_pos)
            .chain(&self.test_pos)
            .copied();
        Graph::from_edges(self.node_count(), all).expect("split edges are in range")
    }

    pub fn to_manifest(&self) -> SplitManifest {
        SplitManifest {
            node_count: self.node_count(),
            seed: self.seed,
            train_pos: self.train_pos.clone(),
            val_pos: self.val_pos.clone(),
            test_pos: self.test_pos.clone(),
            train_neg: self.train_neg.clone(),
            val_neg: self.val_neg.clone(),
            test_neg: self.test_neg.clone(),
        }
    }

    pub fn from_manifest(m: SplitManifest) -> Result<Self> {
        let observed_graph = Graph::from_edges(m.node_count, m.train_pos.iter().copied())?;
        for &(u, v) in m
            .val_pos
            .iter()
            .chain(&m.test_pos)
            .chain(&m.train_neg)
            .chain(&m.val_neg)
            .chain(&m.test_neg)
        {
            observed_graph.check_node(u)?;
            observed_graph.check_node(v)?;
        }
        Ok(EdgeSplit {
            train_pos: m.train_pos,
            val_pos: m.val_pos,
            test_pos: m.test_pos,
            train_neg: m.train_neg,
            val_neg: m.val_neg,
            test_neg: m.test_neg,
            observed_graph,
            seed: m.seed,
        })
    }
}

/// On-disk form of an [`EdgeSplit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub node_count: usize,
    pub seed: u64,
    pub train_pos: Vec<Edge>,
    pub val_pos: Vec<Edge>,
    pub test_pos: Vec<Edge>,
    pub train_neg: Vec<Edge>,
    pub val_neg: Vec<Edge>,
    pub test_neg: Vec<Edge>,
}

impl SplitManifest {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Shuffles the edges of `graph` and carves out validation and test
/// positives, then samples the same number of non-edges for each stage.
///
/// Negatives are checked against the full graph and are pairwise disjoint
/// across stages.
pub fn split_edges(graph: &Graph, ratios: SplitRatios, seed: u64) -> Result<EdgeSplit> {
    ratios.validate()?;
    let m = graph.edge_count();
    if m < 10 {
        return Err(Error::validation(format!(
            "cannot split a graph with {m} edges (need at least 10)"
        )));
    }
    let mut edges: Vec<Edge> = graph.edges().collect();
    edges.shuffle(&mut rng::named(seed, "split"));

    let n_test = ((m as f64) * ratios.test).round().max(1.0) as usize;
    let n_val = ((m as f64) * ratios.val).round().max(1.0) as usize;
    if n_test + n_val >= m {
        return Err(Error::validation("split leaves no training edges"));
    }
    let test_pos = edges[..n_test].to_vec();
    let val_pos = edges[n_test..n_test + n_val].to_vec();
    let train_pos = edges[n_test + n_val..].to_vec();

    let mut taken: HashSet<Edge> = HashSet::new();
    let test_neg = sample_negatives(graph, test_pos.len(), rng::substream(seed, "neg/test"), &taken)?;
    taken.extend(&test_neg);
    let val_neg = sample_negatives(graph, val_pos.len(), rng::substream(seed, "neg/val"), &taken)?;
    taken.extend(&val_neg);
    let train_neg =
        sample_negatives(graph, train_pos.len(), rng::substream(seed, "neg/train"), &taken)?;

    let observed_graph = Graph::from_edges(graph.node_count(), train_pos.iter().copied())?;
    Ok(EdgeSplit {
        train_pos,
        val_pos,
        test_pos,
        train_neg,
        val_neg,
        test_neg,
        observed_graph,
        seed,
    })
}

/// Draws `count` distinct non-edges of `graph` that are not in `exclude`.
///
/// Uniform over the admissible pairs. Sparse cases use rejection sampling;
/// when the request is a large share of what is left, the admissible pairs
/// are enumerated and sampled without replacement.
pub fn sample_negatives(
    graph: &Graph,
    count: usize,
    seed: u64,
    exclude: &HashSet<Edge>,
) -> Result<Vec<Edge>> {
    let n = graph.node_count();
    let total_pairs = n * n.saturating_sub(1) / 2;
    let excluded_non_edges = exclude
        .iter()
        .filter(|&&(u, v)| u != v && u < n && v < n && !graph.has_edge(u, v))
        .count();
    let available = total_pairs - graph.edge_count() - excluded_non_edges;
    if available < count {
        return Err(Error::InsufficientNegatives {
            requested: count,
            available,
        });
    }
    let mut rng = rng::rng_from(seed);
    let admissible = |e: &Edge| !graph.has_edge(e.0, e.1) && !exclude.contains(e);

    if count * 4 > available {
        let mut pool: Vec<Edge> = Vec::with_capacity(available);
        for u in 0..n {
            for v in u + 1..n {
                if admissible(&(u, v)) {
                    pool.push((u, v));
                }
            }
        }
        let (picked, _) = pool.partial_shuffle(&mut rng, count);
        return Ok(picked.to_vec());
    }

    let mut seen: HashSet<Edge> = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u == v {
            continue;
        }
        let e = canonical(u, v);
        if admissible(&e) && seen.insert(e) {
            out.push(e);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn graph(text: &str) -> Graph {
        load_edge_list(Cursor::new(text), None).unwrap()
    }

    #[test]
    fn loads_simple_path() {
        let g = graph("0 1\n1 2");
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn drops_duplicates_and_self_loops() {
        let g = graph("0 1\n1 0\n0 0");
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.directed_edge_count(), 2);
    }

    #[test]
    fn hint_extends_node_count() {
        let g = load_edge_list(Cursor::new("0 1"), Some(5)).unwrap();
        assert_eq!(g.node_count(), 5);
        assert_eq!(g.degree(4), 0);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = load_edge_list(Cursor::new("# c\n0 1\n1 x\n"), None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = load_edge_list(Cursor::new("0 1 2\n"), None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn negative_id_is_a_validation_error() {
        let err = load_edge_list(Cursor::new("0 -1\n"), None).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn features_load_and_validate() {
        let g = graph("0 1\n1 2");
        let f = load_features(Cursor::new("1,0\n0,1\n1,1"), &g).unwrap();
        assert_eq!((f.rows(), f.dim()), (3, 2));
        assert_eq!(f.row(2), &[1.0, 1.0]);

        let err = load_features(Cursor::new("1,0\n0,1"), &g).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        let err = load_features(Cursor::new("1,0\n0,x\n1,1"), &g).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    fn ring(n: usize, chords: usize) -> Graph {
        let mut edges: Vec<Edge> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        edges.extend((0..chords).map(|i| (i, (i + n / 2) % n)));
        Graph::from_edges(n, edges).unwrap()
    }

    #[test]
    fn split_sizes_follow_ratios() {
        let g = ring(100, 0);
        assert_eq!(g.edge_count(), 100);
        let s = split_edges(&g, SplitRatios::default(), 2).unwrap();
        assert_eq!((s.train_pos.len(), s.val_pos.len(), s.test_pos.len()), (85, 5, 10));
        assert_eq!(s.train_neg.len(), 85);
        assert_eq!(s.val_neg.len(), 5);
        assert_eq!(s.test_neg.len(), 10);
        assert_eq!(s.observed_graph.edge_count(), 85);
    }

    #[test]
    fn split_is_deterministic() {
        let g = ring(60, 20);
        let a = split_edges(&g, SplitRatios::default(), 2).unwrap();
        let b = split_edges(&g, SplitRatios::default(), 2).unwrap();
        assert_eq!(a.to_manifest(), b.to_manifest());
        let c = split_edges(&g, SplitRatios::default(), 3).unwrap();
        assert_ne!(a.to_manifest(), c.to_manifest());
    }

    #[test]
    fn complete_graph_has_no_negatives() {
        let k5 = Graph::from_edges(5, (0..5).flat_map(|u| (u + 1..5).map(move |v| (u, v)))).unwrap();
        assert_eq!(k5.edge_count(), 10);
        let err = split_edges(&k5, SplitRatios::default(), 2).unwrap_err();
        assert!(matches!(err, Error::InsufficientNegatives { .. }));
    }

    #[test]
    fn too_few_edges_to_split() {
        let g = ring(9, 0);
        assert!(matches!(
            split_edges(&g, SplitRatios::default(), 2),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn path_has_one_negative() {
        let g = graph("0 1\n1 2");
        let neg = sample_negatives(&g, 1, 7, &HashSet::new()).unwrap();
        assert_eq!(neg, vec![(0, 2)]);
    }

    #[test]
    fn k4_has_no_negative() {
        let k4 = Graph::from_edges(4, (0..4).flat_map(|u| (u + 1..4).map(move |v| (u, v)))).unwrap();
        assert!(sample_negatives(&k4, 1, 7, &HashSet::new()).is_err());
    }

    #[test]
    fn empty_graph_negatives_are_reproducible() {
        let g = Graph::empty(100);
        let a = sample_negatives(&g, 50, 11, &HashSet::new()).unwrap();
        let b = sample_negatives(&g, 50, 11, &HashSet::new()).unwrap();
        assert_eq!(a, b);
        let distinct: HashSet<Edge> = a.iter().copied().collect();
        assert_eq!(distinct.len(), 50);
        assert!(a.iter().all(|&(u, v)| u < v));
    }

    #[test]
    fn manifest_round_trip_rebuilds_observed_graph() {
        let g = ring(40, 10);
        let s = split_edges(&g, SplitRatios::default(), 2).unwrap();
        let json = s.to_manifest().to_json().unwrap();
        let back = EdgeSplit::from_manifest(SplitManifest::from_json(&json).unwrap()).unwrap();
        assert_eq!(back.observed_graph, s.observed_graph);
        assert_eq!(back.full_graph(), g);
    }
}
