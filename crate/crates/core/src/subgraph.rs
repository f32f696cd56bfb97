//! Enclosing subgraphs around candidate pairs and double-radius node
//! labeling (DRNL).

use std::collections::{HashMap, VecDeque};
use std::io::{BufRead, Write};

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, Graph};
use crate::rng;

/// Labels at or above this share the last one-hot bucket.
pub const MAX_LABEL: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubgraphConfig {
    pub hop: usize,
    pub max_nodes: usize,
    /// Mixed with the pair to seed subsampling of oversized subgraphs.
    pub seed: u64,
}

impl Default for SubgraphConfig {
    fn default() -> Self {
        SubgraphConfig {
            hop: 1,
            max_nodes: 200,
            seed: 0,
        }
    }
}

/// Local view of the neighborhood of a target pair.
///
/// Local ids index `nodes`. The targets are always local 0 and 1, and the
/// target edge itself is never part of `local_adjacency`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnclosingSubgraph {
    pub nodes: Vec<usize>,
    offsets: Vec<usize>,
    adjacency: Vec<usize>,
    pub target_u: usize,
    pub target_v: usize,
    pub labels: Vec<usize>,
    pub hop: usize,
}

impl EnclosingSubgraph {
    fn from_local_edges(nodes: Vec<usize>, hop: usize, mut edges: Vec<Edge>) -> Self {
        let n = nodes.len();
        edges.retain(|&(a, b)| a != b && !((a == 0 && b == 1) || (a == 1 && b == 0)));
        let mut lists = vec![Vec::new(); n];
        for (a, b) in edges {
            lists[a].push(b);
            lists[b].push(a);
        }
        let mut offsets = vec![0];
        let mut adjacency = Vec::new();
        for l in &mut lists {
            l.sort_unstable();
            l.dedup();
            adjacency.extend_from_slice(l);
            offsets.push(adjacency.len());
        }
        let mut sub = EnclosingSubgraph {
            nodes,
            offsets,
            adjacency,
            target_u: 0,
            target_v: 1,
            labels: Vec::new(),
            hop,
        };
        sub.labels = drnl_label(&sub);
        sub
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn neighbors(&self, local: usize) -> &[usize] {
        &self.adjacency[self.offsets[local]..self.offsets[local + 1]]
    }

    pub fn degree(&self, local: usize) -> usize {
        self.offsets[local + 1] - self.offsets[local]
    }

    /// Local edges `(a, b)` with `a < b`.
    pub fn local_edges(&self) -> Vec<Edge> {
        (0..self.node_count())
            .flat_map(|a| self.neighbors(a).iter().filter(move |&&b| b > a).map(move |&b| (a, b)))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.len() / 2
    }

    pub fn label_bucket(&self, local: usize) -> usize {
        self.labels[local].min(MAX_LABEL - 1)
    }

    fn to_record(&self) -> SubgraphRecord {
        SubgraphRecord {
            nodes: self.nodes.clone(),
            edges: self.local_edges(),
            targets: (self.target_u, self.target_v),
            labels: self.labels.clone(),
            hop: self.hop,
        }
    }

    fn from_record(r: SubgraphRecord) -> Result<Self> {
        let n = r.nodes.len();
        if n < 2 || r.targets != (0, 1) {
            return Err(Error::Format("subgraph targets must be local 0 and 1".into()));
        }
        if r.edges.iter().any(|&(a, b)| a >= n || b >= n) || r.labels.len() != n {
            return Err(Error::Format("subgraph record references unknown nodes".into()));
        }
        let sub = Self::from_local_edges(r.nodes, r.hop, r.edges);
        if sub.labels != r.labels {
            return Err(Error::Format("stored labels disagree with structure".into()));
        }
        Ok(sub)
    }
}

/// Breadth-first distances from `source` over the local graph, skipping
/// `blocked`. Unreached nodes get `None`.
fn local_distances(sub: &EnclosingSubgraph, source: usize, blocked: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; sub.node_count()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(x) = queue.pop_front() {
        let d = dist[x].unwrap();
        for &y in sub.neighbors(x) {
            if y != blocked && dist[y].is_none() {
                dist[y] = Some(d + 1);
                queue.push_back(y);
            }
        }
    }
    dist
}

/// DRNL value for a node at distances `du`, `dv` from the two targets.
pub fn drnl_value(du: usize, dv: usize) -> usize {
    let d = du + dv;
    let half = d / 2;
    1 + du.min(dv) + half * (half + d % 2 - 1)
}

/// Labels every local node from its distance to `u` (with `v` removed) and
/// to `v` (with `u` removed). Targets get 1; nodes unreachable from either
/// side get 0.
pub fn drnl_label(sub: &EnclosingSubgraph) -> Vec<usize> {
    let (u, v) = (sub.target_u, sub.target_v);
    let from_u = local_distances(sub, u, v);
    let from_v = local_distances(sub, v, u);
    (0..sub.node_count())
        .map(|i| {
            if i == u || i == v {
                return 1;
            }
            match (from_u[i], from_v[i]) {
                (Some(du), Some(dv)) => drnl_value(du, dv),
                _ => 0,
            }
        })
        .collect()
}

fn bfs_ball(graph: &Graph, source: usize, hop: usize, out: &mut HashMap<usize, usize>) {
    let mut queue = VecDeque::from([(source, 0usize)]);
    let mut seen = HashMap::from([(source, 0usize)]);
    while let Some((x, d)) = queue.pop_front() {
        if d == hop {
            continue;
        }
        for &y in graph.neighbors(x) {
            if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(y) {
                e.insert(d + 1);
                queue.push_back((y, d + 1));
            }
        }
    }
    for (k, d) in seen {
        out.entry(k).and_modify(|e| *e = (*e).min(d)).or_insert(d);
    }
}

/// Extracts the `hop`-hop enclosing subgraph of `(u, v)`.
///
/// Oversized node sets keep both targets and a uniform sample of the rest,
/// seeded from `(cfg.seed, u, v)`.
pub fn extract_enclosing(graph: &Graph, u: usize, v: usize, cfg: &SubgraphConfig) -> Result<EnclosingSubgraph> {
    graph.check_node(u)?;
    graph.check_node(v)?;
    if u == v {
        return Err(Error::validation("enclosing subgraph needs two distinct targets"));
    }
    if cfg.hop < 1 {
        return Err(Error::validation("hop must be at least 1"));
    }
    if cfg.max_nodes < 2 {
        return Err(Error::validation("max_nodes must be at least 2"));
    }
    let mut ball = HashMap::new();
    bfs_ball(graph, u, cfg.hop, &mut ball);
    bfs_ball(graph, v, cfg.hop, &mut ball);
    let mut others: Vec<usize> = ball.into_keys().filter(|&x| x != u && x != v).collect();
    others.sort_unstable();
    if others.len() + 2 > cfg.max_nodes {
        let (a, b) = (u.min(v) as u64, u.max(v) as u64);
        let mut rng = rng::rng_from(rng::mix(&[cfg.seed, a, b]));
        let mut keep = sample(&mut rng, others.len(), cfg.max_nodes - 2).into_vec();
        keep.sort_unstable();
        others = keep.into_iter().map(|i| others[i]).collect();
    }
    let mut nodes = Vec::with_capacity(others.len() + 2);
    nodes.push(u);
    nodes.push(v);
    nodes.extend(others);

    let local: HashMap<usize, usize> = nodes.iter().enumerate().map(|(i, &g)| (g, i)).collect();
    let mut edges = Vec::new();
    for (a, &ga) in nodes.iter().enumerate() {
        for &gb in graph.neighbors(ga) {
            if let Some(&b) = local.get(&gb) {
                if a < b {
                    edges.push((a, b));
                }
            }
        }
    }
    Ok(EnclosingSubgraph::from_local_edges(nodes, cfg.hop, edges))
}

/// Order-preserving, parallel [`extract_enclosing`] over many pairs.
pub fn batch_extract(graph: &Graph, pairs: &[Edge], cfg: &SubgraphConfig) -> Result<Vec<EnclosingSubgraph>> {
    crate::par::try_map(pairs, |i, &(u, v)| {
        extract_enclosing(graph, u, v, cfg).map_err(|e| Error::AtPair {
            index: i,
            source: Box::new(e),
        })
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct SubgraphRecord {
    nodes: Vec<usize>,
    edges: Vec<Edge>,
    targets: (usize, usize),
    labels: Vec<usize>,
    hop: usize,
}

/// One JSON object per line: `nodes`, local `edges`, `targets`, `labels`.
pub fn write_jsonl<W: Write>(subgraphs: &[EnclosingSubgraph], mut out: W) -> Result<()> {
    for s in subgraphs {
        serde_json::to_writer(&mut out, &s.to_record())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<EnclosingSubgraph>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(EnclosingSubgraph::from_record(serde_json::from_str(&line)?)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(n: usize, edges: &[Edge]) -> Graph {
        Graph::from_edges(n, edges.iter().copied()).unwrap()
    }

    fn cfg(hop: usize) -> SubgraphConfig {
        SubgraphConfig {
            hop,
            ..Default::default()
        }
    }

    #[test]
    fn drnl_closed_form() {
        assert_eq!(drnl_value(1, 1), 2);
        assert_eq!(drnl_value(1, 2), 3);
        assert_eq!(drnl_value(2, 1), 3);
        assert_eq!(drnl_value(2, 2), 5);
        assert_eq!(drnl_value(1, 3), 4);
    }

    #[test]
    fn path_enclosing_subgraph() {
        let path = g(3, &[(0, 1), (1, 2)]);
        let s = extract_enclosing(&path, 0, 2, &cfg(1)).unwrap();
        assert_eq!(s.nodes, vec![0, 2, 1]);
        let mut global: Vec<Edge> = s
            .local_edges()
            .iter()
            .map(|&(a, b)| crate::graph::canonical(s.nodes[a], s.nodes[b]))
            .collect();
        global.sort();
        assert_eq!(global, vec![(0, 1), (1, 2)]);
        assert_eq!(s.labels, vec![1, 1, 2]);
    }

    #[test]
    fn target_edge_is_removed() {
        let tri = g(3, &[(0, 1), (1, 2), (0, 2)]);
        let s = extract_enclosing(&tri, 0, 1, &cfg(1)).unwrap();
        assert!(!s.neighbors(0).contains(&1));
        assert_eq!(s.edge_count(), 2);
        assert_eq!(s.labels, vec![1, 1, 2]);
    }

    #[test]
    fn star_leaves() {
        let star = g(6, &[(0, 1), (0, 2), (0, 3), (0, 4), (0, 5)]);
        let s = extract_enclosing(&star, 1, 2, &cfg(1)).unwrap();
        assert_eq!(s.nodes, vec![1, 2, 0]);
    }

    #[test]
    fn unreachable_side_gets_zero() {
        // 3 hangs off u only; with v removed it still reaches u, but it
        // cannot reach v once u is removed.
        let graph = g(4, &[(0, 2), (1, 2), (0, 3)]);
        let s = extract_enclosing(&graph, 0, 1, &cfg(1)).unwrap();
        let pos3 = s.nodes.iter().position(|&x| x == 3).unwrap();
        assert_eq!(s.labels[pos3], 0);
        let pos2 = s.nodes.iter().position(|&x| x == 2).unwrap();
        assert_eq!(s.labels[pos2], 2);
    }

    #[test]
    fn subsampling_keeps_targets_and_is_deterministic() {
        let star = g(50, &(1..50).map(|i| (0, i)).collect::<Vec<_>>());
        let c = SubgraphConfig {
            hop: 1,
            max_nodes: 10,
            seed: 3,
        };
        let a = extract_enclosing(&star, 0, 1, &c).unwrap();
        assert_eq!(a.node_count(), 10);
        assert_eq!(&a.nodes[..2], &[0, 1]);
        assert_eq!(a, extract_enclosing(&star, 0, 1, &c).unwrap());
    }

    #[test]
    fn errors() {
        let path = g(3, &[(0, 1), (1, 2)]);
        assert!(extract_enclosing(&path, 1, 1, &cfg(1)).is_err());
        assert!(extract_enclosing(&path, 0, 9, &cfg(1)).is_err());
        assert!(extract_enclosing(&path, 0, 1, &cfg(0)).is_err());
        let err = batch_extract(&path, &[(0, 1), (0, 7)], &cfg(1)).unwrap_err();
        assert!(matches!(err, Error::AtPair { index: 1, .. }));
    }

    #[test]
    fn batch_preserves_order() {
        let path = g(4, &[(0, 1), (1, 2), (2, 3)]);
        let subs = batch_extract(&path, &[(0, 2), (1, 3)], &cfg(1)).unwrap();
        assert_eq!(subs.len(), 2);
        assert_eq!(&subs[0].nodes[..2], &[0, 2]);
        assert_eq!(&subs[1].nodes[..2], &[1, 3]);
        assert!(batch_extract(&path, &[], &cfg(1)).unwrap().is_empty());
    }

    #[test]
    fn jsonl_round_trip() {
        let graph = g(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (1, 4)]);
        let subs = batch_extract(&graph, &[(0, 2), (1, 4), (0, 5)], &cfg(2)).unwrap();
        let mut buf = Vec::new();
        write_jsonl(&subs, &mut buf).unwrap();
        assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 3);
        assert_eq!(read_jsonl(&buf[..]).unwrap(), subs);
    }
}
