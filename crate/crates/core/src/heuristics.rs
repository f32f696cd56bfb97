//! Neighborhood heuristics used as link-prediction baselines.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, Graph};
use crate::par;

/// Merge-walk over two sorted neighbor lists, calling `f` on each shared node.
fn for_each_common(a: &[usize], b: &[usize], mut f: impl FnMut(usize)) {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                f(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
}

/// `|N(u) ∩ N(v)|`.
pub fn common_neighbors(graph: &Graph, u: usize, v: usize) -> Result<f64> {
    graph.check_node(u)?;
    graph.check_node(v)?;
    let mut count = 0usize;
    for_each_common(graph.neighbors(u), graph.neighbors(v), |_| count += 1);
    Ok(count as f64)
}

/// `Σ 1 / ln deg(w)` over shared neighbors `w`. A shared neighbor of degree
/// one is impossible in a simple graph; it would contribute 0.
pub fn adamic_adar(graph: &Graph, u: usize, v: usize) -> Result<f64> {
    graph.check_node(u)?;
    graph.check_node(v)?;
    let mut score = 0.0;
    for_each_common(graph.neighbors(u), graph.neighbors(v), |w| {
        let d = graph.degree(w);
        if d > 1 {
            score += 1.0 / (d as f64).ln();
        }
    });
    Ok(score)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PprConfig {
    pub damping: f64,
    pub tolerance: f64,
    pub max_iters: usize,
}

impl Default for PprConfig {
    fn default() -> Self {
        PprConfig {
            damping: 0.85,
            tolerance: 1e-6,
            max_iters: 1000,
        }
    }
}

impl PprConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(Error::validation("PPR damping must lie in (0, 1)"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::validation("PPR tolerance must be positive"));
        }
        Ok(())
    }
}

/// Personalized PageRank from `source` by power iteration.
///
/// Iterates `π ← (1-d)·e_s + d·πP` with `P` the random-walk transition
/// matrix. Mass sitting on dangling nodes teleports back to `source`, so
/// the vector stays a distribution.
pub fn personalized_pagerank(graph: &Graph, source: usize, cfg: &PprConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let n = graph.node_count();
    if n == 0 {
        return Err(Error::validation("PPR on an empty graph"));
    }
    graph.check_node(source)?;
    let d = cfg.damping;
    let mut pi = vec![0.0; n];
    pi[source] = 1.0;
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..cfg.max_iters {
        next.iter_mut().for_each(|x| *x = 0.0);
        let mut dangling = 0.0;
        for (u, &mass) in pi.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let nbrs = graph.neighbors(u);
            if nbrs.is_empty() {
                dangling += mass;
            } else {
                let share = d * mass / nbrs.len() as f64;
                for &w in nbrs {
                    next[w] += share;
                }
            }
        }
        next[source] += (1.0 - d) + d * dangling;
        residual = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pi, &mut next);
        if residual < cfg.tolerance {
            return Ok(pi);
        }
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_iters,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Heuristic {
    CommonNeighbors,
    AdamicAdar,
    Ppr(PprConfig),
}

impl Heuristic {
    pub fn name(&self) -> &'static str {
        match self {
            Heuristic::CommonNeighbors => "CN",
            Heuristic::AdamicAdar => "AA",
            Heuristic::Ppr(_) => "PPR",
        }
    }
}

/// Scores each pair in order. PPR vectors are computed once per distinct
/// endpoint (in parallel) and the pair score is `π_u(v) + π_v(u)`.
pub fn score_edges(graph: &Graph, scorer: &Heuristic, edges: &[Edge]) -> Result<Vec<f64>> {
    for &(u, v) in edges {
        graph.check_node(u)?;
        graph.check_node(v)?;
    }
    match scorer {
        Heuristic::CommonNeighbors => {
            par::try_map(edges, |_, &(u, v)| common_neighbors(graph, u, v))
        }
        Heuristic::AdamicAdar => par::try_map(edges, |_, &(u, v)| adamic_adar(graph, u, v)),
        Heuristic::Ppr(cfg) => {
            let sources: Vec<usize> = edges
                .iter()
                .flat_map(|&(u, v)| [u, v])
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let vectors = par::try_map(&sources, |_, &s| personalized_pagerank(graph, s, cfg))?;
            let cache: HashMap<usize, Vec<f64>> = sources.into_iter().zip(vectors).collect();
            Ok(edges
                .iter()
                .map(|&(u, v)| cache[&u][v] + cache[&v][u])
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn g(n: usize, edges: &[Edge]) -> Graph {
        Graph::from_edges(n, edges.iter().copied()).unwrap()
    }

    #[test]
    fn common_neighbors_small_cases() {
        let tri = g(3, &[(0, 1), (1, 2), (0, 2)]);
        assert_eq!(common_neighbors(&tri, 0, 2).unwrap(), 1.0);
        let path = g(3, &[(0, 1), (1, 2)]);
        assert_eq!(common_neighbors(&path, 0, 2).unwrap(), 1.0);
        let iso = Graph::empty(2);
        assert_eq!(common_neighbors(&iso, 0, 1).unwrap(), 0.0);
        assert!(matches!(
            common_neighbors(&iso, 0, 5),
            Err(Error::NodeOutOfRange { id: 5, .. })
        ));
    }

    #[test]
    fn adamic_adar_small_cases() {
        let path = g(3, &[(0, 1), (1, 2)]);
        assert_abs_diff_eq!(adamic_adar(&path, 0, 2).unwrap(), 1.442695, epsilon = 1e-6);
        let star = g(4, &[(1, 0), (1, 2), (1, 3)]);
        assert_abs_diff_eq!(adamic_adar(&star, 0, 2).unwrap(), 0.910239, epsilon = 1e-6);
        assert_eq!(adamic_adar(&path, 0, 1).unwrap(), 0.0);
    }

    #[test]
    fn ppr_isolated_single_node() {
        let pi = personalized_pagerank(&Graph::empty(1), 0, &PprConfig::default()).unwrap();
        assert_eq!(pi, vec![1.0]);
    }

    #[test]
    fn ppr_cycle_is_symmetric() {
        let c3 = g(3, &[(0, 1), (1, 2), (0, 2)]);
        let pi = personalized_pagerank(&c3, 0, &PprConfig::default()).unwrap();
        assert_eq!(pi[1], pi[2]);
    }

    /// Dense power iteration: 1000 steps of π ← (1-d)e + d πP.
    fn dense_ppr(graph: &Graph, source: usize, d: f64) -> Vec<f64> {
        let n = graph.node_count();
        let mut p = vec![vec![0.0; n]; n];
        for u in 0..n {
            let deg = graph.degree(u);
            if deg == 0 {
                p[u][source] = 1.0;
            }
            for &w in graph.neighbors(u) {
                p[u][w] = 1.0 / deg as f64;
            }
        }
        let mut pi = vec![0.0; n];
        pi[source] = 1.0;
        for _ in 0..1000 {
            let mut next = vec![0.0; n];
            next[source] = 1.0 - d;
            for u in 0..n {
                for w in 0..n {
                    next[w] += d * pi[u] * p[u][w];
                }
            }
            pi = next;
        }
        pi
    }

    #[test]
    fn ppr_matches_dense_oracle_on_path() {
        let path = g(3, &[(0, 1), (1, 2)]);
        let cfg = PprConfig {
            tolerance: 1e-13,
            ..PprConfig::default()
        };
        let pi = personalized_pagerank(&path, 0, &cfg).unwrap();
        let oracle = dense_ppr(&path, 0, 0.85);
        for (a, b) in pi.iter().zip(&oracle) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn ppr_dangling_teleports_home() {
        let graph = g(4, &[(0, 1)]);
        let pi = personalized_pagerank(&graph, 2, &PprConfig::default()).unwrap();
        assert_eq!(pi, vec![0.0, 0.0, 1.0, 0.0]);
        let oracle = dense_ppr(&graph, 0, 0.85);
        let pi0 = personalized_pagerank(&graph, 0, &PprConfig { tolerance: 1e-12, ..Default::default() }).unwrap();
        for (a, b) in pi0.iter().zip(&oracle) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn ppr_reports_non_convergence() {
        let path = g(3, &[(0, 1), (1, 2)]);
        let cfg = PprConfig {
            max_iters: 2,
            ..PprConfig::default()
        };
        assert!(matches!(
            personalized_pagerank(&path, 0, &cfg),
            Err(Error::NoConvergence { iterations: 2, .. })
        ));
    }

    #[test]
    fn score_edges_preserves_order() {
        let tri = g(3, &[(0, 1), (1, 2), (0, 2)]);
        let s = score_edges(&tri, &Heuristic::CommonNeighbors, &[(0, 2), (0, 1)]).unwrap();
        assert_eq!(s, vec![1.0, 1.0]);
        assert!(score_edges(&tri, &Heuristic::AdamicAdar, &[]).unwrap().is_empty());
    }

    #[test]
    fn ppr_pair_score_is_symmetric() {
        let graph = g(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (1, 3)]);
        let h = Heuristic::Ppr(PprConfig::default());
        let a = score_edges(&graph, &h, &[(0, 4), (2, 4)]).unwrap();
        let b = score_edges(&graph, &h, &[(4, 0), (4, 2)]).unwrap();
        assert_eq!(a, b);
    }
}
