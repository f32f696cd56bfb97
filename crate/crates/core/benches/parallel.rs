//! Parallel kernels timed on the default rayon pool and on a single thread.
//! Built without the `parallel` feature only the sequential path runs.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use bsal::embedding::{generate_walks, WalkConfig};
use bsal::graph::{split_edges, SplitRatios, Stage};
use bsal::heuristics::{score_edges, Heuristic, PprConfig};
use bsal::semantic::{build_semantic_graph, SemanticGraphConfig, SimilarityMeasure};
use bsal::subgraph::{batch_extract, SubgraphConfig};
use bsal::synthetic::{citation_like, CitationConfig, Dataset};

#[cfg(feature = "parallel")]
fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let all = rayon::ThreadPoolBuilder::new().build().unwrap();
    vec![("sequential", single), ("parallel", all)]
}

fn run_modes<F: Fn() + Sync>(c: &mut Criterion, group: &str, size: usize, f: F) {
    let mut g = c.benchmark_group(group);
    g.sample_size(10);
    #[cfg(feature = "parallel")]
    for (mode, pool) in pools() {
        g.bench_with_input(BenchmarkId::new(mode, size), &size, |b, _| b.iter(|| pool.install(&f)));
    }
    #[cfg(not(feature = "parallel"))]
    g.bench_with_input(BenchmarkId::new("sequential", size), &size, |b, _| b.iter(&f));
    g.finish();
}

fn data() -> Dataset {
    citation_like(&CitationConfig::default(), 0).unwrap()
}

fn knn(c: &mut Criterion) {
    let d = data();
    let cfg = SemanticGraphConfig {
        k: 4,
        measure: SimilarityMeasure::Cosine,
    };
    run_modes(c, "semantic_knn", d.features.rows(), || {
        build_semantic_graph(&d.features, &cfg).unwrap();
    });
}

fn subgraphs(c: &mut Criterion) {
    let d = data();
    let split = split_edges(&d.graph, SplitRatios::default(), 2).unwrap();
    let pairs: Vec<_> = split.train_pos.iter().chain(&split.train_neg).copied().collect();
    let cfg = SubgraphConfig::default();
    run_modes(c, "batch_extract", pairs.len(), || {
        batch_extract(&split.observed_graph, &pairs, &cfg).unwrap();
    });
}

fn ppr(c: &mut Criterion) {
    let d = data();
    let split = split_edges(&d.graph, SplitRatios::default(), 2).unwrap();
    let pairs: Vec<_> = split.positives(Stage::Test).iter().chain(split.negatives(Stage::Test)).copied().collect();
    let h = Heuristic::Ppr(PprConfig::default());
    run_modes(c, "ppr_scores", pairs.len(), || {
        score_edges(&split.observed_graph, &h, &pairs).unwrap();
    });
}

fn walks(c: &mut Criterion) {
    let d = data();
    let cfg = WalkConfig {
        walks_per_node: 2,
        q: 0.5,
        ..Default::default()
    };
    run_modes(c, "node2vec_walks", d.graph.node_count(), || {
        generate_walks(&d.graph, &cfg).unwrap();
    });
}

criterion_group!(benches, knn, subgraphs, ppr, walks);
criterion_main!(benches);
