//! Acceptance criteria, one PASS/FAIL line each. Runs as a plain binary
//! (`harness = false`) so the summary is always printed.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng as _;

use bsal::eval::{auc, average_precision};
use bsal::graph::{canonical, split_edges, Edge, FeatureMatrix, Graph, SplitRatios, Stage};
use bsal::heuristics::{score_edges, Heuristic};
use bsal::neural::fusion::{attention_fuse, softmax2, FusionParams};
use bsal::neural::gradcheck;
use bsal::neural::layers::Parameter;
use bsal::neural::matrix::Matrix;
use bsal::pipeline::{run_bsal, BsalConfig, ChannelReports};
use bsal::rng::{rng_from, Rng};
use bsal::semantic::{build_semantic_graph, SemanticGraphConfig, SimilarityMeasure};
use bsal::subgraph::{extract_enclosing, SubgraphConfig};
use bsal::synthetic;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> Verdict) -> Verdict {
    let start = Instant::now();
    let v = f();
    let took = start.elapsed();
    let within = took <= limit;
    verdict(
        v.pass && within,
        format!("{}; {:.2}s (limit {}s)", v.detail, took.as_secs_f64(), limit.as_secs()),
    )
}

// 1 -------------------------------------------------------------------------

fn tree_heuristics() -> Verdict {
    let tree = synthetic::random_tree(1000, 0).unwrap();
    let split = split_edges(&tree, SplitRatios::default(), 2).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for h in [Heuristic::CommonNeighbors, Heuristic::AdamicAdar] {
        let p = score_edges(&split.observed_graph, &h, split.positives(Stage::Test)).unwrap();
        let n = score_edges(&split.observed_graph, &h, split.negatives(Stage::Test)).unwrap();
        let a = auc(&p, &n).unwrap();
        ok &= (a - 0.5).abs() <= 0.02;
        parts.push(format!("{} auc {a:.4}", h.name()));
    }
    verdict(ok, parts.join(", "))
}

// 2 -------------------------------------------------------------------------

fn brute_auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut s = 0.0;
    for p in pos {
        for n in neg {
            if p > n {
                s += 1.0;
            } else if p == n {
                s += 0.5;
            }
        }
    }
    s / (pos.len() as f64 * neg.len() as f64)
}

/// Sum over distinct thresholds of (recall gain) x (precision at threshold).
fn brute_ap(pos: &[f64], neg: &[f64]) -> f64 {
    let mut thresholds: Vec<f64> = pos.iter().chain(neg).copied().collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for t in thresholds {
        let tp = pos.iter().filter(|&&s| s >= t).count() as f64;
        let fp = neg.iter().filter(|&&s| s >= t).count() as f64;
        let recall = tp / pos.len() as f64;
        ap += (recall - prev_recall) * tp / (tp + fp);
        prev_recall = recall;
    }
    ap
}

fn random_scores(r: &mut Rng) -> Vec<f64> {
    let len = r.random_range(1..60);
    let discrete = r.random_bool(0.5);
    (0..len)
        .map(|_| if discrete { r.random_range(0..6) as f64 } else { r.random::<f64>() })
        .collect()
}

fn metric_oracles() -> Verdict {
    let mut r = rng_from(2);
    let (mut auc_bad, mut ap_err) = (0, 0.0f64);
    for _ in 0..200 {
        let (p, n) = (random_scores(&mut r), random_scores(&mut r));
        if auc(&p, &n).unwrap() != brute_auc(&p, &n) {
            auc_bad += 1;
        }
    }
    for _ in 0..200 {
        let (p, n) = (random_scores(&mut r), random_scores(&mut r));
        ap_err = ap_err.max((average_precision(&p, &n).unwrap() - brute_ap(&p, &n)).abs());
    }
    verdict(
        auc_bad == 0 && ap_err <= 1e-12,
        format!("auc mismatches {auc_bad}/200, max ap error {ap_err:.2e}"),
    )
}

// 3 -------------------------------------------------------------------------

fn gradient_checks() -> Verdict {
    let builders: [(&str, fn(u64) -> gradcheck::Probe); 5] = [
        ("gcn", gradcheck::gcn_probe),
        ("readout", gradcheck::readout_probe),
        ("attention", gradcheck::fusion_probe),
        ("classifier", gradcheck::classifier_probe),
        ("joint_loss", gradcheck::full_model_probe),
    ];
    let mut worst_all = 0.0f64;
    let mut parts = Vec::new();
    for (name, build) in builders {
        let worst = (0..20u64).map(|s| build(s).check(1e-5, 10_000, s)).fold(0.0, f64::max);
        worst_all = worst_all.max(worst);
        parts.push(format!("{name} {worst:.1e}"));
    }
    verdict(worst_all < 1e-4, format!("max rel err: {}", parts.join(", ")))
}

// 4 -------------------------------------------------------------------------

const INF: usize = usize::MAX / 4;

/// All-pairs distances on the local graph with `blocked` deleted.
fn floyd(n: usize, edges: &[Edge], blocked: usize) -> Vec<Vec<usize>> {
    let mut d = vec![vec![INF; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for &(a, b) in edges {
        if a != blocked && b != blocked {
            d[a][b] = 1;
            d[b][a] = 1;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

fn drnl_oracle() -> Verdict {
    let mut r = rng_from(4);
    let mut mismatched = 0;
    for _ in 0..100 {
        let n = r.random_range(2..=30);
        let density = r.random_range(0.05..0.4);
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if r.random_bool(density) {
                    edges.push((a, b));
                }
            }
        }
        let g = Graph::from_edges(n, edges).unwrap();
        let u = r.random_range(0..n);
        let v = (u + r.random_range(1..n)) % n;
        let cfg = SubgraphConfig {
            hop: r.random_range(1..=3),
            max_nodes: 1000,
            seed: 0,
        };
        let sub = extract_enclosing(&g, u, v, &cfg).unwrap();
        let m = sub.node_count();
        let local = sub.local_edges();
        let from_u = floyd(m, &local, 1);
        let from_v = floyd(m, &local, 0);
        let expected: Vec<usize> = (0..m)
            .map(|x| {
                if x < 2 {
                    1
                } else if from_u[0][x] >= INF || from_v[1][x] >= INF {
                    0
                } else {
                    let (du, dv) = (from_u[0][x], from_v[1][x]);
                    let d = du + dv;
                    1 + du.min(dv) + (d / 2) * (d / 2 + d % 2 - 1)
                }
            })
            .collect();
        if expected != sub.labels {
            mismatched += 1;
        }
    }
    verdict(mismatched == 0, format!("{mismatched}/100 graphs mismatched"))
}

// 5 -------------------------------------------------------------------------

fn oracle_similarity(a: &[f64], b: &[f64], m: SimilarityMeasure) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    match m {
        SimilarityMeasure::InnerProduct => dot,
        SimilarityMeasure::EuclideanDistance => -sq,
        SimilarityMeasure::Cosine => {
            let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            dot / (na * nb)
        }
        SimilarityMeasure::GaussianKernel { t } => (-sq.sqrt() / t).exp(),
    }
}

fn brute_knn(x: &FeatureMatrix, k: usize, m: SimilarityMeasure) -> BTreeSet<Edge> {
    let n = x.rows();
    let mut out = BTreeSet::new();
    for i in 0..n {
        let mut cand: Vec<(f64, usize)> = (0..n).filter(|&j| j != i).map(|j| (oracle_similarity(x.row(i), x.row(j), m), j)).collect();
        cand.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, j) in &cand[..k] {
            out.insert(canonical(i, j));
        }
    }
    out
}

fn knn_oracle() -> Verdict {
    let mut r = rng_from(5);
    let measures = [
        SimilarityMeasure::InnerProduct,
        SimilarityMeasure::EuclideanDistance,
        SimilarityMeasure::Cosine,
        SimilarityMeasure::GaussianKernel { t: 1.5 },
    ];
    let mut mismatches = 0;
    let mut cases = 0;
    for &n in &[5usize, 20, 60, 200] {
        for integer in [false, true] {
            let dim = r.random_range(2..8);
            let values: Vec<f64> = (0..n * dim)
                .map(|_| if integer { r.random_range(1..4) as f64 } else { r.random_range(-1.0..1.0) })
                .collect();
            let x = FeatureMatrix::new(n, dim, values).unwrap();
            for m in measures {
                let k = r.random_range(1..n.min(8));
                let got: BTreeSet<Edge> = build_semantic_graph(&x, &SemanticGraphConfig { k, measure: m }).unwrap().edges().collect();
                cases += 1;
                if got != brute_knn(&x, k, m) {
                    mismatches += 1;
                }
            }
        }
    }
    let (x, labels) = synthetic::gaussian_clusters(200, 2, 8, 10.0, 0.5, 5).unwrap();
    let mut worst = 1.0f64;
    for m in measures {
        let g = build_semantic_graph(&x, &SemanticGraphConfig { k: 5, measure: m }).unwrap();
        let intra = g.edges().filter(|&(a, b)| labels[a] == labels[b]).count() as f64 / g.edge_count() as f64;
        worst = worst.min(intra);
    }
    verdict(
        mismatches == 0 && worst >= 0.9,
        format!("{mismatches}/{cases} brute-force mismatches, min intra-cluster fraction {worst:.3}"),
    )
}

// 6 -------------------------------------------------------------------------

fn fusion_invariants() -> Verdict {
    let mut r = rng_from(6);
    let (h, h_att) = (8, 4);
    let mut sum_err = 0.0f64;
    let mut shift_err = 0.0f64;
    for _ in 0..10_000 {
        let mut p = FusionParams::new(h, h_att, &mut r);
        let scale = r.random_range(0.1..20.0);
        for x in p.w.value.as_mut_slice().iter_mut().chain(p.q.value.as_mut_slice()) {
            *x *= scale;
        }
        let z_t: Vec<f64> = (0..h).map(|_| r.random_range(-5.0..5.0)).collect();
        let z_s: Vec<f64> = (0..h).map(|_| r.random_range(-5.0..5.0)).collect();
        let pair = attention_fuse(&p, &z_t, &z_s).unwrap();
        sum_err = sum_err.max((pair.weights.0 + pair.weights.1 - 1.0).abs());
        let c = r.random_range(-50.0..50.0);
        let shifted = softmax2(pair.scores.0 + c, pair.scores.1 + c);
        shift_err = shift_err.max((shifted.0 - pair.weights.0).abs()).max((shifted.1 - pair.weights.1).abs());
    }
    let mut zero = FusionParams::new(h, h_att, &mut r);
    zero.w = Parameter::new(Matrix::zeros(h_att, h));
    let z: Vec<f64> = (0..h).map(|i| i as f64).collect();
    let neg: Vec<f64> = z.iter().map(|x| -3.0 * x).collect();
    let w0 = attention_fuse(&zero, &z, &neg).unwrap().weights;
    verdict(
        sum_err <= 1e-12 && shift_err <= 1e-12 && w0 == (0.5, 0.5),
        format!("max |sum-1| {sum_err:.1e}, max shift drift {shift_err:.1e}, W=0 weights {w0:?}"),
    )
}

// 7 -------------------------------------------------------------------------

fn channel_summary(r: &ChannelReports) -> String {
    format!(
        "fused auc {:.4} ap {:.4}; topology {:.4}; semantic {:.4}",
        r.fused.auc, r.fused.ap, r.topology.auc, r.semantic.auc
    )
}

fn citation_end_to_end() -> Verdict {
    let d = synthetic::citation_like(&Default::default(), 0).unwrap();
    let split = split_edges(&d.graph, SplitRatios::default(), 2).unwrap();
    let out = run_bsal(&split, &d.features, &BsalConfig::with_seed(2), &d.name).unwrap();
    let r = &out.reports;
    let headline = r.fused.auc >= 0.85 && r.fused.ap >= 0.85;
    let fallback = r.fused.auc >= r.topology.auc.max(r.semantic.auc) - 0.02;
    verdict(
        headline || fallback,
        format!(
            "{} nodes, {} edges; {}{}",
            d.graph.node_count(),
            d.graph.edge_count(),
            channel_summary(r),
            if headline { "" } else { " (headline missed; fallback rule)" }
        ),
    )
}

// 8 -------------------------------------------------------------------------

fn complementarity() -> Verdict {
    let run = |d: &synthetic::Dataset| {
        let split = split_edges(&d.graph, SplitRatios::default(), 2).unwrap();
        run_bsal(&split, &d.features, &BsalConfig::with_seed(0), &d.name).unwrap().reports
    };
    let a = run(&synthetic::topology_informative(0).unwrap());
    let b = run(&synthetic::feature_informative(0).unwrap());
    let a_ok = a.topology.auc - a.semantic.auc >= 0.05 && a.fused.auc >= a.topology.auc.max(a.semantic.auc) - 0.02;
    let b_ok = b.semantic.auc - b.topology.auc >= 0.05 && b.fused.auc >= b.topology.auc.max(b.semantic.auc) - 0.02;
    verdict(
        a_ok && b_ok,
        format!("A: {} | B: {}", channel_summary(&a), channel_summary(&b)),
    )
}

// 9 -------------------------------------------------------------------------

fn bsal(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_bsal")).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "bsal {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn without_wall_time(path: &Path) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("wall_time");
    v
}

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let base = tmp.path();
    let data = base.join("data");
    let data_s = data.to_str().unwrap();
    bsal(&["generate", "feature-informative", "--out-dir", data_s, "--seed", "7"]);
    let edges = data.join("feature-informative.edges");
    let features = data.join("feature-informative.features.csv");
    for run in ["run1", "run2"] {
        let dir = base.join(run);
        let dir_s = dir.to_str().unwrap();
        bsal(&["split", "--edges", edges.to_str().unwrap(), "--out-dir", dir_s, "--seed", "7"]);
        let split = dir.join("split.json");
        bsal(&["baseline", "node2vec", "--split", split.to_str().unwrap(), "--out-dir", dir_s, "--seed", "7", "--dim", "16"]);
        bsal(&[
            "train-bsal",
            "--split",
            split.to_str().unwrap(),
            "--features",
            features.to_str().unwrap(),
            "--out-dir",
            dir_s,
            "--seed",
            "7",
            "--epochs",
            "4",
        ]);
    }
    let (r1, r2) = (base.join("run1"), base.join("run2"));
    let mut differing = Vec::new();
    for f in ["split.json", "model.ckpt", "semantic.edges", "semantic_embedding.bin", "training_log.json", "run_config.json"] {
        if std::fs::read(r1.join(f)).unwrap() != std::fs::read(r2.join(f)).unwrap() {
            differing.push(f);
        }
    }
    for f in ["report_node2vec.json", "report_bsal.json", "report_bsal_topology.json", "report_bsal_semantic.json"] {
        if without_wall_time(&r1.join(f)) != without_wall_time(&r2.join(f)) {
            differing.push(f);
        }
    }
    verdict(differing.is_empty(), format!("10 artifacts compared, differing: {differing:?}"))
}

fn main() {
    let criteria: Vec<(&str, u64, fn() -> Verdict)> = vec![
        ("1 heuristic AUC on a random tree", 5, tree_heuristics),
        ("2 AUC/AP against brute force", 10, metric_oracles),
        ("3 gradient checks", 60, gradient_checks),
        ("4 DRNL against BFS distances", 10, drnl_oracle),
        ("5 kNN semantic graph oracle", 30, knn_oracle),
        ("6 fusion weight invariants", 60, fusion_invariants),
        ("7 end-to-end on Cora-format data", 30 * 60, citation_end_to_end),
        ("8 channel complementarity", 10 * 60, complementarity),
        ("9 identical-seed determinism", 10 * 60, determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, limit, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let v = timed(Duration::from_secs(limit), run);
        println!("[{}] {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
