use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use bsal::embedding::{node2vec, EmbeddingMatrix, SkipGramConfig, WalkConfig};
use bsal::eval::{aggregate, evaluate, render_csv, render_table, EvalReport};
use bsal::graph::{load_edge_list, load_features, split_edges, EdgeSplit, FeatureMatrix, Graph, SplitManifest, SplitRatios};
use bsal::heuristics::{score_edges, Heuristic, PprConfig};
use bsal::neural::model::BsalModel;
use bsal::pipeline::{channel_reports, embedding_scores, run_bsal, BsalConfig, ChannelReports};
use bsal::rng::substream;
use bsal::semantic::{build_semantic_graph, default_k, median_bandwidth, SemanticGraphConfig, SimilarityMeasure};
use bsal::subgraph::SubgraphConfig;
use bsal::synthetic;

use crate::config::{pick, FileConfig};
use crate::error::Failure;
use crate::{
    BaselineArgs, Cli, Command, EmbedArgs, EvaluateArgs, GenerateArgs, Method, ReportArgs, SemanticArgs, SemanticOpts,
    SplitArgs, SubgraphOpts, Synthetic, TrainArgs, WalkArgs,
};

const DEFAULT_SEED: u64 = 2;

type Outcome = Result<(), Failure>;

struct Ctx {
    out_dir: PathBuf,
    seed: Option<u64>,
    file: FileConfig,
}

impl Ctx {
    fn seed_or(&self, fallback: u64) -> u64 {
        self.seed.or(self.file.seed).unwrap_or(fallback)
    }

    fn output(&self, explicit: Option<&PathBuf>, default_name: &str) -> Result<PathBuf, Failure> {
        let path = explicit.cloned().unwrap_or_else(|| self.out_dir.join(default_name));
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)
                .with_context(|| format!("cannot create directory {}", parent.display()))
                .map_err(Failure::usage)?;
        }
        Ok(path)
    }
}

pub fn run(cli: Cli) -> Outcome {
    let file = FileConfig::load(cli.config.as_deref())?;
    let ctx = Ctx {
        out_dir: cli.out_dir.or_else(|| file.out_dir.clone()).unwrap_or_else(|| PathBuf::from(".")),
        seed: cli.seed,
        file,
    };
    match cli.command {
        Command::Split(a) => cmd_split(&ctx, a),
        Command::Baseline(a) => cmd_baseline(&ctx, a),
        Command::SemanticGraph(a) => cmd_semantic_graph(&ctx, a),
        Command::Embed(a) => cmd_embed(&ctx, a),
        Command::TrainBsal(a) => cmd_train(&ctx, a),
        Command::Evaluate(a) => cmd_evaluate(&ctx, a),
        Command::Report(a) => cmd_report(&ctx, a),
        Command::Generate(a) => cmd_generate(&ctx, a),
    }
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .with_context(|| format!("cannot open {}", path.display()))
        .map_err(Failure::usage)
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(Failure::usage)
}

fn write_with<F>(path: &Path, body: F) -> Outcome
where
    F: FnOnce(&mut BufWriter<File>) -> bsal::Result<()>,
{
    let file = File::create(path)
        .with_context(|| format!("cannot create {}", path.display()))
        .map_err(Failure::usage)?;
    let mut w = BufWriter::new(file);
    body(&mut w)?;
    w.flush()
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(Failure::usage)
}

fn write_text(path: &Path, text: &str) -> Outcome {
    write_with(path, |w| Ok(w.write_all(text.as_bytes())?))
}

fn in_context(e: bsal::Error, path: &Path) -> Failure {
    let mut f = Failure::from(e);
    f.error = f.error.context(format!("in {}", path.display()));
    f
}

fn load_split(path: &Path) -> Result<EdgeSplit, Failure> {
    let text = read_text(path)?;
    let manifest = SplitManifest::from_json(&text).map_err(|e| in_context(e, path))?;
    EdgeSplit::from_manifest(manifest).map_err(|e| in_context(e, path))
}

fn load_feature_file(path: &Path, nodes: usize) -> Result<FeatureMatrix, Failure> {
    load_features(open(path)?, &Graph::empty(nodes)).map_err(|e| in_context(e, path))
}

fn dataset_name(explicit: Option<String>, file: &FileConfig, split_path: &Path) -> String {
    explicit.or_else(|| file.dataset.clone()).unwrap_or_else(|| {
        split_path
            .file_stem()
            .map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned())
    })
}

fn write_report(path: &Path, report: &EvalReport) -> Outcome {
    write_text(path, &(report.to_json()? + "\n"))
}

fn print_report(r: &EvalReport) {
    println!("{:<16} {:<14} auc {:.4}  ap {:.4}  ({} pos, {} neg)", r.method, r.dataset, r.auc, r.ap, r.n_pos, r.n_neg);
}

fn cmd_split(ctx: &Ctx, a: SplitArgs) -> Outcome {
    let graph = load_edge_list(open(&a.edges)?, a.nodes).map_err(|e| in_context(e, &a.edges))?;
    let d = SplitRatios::default();
    let f = &ctx.file;
    let ratios = SplitRatios {
        train: pick(a.train_ratio, f.train_ratio, d.train),
        val: pick(a.val_ratio, f.val_ratio, d.val),
        test: pick(a.test_ratio, f.test_ratio, d.test),
    };
    let split = split_edges(&graph, ratios, ctx.seed_or(DEFAULT_SEED))?;
    let out = ctx.output(a.out.as_ref(), "split.json")?;
    write_text(&out, &(split.to_manifest().to_json()? + "\n"))?;
    println!(
        "{} nodes, {} edges -> train {}/{}, val {}/{}, test {}/{} (pos/neg), seed {}",
        graph.node_count(),
        graph.edge_count(),
        split.train_pos.len(),
        split.train_neg.len(),
        split.val_pos.len(),
        split.val_neg.len(),
        split.test_pos.len(),
        split.test_neg.len(),
        split.seed
    );
    println!("wrote {}", out.display());
    Ok(())
}

fn walk_configs(w: &WalkArgs, f: &FileConfig, seed: u64, stream: &str) -> (WalkConfig, SkipGramConfig) {
    let (dw, ds) = (WalkConfig::default(), SkipGramConfig::default());
    let walk = WalkConfig {
        walks_per_node: pick(w.walks_per_node, f.walks_per_node, dw.walks_per_node),
        walk_length: pick(w.walk_length, f.walk_length, dw.walk_length),
        p: pick(w.p, f.p, dw.p),
        q: pick(w.q, f.q, dw.q),
        seed: substream(seed, &format!("{stream}/walks")),
    };
    let sg = SkipGramConfig {
        dim: pick(w.dim, f.dim, ds.dim),
        window: pick(w.window, f.window, ds.window),
        negatives_per_positive: pick(w.negatives, f.negatives, ds.negatives_per_positive),
        learning_rate: pick(w.sg_learning_rate, f.sg_learning_rate, ds.learning_rate),
        epochs: pick(w.sg_epochs, f.sg_epochs, ds.epochs),
        seed: substream(seed, &format!("{stream}/skipgram")),
        threads: pick(w.threads, f.threads, ds.threads),
    };
    (walk, sg)
}

fn cmd_baseline(ctx: &Ctx, a: BaselineArgs) -> Outcome {
    let split = load_split(&a.split)?;
    let seed = ctx.seed_or(split.seed);
    let f = &ctx.file;
    let dataset = dataset_name(a.dataset.clone(), f, &a.split);
    let started = Instant::now();
    let observed = &split.observed_graph;
    let mut report = match a.method {
        Method::Cn | Method::Aa | Method::Ppr => {
            let dp = PprConfig::default();
            let h = match a.method {
                Method::Cn => Heuristic::CommonNeighbors,
                Method::Aa => Heuristic::AdamicAdar,
                _ => Heuristic::Ppr(PprConfig {
                    damping: pick(a.damping, f.damping, dp.damping),
                    tolerance: pick(a.tolerance, f.tolerance, dp.tolerance),
                    max_iters: pick(a.max_iters, f.max_iters, dp.max_iters),
                }),
            };
            evaluate(|pairs| score_edges(observed, &h, pairs), &split, a.stage.into(), h.name(), &dataset)?
        }
        Method::Node2vec => {
            let (walk, sg) = walk_configs(&a.walk, f, seed, "baseline");
            let emb = node2vec(observed, &walk, &sg)?;
            evaluate(|pairs| embedding_scores(&emb, pairs), &split, a.stage.into(), "node2vec", &dataset)?
        }
    };
    report.seed = seed;
    report.wall_time = started.elapsed().as_secs_f64();
    let name = format!("report_{}.json", report.method.to_lowercase());
    let out = ctx.output(a.out.as_ref(), &name)?;
    write_report(&out, &report)?;
    print_report(&report);
    println!("wrote {}", out.display());
    Ok(())
}

fn parse_measure(name: &str, bandwidth: Option<f64>, features: &FeatureMatrix, seed: u64) -> Result<SimilarityMeasure, Failure> {
    let m = match name.to_ascii_lowercase().replace('-', "_").as_str() {
        "inner_product" | "inner" => SimilarityMeasure::InnerProduct,
        "euclidean" | "euclidean_distance" => SimilarityMeasure::EuclideanDistance,
        "cosine" => SimilarityMeasure::Cosine,
        "gaussian" | "gaussian_kernel" => SimilarityMeasure::GaussianKernel {
            t: bandwidth.unwrap_or_else(|| median_bandwidth(features, substream(seed, "bandwidth"))),
        },
        other => {
            return Err(Failure::usage(anyhow!(
                "unknown similarity measure '{other}' (expected inner-product, euclidean, cosine or gaussian)"
            )))
        }
    };
    m.validate()?;
    Ok(m)
}

fn semantic_settings(
    opts: &SemanticOpts,
    f: &FileConfig,
    split: &EdgeSplit,
    features: &FeatureMatrix,
    seed: u64,
) -> Result<SemanticGraphConfig, Failure> {
    let name = opts.measure.clone().or_else(|| f.measure.clone()).unwrap_or_else(|| "euclidean".into());
    let measure = parse_measure(&name, opts.bandwidth.or(f.bandwidth), features, seed)?;
    let k = opts.k.or(f.k).unwrap_or_else(|| default_k(&split.full_graph()));
    Ok(SemanticGraphConfig { k, measure })
}

fn cmd_semantic_graph(ctx: &Ctx, a: SemanticArgs) -> Outcome {
    let split = load_split(&a.split)?;
    let features = load_feature_file(&a.features, split.node_count())?;
    let seed = ctx.seed_or(split.seed);
    let cfg = semantic_settings(&a.semantic, &ctx.file, &split, &features, seed)?;
    let graph = build_semantic_graph(&features, &cfg)?;
    let out = ctx.output(a.out.as_ref(), "semantic.edges")?;
    write_with(&out, |w| graph.write_edge_list(w))?;
    println!(
        "semantic graph: k {}, measure {}, {} edges",
        cfg.k,
        cfg.measure.name(),
        graph.edge_count()
    );
    println!("wrote {}", out.display());
    Ok(())
}

fn write_embedding(prefix: &Path, emb: &EmbeddingMatrix) -> Outcome {
    write_with(&prefix.with_extension("bin"), |w| emb.write_binary(w))?;
    write_with(&prefix.with_extension("csv"), |w| emb.write_csv(w))
}

fn cmd_embed(ctx: &Ctx, a: EmbedArgs) -> Outcome {
    let (graph, seed) = match (&a.edges, &a.split) {
        (Some(edges), _) => {
            let g = load_edge_list(open(edges)?, a.nodes).map_err(|e| in_context(e, edges))?;
            (g, ctx.seed_or(DEFAULT_SEED))
        }
        (None, Some(split)) => {
            let s = load_split(split)?;
            let seed = ctx.seed_or(s.seed);
            (s.observed_graph, seed)
        }
        (None, None) => return Err(Failure::usage(anyhow!("either --edges or --split is required"))),
    };
    let (walk, sg) = walk_configs(&a.walk, &ctx.file, seed, "embed");
    let emb = node2vec(&graph, &walk, &sg)?;
    let prefix = ctx.output(a.out.as_ref(), "embedding")?;
    write_embedding(&prefix, &emb)?;
    println!("embedded {} nodes in {} dims", emb.rows(), emb.dim());
    println!("wrote {}.bin and .csv", prefix.display());
    Ok(())
}

fn subgraph_config(o: &SubgraphOpts, f: &FileConfig, seed: u64) -> SubgraphConfig {
    let d = SubgraphConfig::default();
    SubgraphConfig {
        hop: pick(o.hop, f.hop, d.hop),
        max_nodes: pick(o.max_nodes, f.max_nodes, d.max_nodes),
        seed: substream(seed, "subgraph"),
    }
}

fn bsal_config(a: &TrainArgs, f: &FileConfig, seed: u64, semantic: SemanticGraphConfig) -> BsalConfig {
    let mut cfg = BsalConfig::with_seed(seed);
    let (walk, sg) = walk_configs(&a.walk, f, seed, "semantic");
    cfg.k = Some(semantic.k);
    cfg.measure = semantic.measure;
    cfg.walk = walk;
    cfg.skipgram = sg;
    cfg.subgraph = subgraph_config(&a.subgraph, f, seed);
    let m = cfg.model.clone();
    cfg.model.semantic_dim = sg.dim;
    cfg.model.hidden = a.hidden.clone().or_else(|| f.hidden.clone()).unwrap_or(m.hidden);
    cfg.model.pair_dim = pick(a.pair_dim, f.pair_dim, m.pair_dim);
    cfg.model.attention_dim = pick(a.attention_dim, f.attention_dim, m.attention_dim);
    cfg.model.pair_product = pick(a.pair_product, f.pair_product, m.pair_product);
    cfg.model.alpha = pick(a.alpha, f.alpha, m.alpha);
    cfg.model.beta = pick(a.beta, f.beta, m.beta);
    let t = cfg.train;
    cfg.train.batch_size = pick(a.batch_size, f.batch_size, t.batch_size);
    cfg.train.epochs = pick(a.epochs, f.epochs, t.epochs);
    cfg.train.patience = pick(a.patience, f.patience, t.patience);
    cfg.train.learning_rate = pick(a.learning_rate, f.learning_rate, t.learning_rate);
    cfg
}

fn write_channel_reports(ctx: &Ctx, prefix: &str, explicit: Option<&PathBuf>, reports: &ChannelReports, wall_time: f64) -> Outcome {
    for (suffix, r) in [("", &reports.fused), ("_topology", &reports.topology), ("_semantic", &reports.semantic)] {
        let mut r = r.clone();
        r.wall_time = wall_time;
        let path = match explicit {
            Some(p) => {
                let mut s = p.clone().into_os_string();
                s.push(format!("{suffix}.json"));
                ctx.output(Some(&PathBuf::from(s)), "")?
            }
            None => ctx.output(None, &format!("{prefix}{suffix}.json"))?,
        };
        write_report(&path, &r)?;
        print_report(&r);
    }
    Ok(())
}

fn cmd_train(ctx: &Ctx, a: TrainArgs) -> Outcome {
    let split = load_split(&a.split)?;
    let features = load_feature_file(&a.features, split.node_count())?;
    let seed = ctx.seed_or(split.seed);
    let f = &ctx.file;
    let dataset = dataset_name(a.dataset.clone(), f, &a.split);
    let semantic = semantic_settings(&a.semantic, f, &split, &features, seed)?;
    let cfg = bsal_config(&a, f, seed, semantic);
    let started = Instant::now();
    let out = run_bsal(&split, &features, &cfg, &dataset)?;
    let wall_time = started.elapsed().as_secs_f64();

    let config_path = ctx.output(None, "run_config.json")?;
    write_text(
        &config_path,
        &(serde_json::to_string_pretty(&cfg).map_err(bsal::Error::from)? + "\n"),
    )?;
    write_with(&ctx.output(None, "semantic.edges")?, |w| out.semantic_graph.write_edge_list(w))?;
    write_embedding(&ctx.output(None, "semantic_embedding")?, &out.semantic_embedding)?;
    write_with(&ctx.output(None, "model.ckpt")?, |w| out.model.write_checkpoint(w))?;
    write_text(
        &ctx.output(None, "training_log.json")?,
        &(serde_json::to_string_pretty(&out.log).map_err(bsal::Error::from)? + "\n"),
    )?;
    write_channel_reports(ctx, "report_bsal", None, &out.reports, wall_time)?;
    println!(
        "alpha {} beta {}; {} epochs, best epoch {}{}",
        out.log.alpha,
        out.log.beta,
        out.log.epochs.len(),
        out.log.best_epoch,
        if out.log.stopped_early { " (early stop)" } else { "" }
    );
    println!("wrote outputs to {}", ctx.out_dir.display());
    Ok(())
}

fn cmd_evaluate(ctx: &Ctx, a: EvaluateArgs) -> Outcome {
    let split = load_split(&a.split)?;
    let model = BsalModel::read_checkpoint(open(&a.checkpoint)?).map_err(|e| in_context(e, &a.checkpoint))?;
    let emb = EmbeddingMatrix::read_binary(open(&a.embedding)?).map_err(|e| in_context(e, &a.embedding))?;
    if emb.rows() != split.node_count() || emb.dim() != model.config.semantic_dim {
        return Err(Failure::usage(anyhow!(
            "embedding is {}x{} but the split has {} nodes and the model expects width {}",
            emb.rows(),
            emb.dim(),
            split.node_count(),
            model.config.semantic_dim
        )));
    }
    let seed = ctx.seed_or(split.seed);
    let dataset = dataset_name(a.dataset.clone(), &ctx.file, &a.split);
    let sub = subgraph_config(&a.subgraph, &ctx.file, seed);
    let started = Instant::now();
    let reports = channel_reports(&model, &split, a.stage.into(), &emb, &sub, &dataset)?;
    write_channel_reports(ctx, "eval", a.out.as_ref(), &reports, started.elapsed().as_secs_f64())
}

fn cmd_report(ctx: &Ctx, a: ReportArgs) -> Outcome {
    let mut reports = Vec::with_capacity(a.reports.len());
    for p in &a.reports {
        reports.push(EvalReport::from_json(&read_text(p)?).map_err(|e| in_context(e, p))?);
    }
    let rows = aggregate(&reports, a.group)?;
    let table = render_table(&rows);
    let prefix = ctx.output(a.out.as_ref(), "summary")?;
    write_text(&prefix.with_extension("txt"), &table)?;
    write_text(&prefix.with_extension("csv"), &render_csv(&rows))?;
    print!("{table}");
    Ok(())
}

fn cmd_generate(ctx: &Ctx, a: GenerateArgs) -> Outcome {
    let seed = ctx.seed_or(DEFAULT_SEED);
    let (name, graph, features) = match a.kind {
        Synthetic::Tree => {
            let g = synthetic::random_tree(1000, seed)?;
            let (x, _) = synthetic::gaussian_clusters(1000, 1, 8, 0.0, 1.0, seed)?;
            ("tree", g, x)
        }
        Synthetic::TopologyInformative => {
            let d = synthetic::topology_informative(seed)?;
            ("topology-informative", d.graph, d.features)
        }
        Synthetic::FeatureInformative => {
            let d = synthetic::feature_informative(seed)?;
            ("feature-informative", d.graph, d.features)
        }
        Synthetic::Citation => {
            let d = synthetic::citation_like(&Default::default(), seed)?;
            ("citation", d.graph, d.features)
        }
    };
    let prefix = ctx.output(a.out.as_ref(), name)?;
    let mut edges = prefix.clone().into_os_string();
    edges.push(".edges");
    let mut feats = prefix.into_os_string();
    feats.push(".features.csv");
    write_with(Path::new(&edges), |w| graph.write_edge_list(w))?;
    write_with(Path::new(&feats), |w| features.write_csv(w))?;
    println!("{} nodes, {} edges, {} features", graph.node_count(), graph.edge_count(), features.dim());
    println!("wrote {} and {}", Path::new(&edges).display(), Path::new(&feats).display());
    Ok(())
}
