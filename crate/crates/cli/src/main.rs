//! `bsal` command-line tool.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "bsal", version, about = "Link prediction with topology and semantic channels")]
pub struct Cli {
    /// Directory for outputs whose path is not given explicitly.
    #[arg(long, global = true, env = "BSAL_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    /// TOML file of `key = value` settings; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed for every random stage.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Split an edge list into train/validation/test positives and negatives.
    Split(SplitArgs),
    /// Score a split with a heuristic or node2vec and write a report.
    Baseline(BaselineArgs),
    /// Build the kNN semantic graph from node features.
    SemanticGraph(SemanticArgs),
    /// Train node2vec embeddings on a graph.
    Embed(EmbedArgs),
    /// Train the two-channel model and evaluate it on the test split.
    TrainBsal(TrainArgs),
    /// Evaluate a saved checkpoint on a split.
    Evaluate(EvaluateArgs),
    /// Aggregate report files into mean ± std tables.
    Report(ReportArgs),
    /// Write a synthetic dataset (edge list and features).
    Generate(GenerateArgs),
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    /// Edge list: one `u v` pair per line, `#` comments.
    #[arg(long)]
    pub edges: PathBuf,
    /// Node count, when it exceeds the largest id plus one.
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub train_ratio: Option<f64>,
    #[arg(long)]
    pub val_ratio: Option<f64>,
    #[arg(long)]
    pub test_ratio: Option<f64>,
    /// Manifest path (default: <out-dir>/split.json).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Cn,
    Aa,
    Ppr,
    Node2vec,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum StageArg {
    Train,
    Val,
    Test,
}

impl From<StageArg> for bsal::graph::Stage {
    fn from(s: StageArg) -> Self {
        match s {
            StageArg::Train => bsal::graph::Stage::Train,
            StageArg::Val => bsal::graph::Stage::Val,
            StageArg::Test => bsal::graph::Stage::Test,
        }
    }
}

#[derive(Args, Debug, Default, Clone)]
pub struct WalkArgs {
    #[arg(long)]
    pub walks_per_node: Option<usize>,
    #[arg(long)]
    pub walk_length: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub negatives: Option<usize>,
    #[arg(long)]
    pub sg_learning_rate: Option<f64>,
    #[arg(long)]
    pub sg_epochs: Option<usize>,
    /// Skip-gram worker threads; values above 1 are not reproducible.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Args, Debug)]
pub struct BaselineArgs {
    #[arg(value_enum)]
    pub method: Method,
    #[arg(long)]
    pub split: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub stage: StageArg,
    /// Dataset name in the report (default: manifest file stem).
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub damping: Option<f64>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[command(flatten)]
    pub walk: WalkArgs,
    /// Report path (default: <out-dir>/report_<method>.json).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct SemanticOpts {
    /// Neighbors per node (default: rounded average degree of the graph).
    #[arg(long)]
    pub k: Option<usize>,
    /// inner-product | euclidean | cosine | gaussian
    #[arg(long)]
    pub measure: Option<String>,
    /// Gaussian kernel bandwidth (default: median pairwise distance).
    #[arg(long)]
    pub bandwidth: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SemanticArgs {
    /// Node features, one comma-separated row per node.
    #[arg(long)]
    pub features: PathBuf,
    /// Split manifest; fixes the node count and the default k.
    #[arg(long)]
    pub split: PathBuf,
    #[command(flatten)]
    pub semantic: SemanticOpts,
    /// Edge list path (default: <out-dir>/semantic.edges).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EmbedArgs {
    /// Graph to embed as an edge list.
    #[arg(long, conflicts_with = "split", required_unless_present = "split")]
    pub edges: Option<PathBuf>,
    /// Embed the observed (training) graph of a split manifest.
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long)]
    pub nodes: Option<usize>,
    #[command(flatten)]
    pub walk: WalkArgs,
    /// Output path without extension; `.bin` and `.csv` are written
    /// (default: <out-dir>/embedding).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct SubgraphOpts {
    #[arg(long)]
    pub hop: Option<usize>,
    #[arg(long)]
    pub max_nodes: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub split: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub dataset: Option<String>,
    #[command(flatten)]
    pub semantic: SemanticOpts,
    #[command(flatten)]
    pub walk: WalkArgs,
    #[command(flatten)]
    pub subgraph: SubgraphOpts,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Weight of the topology-channel loss.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Weight of the semantic-channel loss.
    #[arg(long)]
    pub beta: Option<f64>,
    /// GCN widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub pair_dim: Option<usize>,
    #[arg(long)]
    pub attention_dim: Option<usize>,
    /// Include the elementwise target product in the readout.
    #[arg(long)]
    pub pair_product: Option<bool>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub split: PathBuf,
    /// Semantic embedding written by `train-bsal` or `embed`.
    #[arg(long)]
    pub embedding: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub stage: StageArg,
    #[arg(long)]
    pub dataset: Option<String>,
    #[command(flatten)]
    pub subgraph: SubgraphOpts,
    /// Report path prefix (default: <out-dir>/eval).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Report JSON files.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    /// Allow reports from several datasets (one column each).
    #[arg(long)]
    pub group: bool,
    /// Output prefix for `.txt` and `.csv` (default: <out-dir>/summary).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Synthetic {
    /// Random recursive tree with 1000 nodes and Gaussian features.
    Tree,
    /// Planted partition topology, random features.
    TopologyInformative,
    /// Random in-cluster links, cluster-informative features.
    FeatureInformative,
    /// Citation-style graph in Cora format.
    Citation,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(value_enum)]
    pub kind: Synthetic,
    /// Output prefix; `.edges` and `.features.csv` are written
    /// (default: <out-dir>/<kind>).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
