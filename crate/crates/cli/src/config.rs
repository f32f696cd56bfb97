//! Run configuration: a flat TOML file of `key = value` pairs, overridden
//! by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;

use crate::error::Failure;

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub dataset: Option<String>,

    pub train_ratio: Option<f64>,
    pub val_ratio: Option<f64>,
    pub test_ratio: Option<f64>,

    pub k: Option<usize>,
    pub measure: Option<String>,
    pub bandwidth: Option<f64>,

    pub walks_per_node: Option<usize>,
    pub walk_length: Option<usize>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub dim: Option<usize>,
    pub window: Option<usize>,
    pub negatives: Option<usize>,
    pub sg_learning_rate: Option<f64>,
    pub sg_epochs: Option<usize>,
    pub threads: Option<usize>,

    pub hop: Option<usize>,
    pub max_nodes: Option<usize>,

    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub patience: Option<usize>,
    pub learning_rate: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub hidden: Option<Vec<usize>>,
    pub pair_dim: Option<usize>,
    pub attention_dim: Option<usize>,
    pub pair_product: Option<bool>,

    pub damping: Option<f64>,
    pub tolerance: Option<f64>,
    pub max_iters: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))
            .map_err(Failure::usage)?;
        Self::parse(&text).map_err(|e| Failure::usage(e.context(format!("invalid config file {}", path.display()))))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }
}

/// First of flag, config value, default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}
