//! Ranking metrics, per-run reports and multi-run aggregation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, EdgeSplit, Stage};

fn check_scores(name: &str, s: &[f64]) -> Result<()> {
    if s.is_empty() {
        return Err(Error::validation(format!("{name} score list is empty")));
    }
    if s.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation(format!("{name} scores contain a non-finite value")));
    }
    Ok(())
}

/// Probability that a random positive outscores a random negative, ties
/// counted half. Exact: wins and ties are counted as integers.
pub fn auc(pos: &[f64], neg: &[f64]) -> Result<f64> {
    check_scores("positive", pos)?;
    check_scores("negative", neg)?;
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Walk ascending; each positive beats every negative strictly below it.
    let (mut wins, mut ties): (u128, u128) = (0, 0);
    let mut neg_below: u128 = 0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        let (mut p, mut n) = (0u128, 0u128);
        while j < all.len() && all[j].0 == all[i].0 {
            if all[j].1 {
                p += 1;
            } else {
                n += 1;
            }
            j += 1;
        }
        wins += p * neg_below;
        ties += p * n;
        neg_below += n;
        i = j;
    }
    let total = 2 * pos.len() as u128 * neg.len() as u128;
    Ok((2 * wins + ties) as f64 / total as f64)
}

/// Average precision with tied scores processed as one block.
pub fn average_precision(pos: &[f64], neg: &[f64]) -> Result<f64> {
    check_scores("positive", pos)?;
    if neg.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation("negative scores contain a non-finite value"));
    }
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0));
    let total_pos = pos.len() as f64;
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut ap = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        let mut block_pos = 0;
        while j < all.len() && all[j].0 == all[i].0 {
            block_pos += all[j].1 as usize;
            j += 1;
        }
        tp += block_pos;
        seen += j - i;
        ap += (block_pos as f64 / total_pos) * (tp as f64 / seen as f64);
        i = j;
    }
    Ok(ap)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub dataset: String,
    pub stage: Stage,
    pub auc: f64,
    pub ap: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    pub seed: u64,
    pub wall_time: f64,
}

impl EvalReport {
    pub fn from_scores(method: &str, dataset: &str, stage: Stage, seed: u64, pos: &[f64], neg: &[f64]) -> Result<Self> {
        Ok(EvalReport {
            method: method.to_string(),
            dataset: dataset.to_string(),
            stage,
            auc: auc(pos, neg)?,
            ap: average_precision(pos, neg)?,
            n_pos: pos.len(),
            n_neg: neg.len(),
            seed,
            wall_time: 0.0,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Scores one stage's positives and negatives with `scorer`.
pub fn evaluate<F>(scorer: F, split: &EdgeSplit, stage: Stage, method: &str, dataset: &str) -> Result<EvalReport>
where
    F: Fn(&[Edge]) -> Result<Vec<f64>>,
{
    let pos = scorer(split.positives(stage))?;
    let neg = scorer(split.negatives(stage))?;
    EvalReport::from_scores(method, dataset, stage, split.seed, &pos, &neg)
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: String,
    pub dataset: String,
    pub runs: usize,
    pub auc_mean: f64,
    pub auc_std: f64,
    pub ap_mean: f64,
    pub ap_std: f64,
}

/// Groups reports by (dataset, method). Mixing datasets is rejected unless
/// `group_by_dataset` is set.
pub fn aggregate(reports: &[EvalReport], group_by_dataset: bool) -> Result<Vec<AggregateRow>> {
    if reports.is_empty() {
        return Err(Error::validation("no reports to aggregate"));
    }
    let first = &reports[0].dataset;
    if !group_by_dataset {
        if let Some(r) = reports.iter().find(|r| &r.dataset != first) {
            return Err(Error::validation(format!(
                "reports mix datasets '{first}' and '{}'; group by dataset to combine them",
                r.dataset
            )));
        }
    }
    let mut groups: BTreeMap<(String, String), Vec<&EvalReport>> = BTreeMap::new();
    for r in reports {
        groups.entry((r.dataset.clone(), r.method.clone())).or_default().push(r);
    }
    Ok(groups
        .into_iter()
        .map(|((dataset, method), rs)| {
            let aucs: Vec<f64> = rs.iter().map(|r| r.auc).collect();
            let aps: Vec<f64> = rs.iter().map(|r| r.ap).collect();
            let (auc_mean, auc_std) = mean_std(&aucs);
            let (ap_mean, ap_std) = mean_std(&aps);
            AggregateRow {
                method,
                dataset,
                runs: rs.len(),
                auc_mean,
                auc_std,
                ap_mean,
                ap_std,
            }
        })
        .collect())
}

fn cell(mean: f64, std: f64) -> String {
    format!("{:.2} ± {:.2}", 100.0 * mean, 100.0 * std)
}

/// Aligned text table: an AUC block then an AP block, methods as rows and
/// datasets as columns, values in percent.
pub fn render_table(rows: &[AggregateRow]) -> String {
    let mut datasets: Vec<&str> = rows.iter().map(|r| r.dataset.as_str()).collect();
    datasets.sort_unstable();
    datasets.dedup();
    let mut methods: Vec<&str> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let lookup = |m: &str, d: &str| rows.iter().find(|r| r.method == m && r.dataset == d);
    let mut out = String::new();
    for (title, pick) in [
        ("AUC", (|r: &AggregateRow| (r.auc_mean, r.auc_std)) as fn(&AggregateRow) -> (f64, f64)),
        ("AP", |r: &AggregateRow| (r.ap_mean, r.ap_std)),
    ] {
        let mut grid: Vec<Vec<String>> = vec![std::iter::once(title.to_string())
            .chain(datasets.iter().map(|d| d.to_string()))
            .collect()];
        for m in &methods {
            let mut line = vec![m.to_string()];
            for d in &datasets {
                line.push(lookup(m, d).map_or("-".to_string(), |r| {
                    let (mu, sd) = pick(r);
                    cell(mu, sd)
                }));
            }
            grid.push(line);
        }
        let widths: Vec<usize> = (0..grid[0].len())
            .map(|c| grid.iter().map(|l| l[c].chars().count()).max().unwrap_or(0))
            .collect();
        if !out.is_empty() {
            out.push('\n');
        }
        for (i, line) in grid.iter().enumerate() {
            let mut text = String::new();
            for (c, v) in line.iter().enumerate() {
                let pad = widths[c] - v.chars().count();
                if c == 0 {
                    let _ = write!(text, "{v}{}", " ".repeat(pad));
                } else {
                    let _ = write!(text, "  {}{v}", " ".repeat(pad));
                }
            }
            out.push_str(text.trim_end());
            out.push('\n');
            if i == 0 {
                let total: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
                out.push_str(&"-".repeat(total));
                out.push('\n');
            }
        }
    }
    out
}

pub fn render_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from("method,dataset,runs,auc_mean,auc_std,ap_mean,ap_std\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.method, r.dataset, r.runs, r.auc_mean, r.auc_std, r.ap_mean, r.ap_std
        );
    }
    out
}
