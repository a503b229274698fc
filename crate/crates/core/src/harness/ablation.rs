use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::{Ablation, TrainConfig, VARIANTS};
use super::train::{evaluate, train, RunReport};
use crate::corpus::Corpus;
use crate::error::{Result, ShineError};

/// One trained variant/seed and its F1 on every evaluation corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRun {
    pub variant: String,
    pub seed: u64,
    pub f1: BTreeMap<String, f64>,
    pub report: RunReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub variant: String,
    pub eval: String,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single seed.
    pub stdev: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub evals: Vec<String>,
    pub runs: Vec<AblationRun>,
    pub cells: Vec<AblationCell>,
}

pub fn mean_stdev(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

impl AblationTable {
    /// Aggregates runs into per-(variant, eval) cells, variants in table order.
    pub fn from_runs(evals: Vec<String>, runs: Vec<AblationRun>) -> Self {
        let mut cells = Vec::new();
        let mut variants: Vec<&str> = VARIANTS.iter().copied().filter(|v| runs.iter().any(|r| r.variant == *v)).collect();
        for r in &runs {
            if !variants.contains(&r.variant.as_str()) {
                variants.push(&r.variant);
            }
        }
        for v in variants {
            for e in &evals {
                let values: Vec<f64> = runs
                    .iter()
                    .filter(|r| r.variant == v)
                    .filter_map(|r| r.f1.get(e).copied())
                    .collect();
                let (mean, stdev) = mean_stdev(&values);
                cells.push(AblationCell {
                    variant: v.to_string(),
                    eval: e.clone(),
                    mean,
                    stdev,
                    runs: values.len(),
                });
            }
        }
        AblationTable { evals, runs, cells }
    }

    pub fn cell(&self, variant: &str, eval: &str) -> Option<&AblationCell> {
        self.cells.iter().find(|c| c.variant == variant && c.eval == eval)
    }

    /// Aligned text table of F1 × 100 as `mean ± stdev`.
    pub fn to_text(&self) -> String {
        let mut variants: Vec<&str> = Vec::new();
        for c in &self.cells {
            if !variants.contains(&c.variant.as_str()) {
                variants.push(&c.variant);
            }
        }
        let header: Vec<String> = std::iter::once("variant".to_string()).chain(self.evals.iter().cloned()).collect();
        let mut rows = vec![header];
        for v in variants {
            let mut row = vec![v.to_string()];
            for e in &self.evals {
                let c = self.cell(v, e).expect("cell per variant and eval");
                row.push(format!("{:.2} ± {:.2}", 100.0 * c.mean, 100.0 * c.stdev));
            }
            rows.push(row);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|j| rows.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in rows {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(j, (cell, &w))| {
                    let pad = w - cell.chars().count();
                    if j == 0 {
                        format!("{cell}{}", " ".repeat(pad))
                    } else {
                        format!("{}{cell}", " ".repeat(pad))
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        }
        out
    }
}

/// Trains every variant for every seed and scores each on the named corpora.
pub fn run_ablation(
    base: &TrainConfig,
    train_corpus: &Corpus,
    dev: &Corpus,
    evals: &[(&str, &Corpus)],
    seeds: &[u64],
    variants: &[&str],
) -> Result<AblationTable> {
    if seeds.is_empty() {
        return Err(ShineError::Config("an ablation needs at least one seed".into()));
    }
    let mut runs = Vec::new();
    for &variant in variants {
        let ablation = Ablation::variant(variant)?;
        for &seed in seeds {
            let cfg = TrainConfig {
                seed,
                ablation,
                checkpoint: None,
                ..base.clone()
            };
            let target_dev = evals.iter().find(|(n, _)| *n == "target").map(|(_, c)| *c);
            let (model, report) = train(&cfg, train_corpus, dev, target_dev)?;
            let mut f1 = BTreeMap::new();
            for (name, corpus) in evals {
                f1.insert(name.to_string(), evaluate(&model, corpus, seed)?.report.scores.f1);
            }
            runs.push(AblationRun {
                variant: variant.to_string(),
                seed,
                f1,
                report,
            });
        }
    }
    Ok(AblationTable::from_runs(
        evals.iter().map(|(n, _)| n.to_string()).collect(),
        runs,
    ))
}
