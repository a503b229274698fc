//! Symmetric-KL alignment between contextual and language-universal
//! representations at sentence, sliding-window and mention granularity.

use serde::{Deserialize, Serialize};

use crate::corpus::Interval;
use crate::error::{Result, ShineError};
use crate::numerics::{Graph, ParamStore, Tensor, Var, LOG_EPS};

/// How a block of rows becomes a distribution over the hidden axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// Mean-pool the rows, then softmax.
    #[default]
    Block,
    /// Softmax every row and average the per-row divergences.
    Token,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Levels {
    pub global: bool,
    pub local: bool,
    pub task: bool,
}

impl Default for Levels {
    fn default() -> Self {
        Levels {
            global: true,
            local: true,
            task: true,
        }
    }
}

impl Levels {
    pub fn none() -> Self {
        Levels {
            global: false,
            local: false,
            task: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InteractionConfig {
    pub span_length: usize,
    pub alpha: f64,
    pub levels: Levels,
    pub pooling: Pooling,
}

impl Default for InteractionConfig {
    fn default() -> Self {
        InteractionConfig {
            span_length: 4,
            alpha: 10.0,
            levels: Levels::default(),
            pooling: Pooling::Block,
        }
    }
}

impl InteractionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.span_length == 0 {
            return Err(ShineError::Config("span_length must be at least 1".into()));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(ShineError::Config(format!("alpha {} must be a finite non-negative number", self.alpha)));
        }
        Ok(())
    }
}

/// Task-related mention intervals, inclusive on both ends.
pub type MentionSet = Vec<Interval>;

/// Per-level loss nodes. Disabled levels are `None`.
#[derive(Debug, Clone, Copy)]
pub struct LevelVars {
    pub global: Option<Var>,
    pub local: Option<Var>,
    pub task: Option<Var>,
    pub total: Var,
}

/// Per-level values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelValues {
    pub global: f64,
    pub local: f64,
    pub task: f64,
}

impl LevelValues {
    pub fn total(&self) -> f64 {
        self.global + self.local + self.task
    }
}

impl LevelVars {
    pub fn values(&self, g: &Graph) -> LevelValues {
        let get = |v: Option<Var>| v.map_or(0.0, |v| g.value(v).item());
        LevelValues {
            global: get(self.global),
            local: get(self.local),
            task: get(self.task),
        }
    }
}

/// Mean-pool then softmax over the hidden axis.
pub fn rep_to_distribution(rows: &Tensor) -> Result<Vec<f64>> {
    if rows.rows() == 0 || rows.cols() == 0 {
        return Err(ShineError::Empty("rep_to_distribution of an empty block".into()));
    }
    let store = ParamStore::new();
    let mut g = Graph::new(&store);
    let x = g.input(rows.clone())?;
    let p = pooled_distribution(&mut g, x)?;
    Ok(g.value(p).data().to_vec())
}

/// `KL(p‖q) + KL(q‖p)` with probabilities clamped at `1e-8` inside the logs.
pub fn sym_kl(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(ShineError::shape("sym_kl", &[p.len()], &[q.len()]));
    }
    Ok(p.iter()
        .zip(q)
        .map(|(&a, &b)| (a - b) * (a.max(LOG_EPS).ln() - b.max(LOG_EPS).ln()))
        .sum())
}

fn pooled_distribution(g: &mut Graph, block: Var) -> Result<Var> {
    let pooled = g.mean_rows(block)?;
    g.softmax(pooled)
}

/// Symmetric KL between two equally shaped matrices of row distributions,
/// averaged over rows.
pub fn sym_kl_graph(g: &mut Graph, p: Var, q: Var) -> Result<Var> {
    let rows = g.shape(p)[0] as f64;
    let diff = g.sub(p, q)?;
    let lp = g.log(p, LOG_EPS)?;
    let lq = g.log(q, LOG_EPS)?;
    let dl = g.sub(lp, lq)?;
    let terms = g.mul(diff, dl)?;
    let total = g.sum(terms)?;
    if rows == 1.0 {
        Ok(total)
    } else {
        g.scale(total, 1.0 / rows)
    }
}

fn block_kl(g: &mut Graph, h_c: Var, h_l: Var, rows: &[usize], pooling: Pooling) -> Result<Var> {
    let bc = g.gather_rows(h_c, rows)?;
    let bl = g.gather_rows(h_l, rows)?;
    let (p, q) = match pooling {
        Pooling::Block => (pooled_distribution(g, bc)?, pooled_distribution(g, bl)?),
        Pooling::Token => (g.softmax(bc)?, g.softmax(bl)?),
    };
    sym_kl_graph(g, p, q)
}

fn real_positions(g: &Graph, h_c: Var, h_l: Var, mask: &[bool]) -> Result<Vec<usize>> {
    if g.shape(h_c) != g.shape(h_l) {
        return Err(ShineError::shape("interaction", g.shape(h_c), g.shape(h_l)));
    }
    if g.shape(h_c)[0] != mask.len() {
        return Err(ShineError::shape("interaction", g.shape(h_c), &[mask.len()]));
    }
    Ok(mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect())
}

fn mean_of(g: &mut Graph, parts: Vec<Var>) -> Result<Var> {
    let n = parts.len() as f64;
    let mut acc = parts[0];
    for &p in &parts[1..] {
        acc = g.add(acc, p)?;
    }
    if n == 1.0 {
        Ok(acc)
    } else {
        g.scale(acc, 1.0 / n)
    }
}

/// Sentence level.
pub fn global_loss_graph(g: &mut Graph, h_c: Var, h_l: Var, mask: &[bool], pooling: Pooling) -> Result<Var> {
    let real = real_positions(g, h_c, h_l, mask)?;
    if real.is_empty() {
        return Err(ShineError::Empty("global interaction over a fully masked sentence".into()));
    }
    block_kl(g, h_c, h_l, &real, pooling)
}

/// Window level: stride-1 windows of `span_length` real tokens, averaged.
pub fn local_loss_graph(
    g: &mut Graph,
    h_c: Var,
    h_l: Var,
    span_length: usize,
    mask: &[bool],
    pooling: Pooling,
) -> Result<Var> {
    let real = real_positions(g, h_c, h_l, mask)?;
    if real.is_empty() {
        return Err(ShineError::Empty("local interaction over a fully masked sentence".into()));
    }
    let p = span_length.clamp(1, real.len());
    let windows = real
        .windows(p)
        .map(|w| block_kl(g, h_c, h_l, w, pooling))
        .collect::<Result<Vec<_>>>()?;
    mean_of(g, windows)
}

/// Mention level: average over mentions, zero without mentions.
pub fn task_loss_graph(
    g: &mut Graph,
    h_c: Var,
    h_l: Var,
    mentions: &[Interval],
    mask: &[bool],
    pooling: Pooling,
) -> Result<Var> {
    let real = real_positions(g, h_c, h_l, mask)?;
    if mentions.is_empty() {
        return g.input(Tensor::scalar(0.0));
    }
    let parts = mentions
        .iter()
        .map(|&(s, e)| {
            if s > e || e >= real.len() {
                return Err(ShineError::Range {
                    start: s,
                    end: e,
                    len: real.len(),
                });
            }
            block_kl(g, h_c, h_l, &real[s..=e], pooling)
        })
        .collect::<Result<Vec<_>>>()?;
    mean_of(g, parts)
}

/// Unweighted sum of the enabled levels.
pub fn interaction_loss_graph(
    g: &mut Graph,
    h_c: Var,
    h_l: Var,
    mentions: &[Interval],
    mask: &[bool],
    config: &InteractionConfig,
) -> Result<LevelVars> {
    let lv = &config.levels;
    let global = lv
        .global
        .then(|| global_loss_graph(g, h_c, h_l, mask, config.pooling))
        .transpose()?;
    let local = lv
        .local
        .then(|| local_loss_graph(g, h_c, h_l, config.span_length, mask, config.pooling))
        .transpose()?;
    let task = lv
        .task
        .then(|| task_loss_graph(g, h_c, h_l, mentions, mask, config.pooling))
        .transpose()?;
    let enabled: Vec<Var> = [global, local, task].into_iter().flatten().collect();
    let total = match enabled.split_first() {
        None => g.input(Tensor::scalar(0.0))?,
        Some((&first, rest)) => {
            let mut acc = first;
            for &v in rest {
                acc = g.add(acc, v)?;
            }
            acc
        }
    };
    Ok(LevelVars {
        global,
        local,
        task,
        total,
    })
}

fn evaluate<F>(h_c: &Tensor, h_l: &Tensor, f: F) -> Result<f64>
where
    F: FnOnce(&mut Graph, Var, Var, &[bool]) -> Result<Var>,
{
    let store = ParamStore::new();
    let mut g = Graph::new(&store);
    let c = g.input(h_c.clone())?;
    let l = g.input(h_l.clone())?;
    let mask = vec![true; h_c.rows()];
    let out = f(&mut g, c, l, &mask)?;
    Ok(g.value(out).item())
}

pub fn global_loss(h_c: &Tensor, h_l: &Tensor) -> Result<f64> {
    evaluate(h_c, h_l, |g, c, l, m| global_loss_graph(g, c, l, m, Pooling::Block))
}

pub fn local_loss(h_c: &Tensor, h_l: &Tensor, span_length: usize) -> Result<f64> {
    evaluate(h_c, h_l, |g, c, l, m| local_loss_graph(g, c, l, span_length, m, Pooling::Block))
}

pub fn task_loss(h_c: &Tensor, h_l: &Tensor, mentions: &[Interval]) -> Result<f64> {
    evaluate(h_c, h_l, |g, c, l, m| task_loss_graph(g, c, l, mentions, m, Pooling::Block))
}

pub fn interaction_loss(h_c: &Tensor, h_l: &Tensor, mentions: &[Interval], config: &InteractionConfig) -> Result<f64> {
    config.validate()?;
    evaluate(h_c, h_l, |g, c, l, m| {
        interaction_loss_graph(g, c, l, mentions, m, config).map(|v| v.total)
    })
}
