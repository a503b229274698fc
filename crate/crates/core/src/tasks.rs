//! Output heads and training losses for tagging, pair classification and
//! distillation.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Interval, Mention, Schemas, Sentence};
use crate::encoder::Linear;
use crate::error::{Result, ShineError};
use crate::numerics::{Graph, ParamStore, Tensor, Var, LOG_EPS};

/// Label of the pair class meaning "no relation" / "not an argument".
pub const NONE_LABEL: &str = "None";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Ner,
    Relation,
    Earl,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Ner => "ner",
            Task::Relation => "relation",
            Task::Earl => "earl",
        }
    }

    /// Output labels of the task head.
    pub fn classes(self, schemas: &Schemas) -> Vec<String> {
        match self {
            Task::Ner => schemas.bio_tags(),
            Task::Relation => pair_classes(&schemas.relation),
            Task::Earl => pair_classes(&schemas.role),
        }
    }
}

impl std::str::FromStr for Task {
    type Err = ShineError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ner" => Ok(Task::Ner),
            "relation" => Ok(Task::Relation),
            "earl" => Ok(Task::Earl),
            other => Err(ShineError::Config(format!("unknown task {other:?}"))),
        }
    }
}

fn pair_classes(labels: &[String]) -> Vec<String> {
    std::iter::once(NONE_LABEL.to_string())
        .chain(labels.iter().filter(|l| *l != NONE_LABEL).cloned())
        .collect()
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct NerHead {
    pub linear: Linear,
    pub labels: Vec<String>,
}

impl NerHead {
    pub fn register<R: Rng>(store: &mut ParamStore, d_model: usize, labels: Vec<String>, rng: &mut R) -> Result<Self> {
        let linear = Linear::register(store, "head.ner", d_model, labels.len(), rng)?;
        Ok(NerHead { linear, labels })
    }

    pub fn encode_gold(&self, tags: &[String]) -> Result<Vec<usize>> {
        tags.iter()
            .map(|t| {
                self.labels
                    .iter()
                    .position(|l| l == t)
                    .ok_or_else(|| ShineError::Schema(format!("unknown tag {t:?}")))
            })
            .collect()
    }
}

/// Per-token label distributions, `L × K`.
pub fn ner_forward(g: &mut Graph, h_f: Var, head: &NerHead) -> Result<Var> {
    let logits = head.linear.forward(g, h_f)?;
    g.softmax(logits)
}

/// Mean cross-entropy over real tokens. `gold` covers the real prefix.
pub fn ner_loss_graph(g: &mut Graph, probs: Var, gold: &[usize]) -> Result<Var> {
    let (rows, k) = (g.shape(probs)[0], g.shape(probs)[1]);
    if gold.is_empty() || gold.len() > rows {
        return Err(ShineError::shape("ner_loss", g.shape(probs), &[gold.len()]));
    }
    let mut pick = Tensor::zeros(rows, k);
    for (i, &y) in gold.iter().enumerate() {
        if y >= k {
            return Err(ShineError::Schema(format!("gold label {y} outside {k} classes")));
        }
        pick.set(i, y, 1.0);
    }
    let logp = g.log(probs, LOG_EPS)?;
    let picked = g.mul_const(logp, pick)?;
    let total = g.sum(picked)?;
    g.scale(total, -1.0 / gold.len() as f64)
}

pub fn ner_loss(probs: &Tensor, gold: &[usize]) -> Result<f64> {
    let store = ParamStore::new();
    let mut g = Graph::new(&store);
    let p = g.input(probs.clone())?;
    let loss = ner_loss_graph(&mut g, p, gold)?;
    Ok(g.value(loss).item())
}

/// Mean squared difference over the first `len` tokens and every label.
pub fn distill_loss_graph(g: &mut Graph, teacher: Var, student: Var, len: usize) -> Result<Var> {
    if g.shape(teacher) != g.shape(student) {
        return Err(ShineError::shape("distill_loss", g.shape(teacher), g.shape(student)));
    }
    let (rows, k) = (g.shape(student)[0], g.shape(student)[1]);
    if len == 0 || len > rows {
        return Err(ShineError::shape("distill_loss", g.shape(student), &[len]));
    }
    let diff = g.sub(teacher, student)?;
    let diff = if len < rows {
        let mut keep = Tensor::zeros(rows, k);
        for r in 0..len {
            keep.row_mut(r).fill(1.0);
        }
        g.mul_const(diff, keep)?
    } else {
        diff
    };
    let sq = g.mul(diff, diff)?;
    let total = g.sum(sq)?;
    g.scale(total, 1.0 / (len * k) as f64)
}

pub fn distill_loss(teacher: &Tensor, student: &Tensor) -> Result<f64> {
    let store = ParamStore::new();
    let mut g = Graph::new(&store);
    let t = g.input(teacher.clone())?;
    let s = g.input(student.clone())?;
    let loss = distill_loss_graph(&mut g, t, s, teacher.rows())?;
    Ok(g.value(loss).item())
}

#[derive(Debug, Clone)]
pub struct PairHead {
    pub linear: Linear,
    pub labels: Vec<String>,
}

impl PairHead {
    pub fn register<R: Rng>(store: &mut ParamStore, d_model: usize, labels: Vec<String>, rng: &mut R) -> Result<Self> {
        if labels.len() < 2 {
            return Err(ShineError::Config("a pair head needs None plus at least one label".into()));
        }
        let linear = Linear::register(store, "head.pair", 3 * d_model, labels.len(), rng)?;
        Ok(PairHead { linear, labels })
    }
}

/// Max-pooled sentence representation over real tokens.
pub fn sentence_representation(g: &mut Graph, h_f: Var, len: usize) -> Result<Var> {
    if len == 0 || len > g.shape(h_f)[0] {
        return Err(ShineError::shape("sentence_representation", g.shape(h_f), &[len]));
    }
    let rows: Vec<usize> = (0..len).collect();
    let real = g.gather_rows(h_f, &rows)?;
    g.max_rows(real)
}

fn span_max(g: &mut Graph, h_f: Var, span: Interval, len: usize) -> Result<Var> {
    let (s, e) = span;
    if s > e || e >= len {
        return Err(ShineError::Range { start: s, end: e, len });
    }
    let rows: Vec<usize> = (s..=e).collect();
    let block = g.gather_rows(h_f, &rows)?;
    g.max_rows(block)
}

/// `softmax(W [max(h_m) ; max(h_n) ; h_s] + b)` as a `1 × r` row, given a
/// precomputed sentence representation.
pub fn pair_forward_with(
    g: &mut Graph,
    h_f: Var,
    sentence: Var,
    first: Interval,
    second: Interval,
    len: usize,
    head: &PairHead,
) -> Result<Var> {
    let m = span_max(g, h_f, first, len)?;
    let n = span_max(g, h_f, second, len)?;
    let joined = g.concat_cols(&[m, n, sentence])?;
    let logits = head.linear.forward(g, joined)?;
    g.softmax(logits)
}

pub fn pair_forward(g: &mut Graph, h_f: Var, first: Interval, second: Interval, len: usize, head: &PairHead) -> Result<Var> {
    let s = sentence_representation(g, h_f, len)?;
    pair_forward_with(g, h_f, s, first, second, len, head)
}

/// Sum of cross-entropies of `1 × r` distributions against gold classes.
pub fn pair_loss_graph(g: &mut Graph, probs: &[Var], gold: &[usize]) -> Result<Var> {
    if probs.is_empty() || probs.len() != gold.len() {
        return Err(ShineError::shape("pair_loss", &[probs.len()], &[gold.len()]));
    }
    let mut acc: Option<Var> = None;
    for (&p, &y) in probs.iter().zip(gold) {
        let r = g.shape(p)[1];
        if y >= r {
            return Err(ShineError::Schema(format!("gold label {y} outside {r} classes")));
        }
        let mut pick = Tensor::zeros(1, r);
        pick.set(0, y, 1.0);
        let logp = g.log(p, LOG_EPS)?;
        let picked = g.mul_const(logp, pick)?;
        let term = g.sum(picked)?;
        acc = Some(match acc {
            None => term,
            Some(a) => g.add(a, term)?,
        });
    }
    g.scale(acc.expect("non-empty"), -1.0)
}

pub fn pair_loss(probs: &[Tensor], gold: &[usize]) -> Result<f64> {
    let store = ParamStore::new();
    let mut g = Graph::new(&store);
    let vars = probs.iter().map(|p| g.input(p.clone())).collect::<Result<Vec<_>>>()?;
    let loss = pair_loss_graph(&mut g, &vars, gold)?;
    Ok(g.value(loss).item())
}

/// `task + α · interaction`.
pub fn total_loss(task_value: f64, interaction_value: f64, alpha: f64) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(ShineError::Config(format!("alpha {alpha} must be non-negative")));
    }
    Ok(task_value + alpha * interaction_value)
}

pub fn total_loss_graph(g: &mut Graph, task: Var, interaction: Var, alpha: f64) -> Result<Var> {
    if alpha == 0.0 {
        return Ok(task);
    }
    let weighted = g.scale(interaction, alpha)?;
    g.add(task, weighted)
}

/// One pair to classify: entity pair for relations, trigger and argument
/// candidate for event arguments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairCandidate {
    pub first: Interval,
    pub second: Interval,
    /// Index into the head's labels; 0 is `None`.
    pub label: usize,
    pub event: Option<String>,
}

/// Relation candidates are all ordered pairs of distinct gold entity mentions.
/// Argument candidates pair every trigger with every gold entity mention that
/// does not overlap it. Unannotated pairs are labelled `None`.
pub fn pair_candidates(sentence: &Sentence, task: Task, labels: &[String]) -> Result<Vec<PairCandidate>> {
    let index = |l: &str| {
        labels
            .iter()
            .position(|x| x == l)
            .ok_or_else(|| ShineError::Schema(format!("sentence {}: unknown label {l:?}", sentence.id)))
    };
    let mut entities: Vec<Interval> = sentence.entities().map(|(s, _)| s).collect();
    entities.sort();
    entities.dedup();
    let mut out = Vec::new();
    match task {
        Task::Ner => {}
        Task::Relation => {
            let mut gold = HashMap::new();
            for (a, b, l) in sentence.relations() {
                gold.insert((a, b), index(l)?);
            }
            for &a in &entities {
                for &b in &entities {
                    if a != b {
                        out.push(PairCandidate {
                            first: a,
                            second: b,
                            label: gold.get(&(a, b)).copied().unwrap_or(0),
                            event: None,
                        });
                    }
                }
            }
        }
        Task::Earl => {
            let mut gold = HashMap::new();
            let mut triggers: Vec<(Interval, String)> = Vec::new();
            for (t, a, role, event) in sentence.event_args() {
                gold.insert((t, a), index(role)?);
                if !triggers.iter().any(|(x, _)| *x == t) {
                    triggers.push((t, event.to_string()));
                }
            }
            triggers.sort();
            for (t, event) in &triggers {
                for &a in &entities {
                    if a.1 < t.0 || a.0 > t.1 {
                        out.push(PairCandidate {
                            first: *t,
                            second: a,
                            label: gold.get(&(*t, a)).copied().unwrap_or(0),
                            event: Some(event.clone()),
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Turns a predicted class back into a mention; `None` predictions yield nothing.
pub fn candidate_mention(task: Task, candidate: &PairCandidate, label: &str) -> Option<Mention> {
    if label == NONE_LABEL {
        return None;
    }
    match task {
        Task::Ner => None,
        Task::Relation => Some(Mention::Relation {
            subject: candidate.first,
            object: candidate.second,
            label: label.to_string(),
        }),
        Task::Earl => Some(Mention::EventArg {
            trigger: candidate.first,
            argument: candidate.second,
            role: label.to_string(),
            event: candidate.event.clone().unwrap_or_default(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_ner_loss_is_ln_k() {
        let probs = Tensor::filled(3, 5, 0.2);
        let v = ner_loss(&probs, &[0, 3, 4]).unwrap();
        assert!((v - 5f64.ln()).abs() < 1e-12);
        assert!(ner_loss(&probs, &[5]).is_err());
    }

    #[test]
    fn distill_worked_case() {
        let t = Tensor::from_rows(1, 2, vec![1.0, 0.0]).unwrap();
        let s = Tensor::from_rows(1, 2, vec![0.5, 0.5]).unwrap();
        assert_eq!(distill_loss(&t, &s).unwrap(), 0.25);
        assert_eq!(distill_loss(&t, &t).unwrap(), 0.0);
        assert!(distill_loss(&t, &Tensor::zeros(2, 2)).is_err());
    }

    #[test]
    fn uniform_pair_loss() {
        let p = Tensor::filled(1, 19, 1.0 / 19.0);
        let v = pair_loss(&[p.clone(), p], &[0, 18]).unwrap();
        assert!((v - 2.0 * 19f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn total_loss_arithmetic() {
        assert!((total_loss(1.0, 0.2, 10.0).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(total_loss(1.5, 7.0, 0.0).unwrap(), 1.5);
        assert!(total_loss(1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
    }

    #[test]
    fn pair_output_is_a_distribution() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::new();
        let head = PairHead::register(&mut store, 4, vec!["None".into(), "a".into(), "b".into()], &mut rng).unwrap();
        let mut g = Graph::new(&store);
        let h = g
            .input(Tensor::from_rows(3, 4, (0..12).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap())
            .unwrap();
        let p = pair_forward(&mut g, h, (0, 0), (1, 2), 3, &head).unwrap();
        assert!((g.value(p).data().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(pair_forward(&mut g, h, (2, 1), (0, 0), 3, &head).is_err());
        assert!(pair_forward(&mut g, h, (0, 3), (0, 0), 3, &head).is_err());
    }
}
