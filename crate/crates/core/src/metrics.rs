//! Exact-match precision, recall and F1 for entities, relations and event
//! arguments, plus BIO decoding.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Mention;
use crate::error::{Result, ShineError};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Number of predicted items (A).
    pub predicted: usize,
    /// Number of correct predictions (B).
    pub correct: usize,
    /// Number of gold items (E).
    pub gold: usize,
}

impl Prf {
    pub fn from_counts(predicted: usize, correct: usize, gold: usize) -> Prf {
        let precision = if predicted == 0 { 0.0 } else { correct as f64 / predicted as f64 };
        let recall = if gold == 0 { 0.0 } else { correct as f64 / gold as f64 };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf {
            precision,
            recall,
            f1,
            predicted,
            correct,
            gold,
        }
    }
}

/// Multiset intersection size of `gold` and `pred`.
pub fn prf<T: Ord>(gold: &[T], pred: &[T]) -> Prf {
    let mut counts: BTreeMap<&T, usize> = BTreeMap::new();
    for g in gold {
        *counts.entry(g).or_default() += 1;
    }
    let mut correct = 0;
    for p in pred {
        if let Some(c) = counts.get_mut(p) {
            if *c > 0 {
                *c -= 1;
                correct += 1;
            }
        }
    }
    Prf::from_counts(pred.len(), correct, gold.len())
}

/// A mention tagged with the index of its sentence.
pub type Scored = (usize, Mention);

fn filtered(items: &[Scored], keep: fn(&Mention) -> bool) -> Vec<&Scored> {
    items.iter().filter(|(_, m)| keep(m)).collect()
}

/// Correct when offsets and type match.
pub fn entity_f1(gold: &[Scored], pred: &[Scored]) -> Prf {
    let keep = |m: &Mention| matches!(m, Mention::Entity { .. });
    prf(&filtered(gold, keep), &filtered(pred, keep))
}

/// Correct when the type and both mention offsets match.
pub fn relation_f1(gold: &[Scored], pred: &[Scored]) -> Prf {
    let keep = |m: &Mention| matches!(m, Mention::Relation { .. });
    prf(&filtered(gold, keep), &filtered(pred, keep))
}

/// Correct when event type, offsets and role match.
pub fn argument_f1(gold: &[Scored], pred: &[Scored]) -> Prf {
    let keep = |m: &Mention| matches!(m, Mention::EventArg { .. });
    prf(&filtered(gold, keep), &filtered(pred, keep))
}

/// Segments `(start, end, type)` of a BIO sequence, inclusive ends. An `I-X`
/// that does not continue an open `X` segment opens a new one.
pub fn decode_bio<S: AsRef<str>>(tags: &[S]) -> Result<Vec<(usize, usize, String)>> {
    let mut out: Vec<(usize, usize, String)> = Vec::new();
    let mut open: Option<(usize, &str)> = None;
    for (i, tag) in tags.iter().enumerate() {
        let tag = tag.as_ref();
        let (kind, label) = match tag {
            "O" => ("O", ""),
            _ => match tag.split_once('-') {
                Some((k @ ("B" | "I"), l)) if !l.is_empty() => (k, l),
                _ => return Err(ShineError::Schema(format!("unknown BIO tag {tag:?} at {i}"))),
            },
        };
        let continues = kind == "I" && open.is_some_and(|(_, l)| l == label);
        if !continues {
            if let Some((s, l)) = open.take() {
                out.push((s, i - 1, l.to_string()));
            }
            if kind != "O" {
                open = Some((i, label));
            }
        }
    }
    if let Some((s, l)) = open {
        out.push((s, tags.len() - 1, l.to_string()));
    }
    Ok(out)
}

/// Metrics of one (task, language, seed) evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task: String,
    pub language: String,
    pub seed: u64,
    pub sentences: usize,
    pub scores: Prf,
}

impl MetricsReport {
    /// Flat `key=value` lines.
    pub fn to_key_values(&self) -> String {
        let s = &self.scores;
        let mut out = String::new();
        let _ = writeln!(out, "task={}", self.task);
        let _ = writeln!(out, "language={}", self.language);
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "sentences={}", self.sentences);
        let _ = writeln!(out, "precision={:.6}", s.precision);
        let _ = writeln!(out, "recall={:.6}", s.recall);
        let _ = writeln!(out, "f1={:.6}", s.f1);
        let _ = writeln!(out, "predicted={}", s.predicted);
        let _ = writeln!(out, "correct={}", s.correct);
        let _ = writeln!(out, "gold={}", s.gold);
        out
    }

    /// Writes `<stem>.txt` and `<stem>.json` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        crate::util::write_atomic(&dir.join(format!("{stem}.txt")), self.to_key_values().as_bytes())?;
        let json = serde_json::to_string_pretty(self)?;
        crate::util::write_atomic(&dir.join(format!("{stem}.json")), json.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ent(s: usize, e: usize, l: &str) -> Scored {
        (
            0,
            Mention::Entity {
                span: (s, e),
                label: l.into(),
            },
        )
    }

    #[test]
    fn worked_half_case() {
        let gold = [ent(0, 1, "PER"), ent(3, 3, "LOC")];
        let pred = [ent(0, 1, "PER"), ent(2, 3, "LOC")];
        let p = entity_f1(&gold, &pred);
        assert_eq!((p.predicted, p.correct, p.gold), (2, 1, 2));
        assert_eq!((p.precision, p.recall, p.f1), (0.5, 0.5, 0.5));
    }

    #[test]
    fn zero_conventions() {
        let gold = [ent(0, 1, "PER")];
        assert_eq!(entity_f1(&gold, &[]).f1, 0.0);
        assert_eq!(entity_f1(&[], &gold).precision, 0.0);
        assert_eq!(entity_f1(&[], &[]).f1, 0.0);
        assert_eq!(entity_f1(&gold, &gold).f1, 1.0);
    }

    #[test]
    fn bio_decoding() {
        assert_eq!(decode_bio(&["B-PER", "I-PER", "O"]).unwrap(), vec![(0, 1, "PER".into())]);
        assert_eq!(decode_bio(&["O", "I-LOC"]).unwrap(), vec![(1, 1, "LOC".into())]);
        assert_eq!(
            decode_bio(&["B-PER", "I-LOC", "B-LOC", "B-LOC"]).unwrap(),
            vec![(0, 0, "PER".into()), (1, 1, "LOC".into()), (2, 2, "LOC".into()), (3, 3, "LOC".into())]
        );
        assert!(decode_bio(&["X-PER"]).is_err());
        assert!(decode_bio(&["B-"]).is_err());
    }

    #[test]
    fn kinds_are_scored_separately() {
        let rel = (
            0,
            Mention::Relation {
                subject: (0, 0),
                object: (1, 1),
                label: "r".into(),
            },
        );
        let gold = [ent(0, 0, "PER"), rel.clone()];
        assert_eq!(relation_f1(&gold, &[rel]).f1, 1.0);
        assert_eq!(argument_f1(&gold, &[]).gold, 0);
    }
}
