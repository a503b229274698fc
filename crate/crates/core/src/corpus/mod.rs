//! Annotated sentences, corpora, vocabularies and dataset splits.

mod io;
pub mod synth;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ShineError};
use crate::syntax::{extract_spans, ConstituencyTree, ConstituentSpan, PhraseSchema};

pub use io::{load_corpus, parse_corpus, save_corpus, write_corpus};
pub use synth::{generate_synthetic_pair, GenConfig};

/// Inclusive token interval.
pub type Interval = (usize, usize);

/// A task annotation attached to a sentence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mention {
    Entity {
        span: Interval,
        label: String,
    },
    Relation {
        subject: Interval,
        object: Interval,
        label: String,
    },
    EventArg {
        trigger: Interval,
        argument: Interval,
        role: String,
        event: String,
    },
}

impl Mention {
    pub fn intervals(&self) -> Vec<Interval> {
        match self {
            Mention::Entity { span, .. } => vec![*span],
            Mention::Relation {
                subject, object, ..
            } => vec![*subject, *object],
            Mention::EventArg {
                trigger, argument, ..
            } => vec![*trigger, *argument],
        }
    }
}

/// Wire form of a mention: one JSON object per `#mentions` line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentionRecord {
    pub kind: String,
    pub spans: Vec<[usize; 2]>,
    #[serde(rename = "type")]
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<String>,
}

impl From<&Mention> for MentionRecord {
    fn from(m: &Mention) -> Self {
        let spans = m.intervals().into_iter().map(|(s, e)| [s, e]).collect();
        match m {
            Mention::Entity { label, .. } => MentionRecord {
                kind: "entity".into(),
                spans,
                label: label.clone(),
                event: None,
            },
            Mention::Relation { label, .. } => MentionRecord {
                kind: "relation".into(),
                spans,
                label: label.clone(),
                event: None,
            },
            Mention::EventArg { role, event, .. } => MentionRecord {
                kind: "event_arg".into(),
                spans,
                label: role.clone(),
                event: Some(event.clone()),
            },
        }
    }
}

impl TryFrom<MentionRecord> for Mention {
    type Error = String;

    fn try_from(r: MentionRecord) -> std::result::Result<Self, String> {
        let iv = |k: usize| -> std::result::Result<Interval, String> {
            let [s, e] = r.spans[k];
            if s > e {
                return Err(format!("span [{s},{e}] has start after end"));
            }
            Ok((s, e))
        };
        let want = |n: usize| -> std::result::Result<(), String> {
            if r.spans.len() == n {
                Ok(())
            } else {
                Err(format!("{} mention needs {n} spans, got {}", r.kind, r.spans.len()))
            }
        };
        match r.kind.as_str() {
            "entity" => {
                want(1)?;
                Ok(Mention::Entity {
                    span: iv(0)?,
                    label: r.label,
                })
            }
            "relation" => {
                want(2)?;
                Ok(Mention::Relation {
                    subject: iv(0)?,
                    object: iv(1)?,
                    label: r.label,
                })
            }
            "event_arg" => {
                want(2)?;
                let event = r.event.clone().ok_or("event_arg mention needs an event field")?;
                Ok(Mention::EventArg {
                    trigger: iv(0)?,
                    argument: iv(1)?,
                    role: r.label,
                    event,
                })
            }
            other => Err(format!("unknown mention kind {other:?}")),
        }
    }
}

/// Closed label inventories shared by every sentence of a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schemas {
    pub entity: Vec<String>,
    pub relation: Vec<String>,
    pub role: Vec<String>,
    pub event: Vec<String>,
    pub phrase: PhraseSchema,
    pub pos: Vec<String>,
    pub deprel: Vec<String>,
}

impl Schemas {
    /// Schema kinds in header order.
    pub const KINDS: [&'static str; 7] = ["entity", "relation", "role", "event", "phrase", "pos", "deprel"];

    /// `O` followed by `B-X`, `I-X` for each entity type.
    pub fn bio_tags(&self) -> Vec<String> {
        std::iter::once("O".to_string())
            .chain(self.entity.iter().flat_map(|e| [format!("B-{e}"), format!("I-{e}")]))
            .collect()
    }

    pub fn labels(&self, kind: &str) -> Option<&[String]> {
        match kind {
            "entity" => Some(&self.entity),
            "relation" => Some(&self.relation),
            "role" => Some(&self.role),
            "event" => Some(&self.event),
            "phrase" => Some(self.phrase.labels()),
            "pos" => Some(&self.pos),
            "deprel" => Some(&self.deprel),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub id: String,
    pub tokens: Vec<String>,
    pub pos: Vec<String>,
    pub deprel: Vec<String>,
    pub entity_tags: Vec<String>,
    pub tree: ConstituencyTree,
    /// Phrase-schema constituents of `tree`, pre-order.
    pub spans: Vec<ConstituentSpan>,
    pub mentions: Vec<Mention>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn entities(&self) -> impl Iterator<Item = (Interval, &str)> {
        self.mentions.iter().filter_map(|m| match m {
            Mention::Entity { span, label } => Some((*span, label.as_str())),
            _ => None,
        })
    }

    pub fn relations(&self) -> impl Iterator<Item = (Interval, Interval, &str)> {
        self.mentions.iter().filter_map(|m| match m {
            Mention::Relation {
                subject,
                object,
                label,
            } => Some((*subject, *object, label.as_str())),
            _ => None,
        })
    }

    pub fn event_args(&self) -> impl Iterator<Item = (Interval, Interval, &str, &str)> {
        self.mentions.iter().filter_map(|m| match m {
            Mention::EventArg {
                trigger,
                argument,
                role,
                event,
            } => Some((*trigger, *argument, role.as_str(), event.as_str())),
            _ => None,
        })
    }
}

/// Keeps the tree's phrase nodes whose label is in the phrase schema and skips
/// nodes labelled with a POS tag (pre-terminals). Any other label is an error.
pub fn phrase_spans(tree: &ConstituencyTree, schemas: &Schemas) -> Result<Vec<ConstituentSpan>> {
    let mut out = Vec::new();
    for span in extract_spans(tree) {
        if schemas.phrase.contains(&span.label) {
            out.push(span);
        } else if !schemas.pos.contains(&span.label) {
            return Err(ShineError::Schema(format!(
                "tree label {:?} is neither a phrase nor a POS label",
                span.label
            )));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub language: String,
    pub schemas: Schemas,
    pub sentences: Vec<Sentence>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Sentence-level validation; returns the offending sentence id on failure.
    pub fn validate(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        let bio = self.schemas.bio_tags();
        for s in &self.sentences {
            let fail = |msg: String| ShineError::Schema(format!("sentence {}: {msg}", s.id));
            if !ids.insert(&s.id) {
                return Err(fail("duplicate sentence id".into()));
            }
            let n = s.tokens.len();
            if n == 0 {
                return Err(fail("no tokens".into()));
            }
            for (name, col) in [("pos", &s.pos), ("deprel", &s.deprel), ("entity", &s.entity_tags)] {
                if col.len() != n {
                    return Err(fail(format!("{name} column has {} tags for {n} tokens", col.len())));
                }
            }
            if s.tree.tokens() != s.tokens.as_slice() {
                return Err(fail("tree leaves differ from token forms".into()));
            }
            for t in &s.pos {
                if !self.schemas.pos.contains(t) {
                    return Err(fail(format!("unknown POS tag {t:?}")));
                }
            }
            for t in &s.deprel {
                if !self.schemas.deprel.contains(t) {
                    return Err(fail(format!("unknown deprel {t:?}")));
                }
            }
            for t in &s.entity_tags {
                if !bio.contains(t) {
                    return Err(fail(format!("unknown entity tag {t:?}")));
                }
            }
            for sp in &s.spans {
                if sp.end >= n || !self.schemas.phrase.contains(&sp.label) {
                    return Err(fail(format!("invalid constituent {sp}")));
                }
            }
            for m in &s.mentions {
                for (a, b) in m.intervals() {
                    if a > b || b >= n {
                        return Err(fail(format!("mention interval ({a},{b}) out of range")));
                    }
                }
                let (kind, label) = match m {
                    Mention::Entity { label, .. } => ("entity", label),
                    Mention::Relation { label, .. } => ("relation", label),
                    Mention::EventArg { role, event, .. } => {
                        if !self.schemas.event.contains(event) {
                            return Err(fail(format!("unknown event type {event:?}")));
                        }
                        ("role", role)
                    }
                };
                if !self.schemas.labels(kind).is_some_and(|l| l.contains(label)) {
                    return Err(fail(format!("unknown {kind} label {label:?}")));
                }
            }
        }
        Ok(())
    }

    pub fn subset(&self, indices: &[usize]) -> Corpus {
        Corpus {
            language: self.language.clone(),
            schemas: self.schemas.clone(),
            sentences: indices.iter().map(|&i| self.sentences[i].clone()).collect(),
        }
    }
}

/// Token → index map. Index 0 is PAD and index 1 is UNK.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub const PAD: usize = 0;
    pub const UNK: usize = 1;
    pub const PAD_TOKEN: &'static str = "<pad>";
    pub const UNK_TOKEN: &'static str = "<unk>";

    pub fn from_tokens(words: Vec<String>) -> Self {
        let mut tokens = vec![Self::PAD_TOKEN.to_string(), Self::UNK_TOKEN.to_string()];
        tokens.extend(words);
        let mut v = Vocabulary {
            tokens,
            index: HashMap::new(),
        };
        v.reindex();
        v
    }

    /// Rebuilds the lookup table (after deserialization).
    pub fn reindex(&mut self) {
        self.index = self.tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(Self::UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode(&self, words: &[String]) -> Vec<usize> {
        words.iter().map(|w| self.get(w)).collect()
    }
}

/// Keeps tokens seen at least `min_count` times, ordered by descending
/// frequency then lexically.
pub fn build_vocab(corpus: &Corpus, min_count: usize) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(ShineError::Empty("cannot build a vocabulary from an empty corpus".into()));
    }
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for s in &corpus.sentences {
        for t in &s.tokens {
            *freq.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, usize)> = freq.into_iter().filter(|&(_, c)| c >= min_count).collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Ok(Vocabulary::from_tokens(kept.into_iter().map(|(t, _)| t.to_string()).collect()))
}

/// Shuffles with `seed` and cuts into `ratios.len()` disjoint parts whose
/// sizes are within one of `ratio * n` (largest-remainder rounding).
pub fn split_indices(n: usize, ratios: &[f64], seed: u64) -> Result<Vec<Vec<usize>>> {
    if ratios.is_empty() || ratios.iter().any(|&r| !(r > 0.0)) {
        return Err(ShineError::Config("split ratios must be positive".into()));
    }
    let total: f64 = ratios.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(ShineError::Config(format!("split ratios sum to {total}, not 1")));
    }
    if n < ratios.len() {
        return Err(ShineError::Config(format!(
            "cannot split {n} sentences into {} parts",
            ratios.len()
        )));
    }
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    let mut rest = n - sizes.iter().sum::<usize>();
    for &k in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        sizes[k] += 1;
        rest -= 1;
    }
    // Empty parts borrow from the part furthest above its exact share.
    for k in 0..sizes.len() {
        if sizes[k] == 0 {
            let donor = (0..sizes.len())
                .filter(|&j| sizes[j] > 1)
                .max_by(|&a, &b| {
                    (sizes[a] as f64 - exact[a])
                        .partial_cmp(&(sizes[b] as f64 - exact[b]))
                        .unwrap()
                })
                .expect("n >= number of parts");
            sizes[donor] -= 1;
            sizes[k] = 1;
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut parts = Vec::with_capacity(sizes.len());
    let mut at = 0;
    for s in sizes {
        let mut part = idx[at..at + s].to_vec();
        part.sort_unstable();
        parts.push(part);
        at += s;
    }
    Ok(parts)
}

/// Train/dev/test partition of a corpus.
pub fn split(corpus: &Corpus, ratios: [f64; 3], seed: u64) -> Result<(Corpus, Corpus, Corpus)> {
    let parts = split_indices(corpus.len(), &ratios, seed)?;
    Ok((
        corpus.subset(&parts[0]),
        corpus.subset(&parts[1]),
        corpus.subset(&parts[2]),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes_follow_ratios() {
        let parts = split_indices(10, &[0.8, 0.1, 0.1], 3).unwrap();
        let sizes: Vec<usize> = parts.iter().map(Vec::len).collect();
        assert_eq!(sizes, [8, 1, 1]);
        assert_eq!(parts, split_indices(10, &[0.8, 0.1, 0.1], 3).unwrap());
        let mut all: Vec<usize> = parts.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn split_errors() {
        assert!(split_indices(2, &[0.5, 0.25, 0.25], 0).is_err());
        assert!(split_indices(10, &[0.5, 0.4], 0).is_err());
        assert!(split_indices(10, &[1.2, -0.2], 0).is_err());
    }

    #[test]
    fn split_never_leaves_a_part_empty() {
        for n in 3..40 {
            let parts = split_indices(n, &[0.9, 0.05, 0.05], 1).unwrap();
            assert!(parts.iter().all(|p| !p.is_empty()), "n = {n}");
        }
    }

    #[test]
    fn mention_record_round_trip() {
        let m = Mention::EventArg {
            trigger: (1, 1),
            argument: (3, 4),
            role: "Agent".into(),
            event: "Move".into(),
        };
        let r = MentionRecord::from(&m);
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(json, r#"{"kind":"event_arg","spans":[[1,1],[3,4]],"type":"Agent","event":"Move"}"#);
        let back: MentionRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(Mention::try_from(back).unwrap(), m);
        let bad = MentionRecord {
            kind: "entity".into(),
            spans: vec![[2, 1]],
            label: "PER".into(),
            event: None,
        };
        assert!(Mention::try_from(bad).is_err());
    }
}
