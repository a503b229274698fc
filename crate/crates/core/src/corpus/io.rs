//! Corpus text format.
//!
//! ```text
//! #language en
//! #schema entity PER ORG LOC
//! #schema phrase NP VP PP S
//! ...
//!
//! #id s1
//! #tree (S (NP they) (VP have (VP received (NP deployment orders))))
//! #mentions {"kind":"entity","spans":[[3,4]],"type":"ORG"}
//! 0	they	PRON	nsubj	O
//! ...
//! ```
//!
//! Header lines precede the first `#id`. Each sentence is followed by a blank
//! line. Rows are `index<TAB>form<TAB>pos<TAB>deprel<TAB>entity_bio` with
//! 0-based indices.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{phrase_spans, Corpus, Mention, MentionRecord, Schemas, Sentence};
use crate::error::{Result, ShineError};
use crate::syntax::{parse_bracketed_tree, PhraseSchema};

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_corpus(&text, &path.display().to_string())
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    crate::util::write_atomic(path.as_ref(), write_corpus(corpus).as_bytes())
}

struct Pending {
    id: String,
    id_line: usize,
    tree: Option<(String, usize)>,
    mentions: Vec<(MentionRecord, usize)>,
    rows: Vec<[String; 5]>,
}

pub fn parse_corpus(text: &str, source: &str) -> Result<Corpus> {
    let err = |line: usize, column: usize, message: String| ShineError::Corpus {
        path: source.to_string(),
        line,
        column,
        message,
    };

    let mut language = None;
    let mut schema_lines: Vec<(String, Vec<String>)> = Vec::new();
    let mut pending: Vec<Pending> = Vec::new();
    let mut current: Option<Pending> = None;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            if let Some(p) = current.take() {
                pending.push(p);
            }
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let (key, value) = rest.split_once(' ').unwrap_or((rest, ""));
            match key {
                "language" if current.is_none() && pending.is_empty() => {
                    language = Some(value.trim().to_string());
                }
                "schema" if current.is_none() && pending.is_empty() => {
                    let mut parts = value.split_whitespace();
                    let kind = parts
                        .next()
                        .ok_or_else(|| err(line_no, 9, "schema line without a kind".into()))?;
                    if !Schemas::KINDS.contains(&kind) {
                        return Err(err(line_no, 9, format!("unknown schema kind {kind:?}")));
                    }
                    if schema_lines.iter().any(|(k, _)| k == kind) {
                        return Err(err(line_no, 9, format!("schema {kind:?} declared twice")));
                    }
                    schema_lines.push((kind.to_string(), parts.map(str::to_string).collect()));
                }
                "id" => {
                    if let Some(p) = current.take() {
                        pending.push(p);
                    }
                    let id = value.trim();
                    if id.is_empty() {
                        return Err(err(line_no, 5, "empty sentence id".into()));
                    }
                    current = Some(Pending {
                        id: id.to_string(),
                        id_line: line_no,
                        tree: None,
                        mentions: Vec::new(),
                        rows: Vec::new(),
                    });
                }
                "tree" => {
                    let p = current
                        .as_mut()
                        .ok_or_else(|| err(line_no, 1, "#tree outside a sentence".into()))?;
                    if p.tree.is_some() {
                        return Err(err(line_no, 1, format!("sentence {}: second #tree line", p.id)));
                    }
                    p.tree = Some((value.to_string(), line_no));
                }
                "mentions" => {
                    let p = current
                        .as_mut()
                        .ok_or_else(|| err(line_no, 1, "#mentions outside a sentence".into()))?;
                    let rec: MentionRecord = serde_json::from_str(value).map_err(|e| {
                        err(line_no, 11 + e.column().saturating_sub(1), format!("sentence {}: {e}", p.id))
                    })?;
                    p.mentions.push((rec, line_no));
                }
                other => {
                    return Err(err(line_no, 2, format!("unexpected directive #{other}")));
                }
            }
            continue;
        }
        let p = current
            .as_mut()
            .ok_or_else(|| err(line_no, 1, "token row outside a sentence".into()))?;
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 {
            return Err(err(
                line_no,
                1,
                format!("sentence {}: row has {} columns, expected 5", p.id, cols.len()),
            ));
        }
        let expect = p.rows.len();
        if cols[0].parse::<usize>().ok() != Some(expect) {
            return Err(err(
                line_no,
                1,
                format!("sentence {}: expected token index {expect}, got {:?}", p.id, cols[0]),
            ));
        }
        for (k, c) in cols.iter().enumerate() {
            if c.is_empty() {
                let column = cols[..k].iter().map(|c| c.len() + 1).sum::<usize>() + 1;
                return Err(err(line_no, column, format!("sentence {}: empty field", p.id)));
            }
        }
        p.rows.push([
            cols[0].to_string(),
            cols[1].to_string(),
            cols[2].to_string(),
            cols[3].to_string(),
            cols[4].to_string(),
        ]);
    }
    if let Some(p) = current.take() {
        pending.push(p);
    }

    let schema = |kind: &str| -> Vec<String> {
        schema_lines
            .iter()
            .find(|(k, _)| k == kind)
            .map(|(_, v)| v.clone())
            .unwrap_or_default()
    };
    for required in ["entity", "phrase", "pos", "deprel"] {
        if !schema_lines.iter().any(|(k, _)| k == required) {
            return Err(err(1, 1, format!("missing #schema {required} header")));
        }
    }
    let schemas = Schemas {
        entity: schema("entity"),
        relation: schema("relation"),
        role: schema("role"),
        event: schema("event"),
        phrase: PhraseSchema::new(schema("phrase")).map_err(|e| err(1, 1, e.to_string()))?,
        pos: schema("pos"),
        deprel: schema("deprel"),
    };

    let mut sentences = Vec::with_capacity(pending.len());
    for p in pending {
        let (tree_text, tree_line) = p
            .tree
            .ok_or_else(|| err(p.id_line, 1, format!("sentence {}: missing #tree", p.id)))?;
        let tree = parse_bracketed_tree(&tree_text).map_err(|e| match e {
            ShineError::Parse { offset, message } => {
                err(tree_line, 7 + offset, format!("sentence {}: {message}", p.id))
            }
            other => other,
        })?;
        let spans = phrase_spans(&tree, &schemas)
            .map_err(|e| err(tree_line, 7, format!("sentence {}: {e}", p.id)))?;
        let mut mentions = Vec::with_capacity(p.mentions.len());
        for (rec, line) in p.mentions {
            mentions.push(
                Mention::try_from(rec).map_err(|m| err(line, 11, format!("sentence {}: {m}", p.id)))?,
            );
        }
        let column = |k: usize| p.rows.iter().map(|r| r[k].clone()).collect::<Vec<_>>();
        let sentence = Sentence {
            id: p.id.clone(),
            tokens: column(1),
            pos: column(2),
            deprel: column(3),
            entity_tags: column(4),
            tree,
            spans,
            mentions,
        };
        sentences.push((sentence, p.id_line));
    }

    let corpus = Corpus {
        language: language.unwrap_or_default(),
        schemas,
        sentences: sentences.iter().map(|(s, _)| s.clone()).collect(),
    };
    // Re-run validation sentence by sentence to attach line numbers.
    if let Err(e) = corpus.validate() {
        let msg = e.to_string();
        let line = sentences
            .iter()
            .find(|(s, _)| msg.contains(&format!("sentence {}:", s.id)))
            .map(|(_, l)| *l)
            .unwrap_or(1);
        return Err(err(line, 1, msg));
    }
    Ok(corpus)
}

/// Canonical text form; `parse_corpus(write_corpus(c))` reproduces `c`.
pub fn write_corpus(corpus: &Corpus) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "#language {}", corpus.language);
    for kind in Schemas::KINDS {
        let labels = corpus.schemas.labels(kind).unwrap_or_default();
        if labels.is_empty() {
            let _ = writeln!(out, "#schema {kind}");
        } else {
            let _ = writeln!(out, "#schema {kind} {}", labels.join(" "));
        }
    }
    for s in &corpus.sentences {
        out.push('\n');
        let _ = writeln!(out, "#id {}", s.id);
        let _ = writeln!(out, "#tree {}", s.tree.to_bracketed());
        for m in &s.mentions {
            let rec = MentionRecord::from(m);
            let _ = writeln!(out, "#mentions {}", serde_json::to_string(&rec).expect("plain record"));
        }
        for i in 0..s.len() {
            let _ = writeln!(
                out,
                "{i}\t{}\t{}\t{}\t{}",
                s.tokens[i], s.pos[i], s.deprel[i], s.entity_tags[i]
            );
        }
    }
    out
}
