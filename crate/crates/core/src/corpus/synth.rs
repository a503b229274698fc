//! Synthetic source/target corpus pairs from a small probabilistic grammar.
//!
//! Each sentence is derived once and realized twice: in the source language
//! with the rules' declared child order, and in the target language with each
//! rule's `target_order` and a disjoint vocabulary (a per-POS bijection onto a
//! different alphabet). POS tags, dependency labels, constituents and gold
//! mentions all come from the derivation, so both realizations share the same
//! language-universal annotations up to reordering.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{phrase_spans, Corpus, Mention, Schemas, Sentence};
use crate::error::{Result, ShineError};
use crate::syntax::{parse_bracketed_tree, PhraseSchema};

/// Child slot of a rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub symbol: String,
    /// Label received by this child's head word when the slot is not the
    /// rule's head. Defaults to `dep`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deprel: Option<String>,
}

/// Path of child indices (in source order) from a rule's node.
pub type SlotPath = Vec<usize>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationSlot {
    pub label: String,
    pub subject: SlotPath,
    pub object: SlotPath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArgumentSlot {
    pub role: String,
    pub path: SlotPath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSlot {
    pub event: String,
    pub trigger: SlotPath,
    pub arguments: Vec<ArgumentSlot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub lhs: String,
    /// Phrase label of the constituent this rule builds.
    pub label: String,
    #[serde(default = "one")]
    pub weight: f64,
    pub children: Vec<Slot>,
    #[serde(default)]
    pub head: usize,
    /// Child order in the target language (a permutation of child indices).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_order: Option<Vec<usize>>,
    /// Entity type of this constituent's yield.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub relations: Vec<RelationSlot>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<EventSlot>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub start: String,
    pub sentences: usize,
    #[serde(default = "default_depth")]
    pub max_depth: usize,
    pub source_language: String,
    pub target_language: String,
    /// Preterminal POS tag → number of distinct words.
    pub lexicon: BTreeMap<String, usize>,
    pub rules: Vec<Rule>,
}

fn default_depth() -> usize {
    12
}

fn slot(symbol: &str, deprel: Option<&str>) -> Slot {
    Slot {
        symbol: symbol.into(),
        deprel: deprel.map(Into::into),
    }
}

fn rule(lhs: &str, label: &str, children: Vec<Slot>, head: usize, target: &[usize]) -> Rule {
    Rule {
        lhs: lhs.into(),
        label: label.into(),
        weight: 1.0,
        children,
        head,
        target_order: Some(target.to_vec()),
        entity: None,
        relations: Vec::new(),
        events: Vec::new(),
    }
}

/// Head-first and head-last variants of a flat name of `len` proper nouns.
fn name_rules(lhs: &str, entity: &str, max_len: usize) -> Vec<Rule> {
    let mut out = Vec::new();
    for len in 1..=max_len {
        let heads: &[usize] = if len == 1 { &[0] } else { &[0, len - 1] };
        for &head in heads {
            let children = (0..len)
                .map(|i| slot("PROPN", (i != head).then_some("flat")))
                .collect();
            let target: Vec<usize> = (0..len).collect();
            let mut r = rule(lhs, "NP", children, head, &target);
            r.entity = Some(entity.into());
            r.weight = 1.0 / heads.len() as f64;
            out.push(r);
        }
    }
    out
}

impl GenConfig {
    /// Default benchmark grammar.
    ///
    /// Names are runs of proper nouns from one shared lexicon with a randomly
    /// placed head, and several rules put two names next to each other, so
    /// entity boundaries and the types of non-head name words are only
    /// recoverable from the constituent structure. The target language
    /// reverses verb phrases and prepositional phrases.
    pub fn benchmark(sentences: usize) -> Self {
        let lexicon: BTreeMap<String, usize> = [
            ("PROPN", 150),
            ("NOUN", 40),
            ("DET", 4),
            ("ADJ", 20),
            ("VERB", 30),
            ("ADP", 6),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();

        let mut rules = Vec::new();

        let mut employ = rule(
            "S",
            "S",
            vec![slot("NP_PER", Some("nsubj")), slot("VP_JOIN", None)],
            1,
            &[1, 0],
        );
        employ.relations.push(RelationSlot {
            label: "member_of".into(),
            subject: vec![0],
            object: vec![1, 1],
        });
        employ.events.push(EventSlot {
            event: "Employ".into(),
            trigger: vec![1, 0],
            arguments: vec![
                ArgumentSlot {
                    role: "Employee".into(),
                    path: vec![0],
                },
                ArgumentSlot {
                    role: "Employer".into(),
                    path: vec![1, 1],
                },
            ],
        });
        rules.push(employ);
        rules.push(rule(
            "VP_JOIN",
            "VP",
            vec![slot("VERB", None), slot("NP_ORG", Some("obj"))],
            0,
            &[1, 0],
        ));

        let mut transport = rule(
            "S",
            "S",
            vec![slot("NP_PER", Some("nsubj")), slot("VP_GO", None)],
            1,
            &[1, 0],
        );
        transport.events.push(EventSlot {
            event: "Transport".into(),
            trigger: vec![1, 0],
            arguments: vec![
                ArgumentSlot {
                    role: "Agent".into(),
                    path: vec![0],
                },
                ArgumentSlot {
                    role: "Destination".into(),
                    path: vec![1, 1, 1],
                },
            ],
        });
        rules.push(transport);
        rules.push(rule(
            "VP_GO",
            "VP",
            vec![slot("VERB", None), slot("PP_LOC", Some("obl"))],
            0,
            &[1, 0],
        ));
        rules.push(rule(
            "PP_LOC",
            "PP",
            vec![slot("ADP", Some("case")), slot("NP_LOC", None)],
            1,
            &[1, 0],
        ));

        let mut meet = rule(
            "S",
            "S",
            vec![slot("NP_PER", Some("nsubj")), slot("VP_MEET", None)],
            1,
            &[1, 0],
        );
        meet.relations.push(RelationSlot {
            label: "met".into(),
            subject: vec![0],
            object: vec![1, 1],
        });
        meet.events.push(EventSlot {
            event: "Meet".into(),
            trigger: vec![1, 0],
            arguments: vec![
                ArgumentSlot {
                    role: "Entity".into(),
                    path: vec![0],
                },
                ArgumentSlot {
                    role: "Entity".into(),
                    path: vec![1, 1],
                },
                ArgumentSlot {
                    role: "Entity".into(),
                    path: vec![1, 2],
                },
            ],
        });
        rules.push(meet);
        rules.push(rule(
            "VP_MEET",
            "VP",
            vec![
                slot("VERB", None),
                slot("NP_PER", Some("obj")),
                slot("NP_PER", Some("obj")),
            ],
            0,
            &[2, 1, 0],
        ));

        let mut located = rule(
            "S",
            "S",
            vec![slot("NP_ORG", Some("nsubj")), slot("VP_BASE", None)],
            1,
            &[1, 0],
        );
        located.relations.push(RelationSlot {
            label: "located_in".into(),
            subject: vec![0],
            object: vec![1, 2, 1],
        });
        rules.push(located);
        rules.push(rule(
            "VP_BASE",
            "VP",
            vec![
                slot("VERB", None),
                slot("NP_COMMON", Some("obj")),
                slot("PP_LOC", Some("obl")),
            ],
            0,
            &[2, 1, 0],
        ));
        rules.push(rule(
            "NP_COMMON",
            "NP",
            vec![slot("DET", Some("det")), slot("NOUN", None)],
            1,
            &[0, 1],
        ));
        rules.push(rule(
            "NP_COMMON",
            "NP",
            vec![slot("DET", Some("det")), slot("ADJ", Some("amod")), slot("NOUN", None)],
            2,
            &[0, 1, 2],
        ));

        rules.extend(name_rules("NP_PER", "PER", 3));
        rules.extend(name_rules("NP_ORG", "ORG", 3));
        rules.extend(name_rules("NP_LOC", "LOC", 2));

        GenConfig {
            start: "S".into(),
            sentences,
            max_depth: default_depth(),
            source_language: "src".into(),
            target_language: "tgt".into(),
            lexicon,
            rules,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| ShineError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("grammar config serializes")
    }

    /// Static checks: known symbols, reachability, permutations, schema labels.
    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(ShineError::Config(m));
        let lhs: BTreeSet<&str> = self.rules.iter().map(|r| r.lhs.as_str()).collect();
        if !lhs.contains(self.start.as_str()) {
            return cfg(format!("start symbol {} has no rules", self.start));
        }
        for r in &self.rules {
            if r.children.is_empty() {
                return cfg(format!("rule for {} has no children", r.lhs));
            }
            if r.head >= r.children.len() {
                return cfg(format!("rule for {} has head {} out of range", r.lhs, r.head));
            }
            if !(r.weight > 0.0) {
                return cfg(format!("rule for {} has non-positive weight", r.lhs));
            }
            if self.lexicon.contains_key(&r.lhs) {
                return cfg(format!("{} is both a preterminal and a nonterminal", r.lhs));
            }
            for c in &r.children {
                if !lhs.contains(c.symbol.as_str()) && !self.lexicon.contains_key(&c.symbol) {
                    return cfg(format!("symbol {} is never defined", c.symbol));
                }
            }
            if let Some(order) = &r.target_order {
                let mut sorted = order.clone();
                sorted.sort_unstable();
                if sorted != (0..r.children.len()).collect::<Vec<_>>() {
                    return cfg(format!("target order {order:?} of {} is not a permutation", r.lhs));
                }
            }
        }
        if self.lexicon.values().any(|&n| n == 0) {
            return cfg("lexicon entries need at least one word".into());
        }
        // Reachability from the start symbol.
        let mut seen = BTreeSet::from([self.start.as_str()]);
        let mut frontier = vec![self.start.as_str()];
        while let Some(sym) = frontier.pop() {
            for r in self.rules.iter().filter(|r| r.lhs == sym) {
                for c in &r.children {
                    if lhs.contains(c.symbol.as_str()) && seen.insert(c.symbol.as_str()) {
                        frontier.push(c.symbol.as_str());
                    }
                }
            }
        }
        if let Some(unreachable) = lhs.iter().find(|s| !seen.contains(*s)) {
            return cfg(format!("nonterminal {unreachable} is unreachable from {}", self.start));
        }
        if self.source_language == self.target_language {
            return cfg("source and target languages need distinct ids".into());
        }
        Ok(())
    }

    /// Label inventories implied by the grammar, in order of first appearance.
    pub fn schemas(&self) -> Result<Schemas> {
        fn add(v: &mut Vec<String>, s: &str) {
            if !v.iter().any(|x| x == s) {
                v.push(s.to_string());
            }
        }
        let (mut entity, mut relation, mut role, mut event, mut phrase, mut deprel) =
            (vec![], vec![], vec![], vec![], vec![], vec!["root".to_string()]);
        for r in &self.rules {
            add(&mut phrase, &r.label);
            if let Some(e) = &r.entity {
                add(&mut entity, e);
            }
            for rel in &r.relations {
                add(&mut relation, &rel.label);
            }
            for ev in &r.events {
                add(&mut event, &ev.event);
                for a in &ev.arguments {
                    add(&mut role, &a.role);
                }
            }
            for (i, c) in r.children.iter().enumerate() {
                if i != r.head {
                    add(&mut deprel, c.deprel.as_deref().unwrap_or("dep"));
                }
            }
        }
        Ok(Schemas {
            entity,
            relation,
            role,
            event,
            phrase: PhraseSchema::new(phrase)?,
            pos: self.lexicon.keys().cloned().collect(),
            deprel,
        })
    }
}

#[derive(Debug, Clone)]
enum Deriv {
    Word { pos: String, word: usize },
    Node { rule: usize, children: Vec<Deriv> },
}

/// Intervals of a realized derivation, indexed by source child order.
struct Placed {
    interval: (usize, usize),
    children: Vec<Placed>,
}

impl Placed {
    fn resolve(&self, path: &[usize]) -> Option<&Placed> {
        match path.split_first() {
            None => Some(self),
            Some((&i, rest)) => self.children.get(i)?.resolve(rest),
        }
    }
}

#[derive(Default)]
struct Realization {
    tokens: Vec<String>,
    pos: Vec<String>,
    deprel: Vec<String>,
    tree: String,
}

struct Lexicalizer {
    /// Per POS: target word index for each source word index.
    bijection: BTreeMap<String, Vec<usize>>,
    pos_rank: BTreeMap<String, usize>,
}

const SOURCE_CONSONANTS: &[u8] = b"bdgklmnprs";
const TARGET_CONSONANTS: &[u8] = b"cfhjqtvwxz";
const VOWELS: &[u8] = b"aeiou";

impl Lexicalizer {
    fn new(config: &GenConfig, rng: &mut ChaCha8Rng) -> Self {
        let mut bijection = BTreeMap::new();
        let mut pos_rank = BTreeMap::new();
        for (rank, (pos, &n)) in config.lexicon.iter().enumerate() {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(rng);
            bijection.insert(pos.clone(), perm);
            pos_rank.insert(pos.clone(), rank);
        }
        Lexicalizer { bijection, pos_rank }
    }

    fn word(&self, pos: &str, index: usize, target: bool) -> String {
        let (consonants, index) = if target {
            (TARGET_CONSONANTS, self.bijection[pos][index])
        } else {
            (SOURCE_CONSONANTS, index)
        };
        let base = consonants.len() * VOWELS.len();
        // The first syllable encodes the POS so forms never collide across tags.
        let mut n = self.pos_rank[pos] * 10_000 + index;
        let mut out = String::new();
        for _ in 0..3 {
            let d = n % base;
            n /= base;
            out.push(consonants[d / VOWELS.len()] as char);
            out.push(VOWELS[d % VOWELS.len()] as char);
        }
        while n > 0 {
            let d = n % base;
            n /= base;
            out.push(consonants[d / VOWELS.len()] as char);
            out.push(VOWELS[d % VOWELS.len()] as char);
        }
        out
    }
}

struct Generator<'c> {
    config: &'c GenConfig,
    by_lhs: BTreeMap<&'c str, Vec<usize>>,
}

impl<'c> Generator<'c> {
    fn expand(&self, symbol: &str, depth: usize, rng: &mut ChaCha8Rng) -> Option<Deriv> {
        if let Some(&n) = self.config.lexicon.get(symbol) {
            return Some(Deriv::Word {
                pos: symbol.to_string(),
                word: rng.random_range(0..n),
            });
        }
        if depth > self.config.max_depth {
            return None;
        }
        let options = &self.by_lhs[symbol];
        let total: f64 = options.iter().map(|&r| self.config.rules[r].weight).sum();
        let mut pick = rng.random_range(0.0..total);
        let mut chosen = *options.last().expect("validated: every lhs has rules");
        for &r in options {
            let w = self.config.rules[r].weight;
            if pick < w {
                chosen = r;
                break;
            }
            pick -= w;
        }
        let children = self.config.rules[chosen]
            .children
            .iter()
            .map(|c| self.expand(&c.symbol, depth + 1, rng))
            .collect::<Option<Vec<_>>>()?;
        Some(Deriv::Node {
            rule: chosen,
            children,
        })
    }

    fn realize(
        &self,
        d: &Deriv,
        attach: &str,
        target: bool,
        lex: &Lexicalizer,
        out: &mut Realization,
    ) -> Placed {
        match d {
            Deriv::Word { pos, word } => {
                let at = out.tokens.len();
                let token = lex.word(pos, *word, target);
                out.tree.push_str(&token);
                out.tokens.push(token);
                out.pos.push(pos.clone());
                out.deprel.push(attach.to_string());
                Placed {
                    interval: (at, at),
                    children: Vec::new(),
                }
            }
            Deriv::Node { rule, children } => {
                let r = &self.config.rules[*rule];
                let order: Vec<usize> = match (&r.target_order, target) {
                    (Some(o), true) => o.clone(),
                    _ => (0..children.len()).collect(),
                };
                out.tree.push('(');
                out.tree.push_str(&r.label);
                let mut placed: Vec<Option<Placed>> = (0..children.len()).map(|_| None).collect();
                for &i in &order {
                    out.tree.push(' ');
                    let label = if i == r.head {
                        attach.to_string()
                    } else {
                        r.children[i].deprel.clone().unwrap_or_else(|| "dep".into())
                    };
                    placed[i] = Some(self.realize(&children[i], &label, target, lex, out));
                }
                out.tree.push(')');
                let children: Vec<Placed> = placed.into_iter().map(|p| p.expect("every child placed")).collect();
                let start = children.iter().map(|c| c.interval.0).min().expect("non-empty");
                let end = children.iter().map(|c| c.interval.1).max().expect("non-empty");
                Placed {
                    interval: (start, end),
                    children,
                }
            }
        }
    }

    fn mentions(&self, d: &Deriv, placed: &Placed, out: &mut Vec<Mention>) -> Result<()> {
        let Deriv::Node { rule, children } = d else {
            return Ok(());
        };
        let r = &self.config.rules[*rule];
        if let Some(e) = &r.entity {
            out.push(Mention::Entity {
                span: placed.interval,
                label: e.clone(),
            });
        }
        let resolve = |path: &SlotPath| {
            placed.resolve(path).map(|p| p.interval).ok_or_else(|| {
                ShineError::Config(format!("path {path:?} does not resolve under {}", r.lhs))
            })
        };
        for rel in &r.relations {
            out.push(Mention::Relation {
                subject: resolve(&rel.subject)?,
                object: resolve(&rel.object)?,
                label: rel.label.clone(),
            });
        }
        for ev in &r.events {
            let trigger = resolve(&ev.trigger)?;
            for a in &ev.arguments {
                out.push(Mention::EventArg {
                    trigger,
                    argument: resolve(&a.path)?,
                    role: a.role.clone(),
                    event: ev.event.clone(),
                });
            }
        }
        for (c, p) in children.iter().zip(&placed.children) {
            self.mentions(c, p, out)?;
        }
        Ok(())
    }
}

fn bio_tags(len: usize, mentions: &[Mention]) -> Result<Vec<String>> {
    let mut tags = vec!["O".to_string(); len];
    for m in mentions {
        if let Mention::Entity { span: (s, e), label } = m {
            if tags[*s..=*e].iter().any(|t| t != "O") {
                return Err(ShineError::Config("grammar produces overlapping entities".into()));
            }
            tags[*s] = format!("B-{label}");
            for t in &mut tags[s + 1..=*e] {
                *t = format!("I-{label}");
            }
        }
    }
    Ok(tags)
}

/// Generates `config.sentences` derivations and realizes each in both languages.
pub fn generate_synthetic_pair(config: &GenConfig, seed: u64) -> Result<(Corpus, Corpus)> {
    config.validate()?;
    let schemas = config.schemas()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lex = Lexicalizer::new(config, &mut rng);
    let mut by_lhs: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in config.rules.iter().enumerate() {
        by_lhs.entry(r.lhs.as_str()).or_default().push(i);
    }
    let generator = Generator { config, by_lhs };

    let mut source = Vec::with_capacity(config.sentences);
    let mut target = Vec::with_capacity(config.sentences);
    for k in 0..config.sentences {
        let mut deriv = None;
        for _ in 0..100 {
            deriv = generator.expand(&config.start, 0, &mut rng);
            if deriv.is_some() {
                break;
            }
        }
        let deriv = deriv.ok_or_else(|| {
            ShineError::Config(format!("no derivation within depth {}", config.max_depth))
        })?;
        for (is_target, lang, bucket) in [
            (false, &config.source_language, &mut source),
            (true, &config.target_language, &mut target),
        ] {
            let mut real = Realization::default();
            let placed = generator.realize(&deriv, "root", is_target, &lex, &mut real);
            let mut mentions = Vec::new();
            generator.mentions(&deriv, &placed, &mut mentions)?;
            let tree = parse_bracketed_tree(&real.tree)?;
            let spans = phrase_spans(&tree, &schemas)?;
            let entity_tags = bio_tags(real.tokens.len(), &mentions)?;
            bucket.push(Sentence {
                id: format!("{lang}-{k:05}"),
                tokens: real.tokens,
                pos: real.pos,
                deprel: real.deprel,
                entity_tags,
                tree,
                spans,
                mentions,
            });
        }
    }
    let make = |language: &str, sentences| {
        let c = Corpus {
            language: language.to_string(),
            schemas: schemas.clone(),
            sentences,
        };
        c.validate().map(|_| c)
    };
    Ok((make(&config.source_language, source)?, make(&config.target_language, target)?))
}
