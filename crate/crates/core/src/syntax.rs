//! Constituency trees and the two span-derived syntax features.
//!
//! A bracketed tree such as `(S (NP they) (VP have (VP received (NP deployment orders))))`
//! is parsed into a [`ConstituencyTree`], flattened into [`ConstituentSpan`]s, and
//! turned into:
//!
//! * a [`SpanFeatureMatrix`]: per-token counts of BIO-expanded span memberships,
//! * a [`FrequencyMatrix`]: for every token pair, how many constituents contain
//!   the enclosed sub-span (floored at 1, diagonal fixed at 1).

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, ShineError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreeNode {
    Phrase {
        label: String,
        children: Vec<TreeNode>,
    },
    Leaf {
        index: usize,
        token: String,
    },
}

impl TreeNode {
    fn leaf_range(&self) -> (usize, usize) {
        match self {
            TreeNode::Leaf { index, .. } => (*index, *index),
            TreeNode::Phrase { children, .. } => {
                let first = children.first().expect("phrase nodes are never empty");
                let last = children.last().expect("phrase nodes are never empty");
                (first.leaf_range().0, last.leaf_range().1)
            }
        }
    }

    fn write_canonical(&self, out: &mut String) {
        match self {
            TreeNode::Leaf { token, .. } => out.push_str(token),
            TreeNode::Phrase { label, children } => {
                out.push('(');
                out.push_str(label);
                for child in children {
                    out.push(' ');
                    child.write_canonical(out);
                }
                out.push(')');
            }
        }
    }
}

/// A parsed constituency tree. The root is always a phrase node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstituencyTree {
    root: TreeNode,
    tokens: Vec<String>,
}

impl ConstituencyTree {
    pub fn root(&self) -> &TreeNode {
        &self.root
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Canonical single-space bracketed form.
    pub fn to_bracketed(&self) -> String {
        let mut out = String::new();
        self.root.write_canonical(&mut out);
        out
    }

    /// Number of phrase (non-leaf) nodes.
    pub fn phrase_count(&self) -> usize {
        fn count(node: &TreeNode) -> usize {
            match node {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Phrase { children, .. } => 1 + children.iter().map(count).sum::<usize>(),
            }
        }
        count(&self.root)
    }
}

impl fmt::Display for ConstituencyTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bracketed())
    }
}

/// Inclusive token interval carrying a phrase label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConstituentSpan {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

impl ConstituentSpan {
    pub fn new(start: usize, end: usize, label: impl Into<String>) -> Self {
        ConstituentSpan {
            start,
            end,
            label: label.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.start <= a && b <= self.end
    }

    /// `start,end,label` debugging triple.
    pub fn to_csv(&self) -> String {
        format!("{},{},{}", self.start, self.end, self.label)
    }

    pub fn from_csv(line: &str) -> Result<Self> {
        let mut parts = line.trim().splitn(3, ',');
        let bad = || ShineError::Parse {
            offset: 0,
            message: format!("expected start,end,label but got {line:?}"),
        };
        let start = parts.next().and_then(|s| s.trim().parse().ok()).ok_or_else(bad)?;
        let end = parts.next().and_then(|s| s.trim().parse().ok()).ok_or_else(bad)?;
        let label = parts.next().map(str::trim).filter(|s| !s.is_empty()).ok_or_else(bad)?;
        if end < start {
            return Err(bad());
        }
        Ok(ConstituentSpan::new(start, end, label))
    }
}

impl fmt::Display for ConstituentSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.start, self.end, self.label)
    }
}

enum Frame {
    Open { label: String, children: Vec<TreeNode>, offset: usize },
}

/// Parses an S-expression tree: `(LABEL child ...)`, where a child is either a
/// nested expression or a bare token.
pub fn parse_bracketed_tree(text: &str) -> Result<ConstituencyTree> {
    let bytes = text.as_bytes();
    let mut stack: Vec<Frame> = Vec::new();
    let mut tokens: Vec<String> = Vec::new();
    let mut root: Option<TreeNode> = None;
    let mut pos = 0;

    let err = |offset: usize, message: &str| ShineError::Parse {
        offset,
        message: message.to_string(),
    };

    while pos < bytes.len() {
        let c = bytes[pos];
        if c.is_ascii_whitespace() {
            pos += 1;
            continue;
        }
        if root.is_some() {
            return Err(err(pos, "trailing input after the root node"));
        }
        match c {
            b'(' => {
                let open_at = pos;
                pos += 1;
                while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                    pos += 1;
                }
                let start = pos;
                while pos < bytes.len() && !is_delimiter(bytes[pos]) {
                    pos += 1;
                }
                if start == pos {
                    if pos < bytes.len() && bytes[pos] == b')' {
                        return Err(err(open_at, "empty node"));
                    }
                    return Err(err(pos, "expected a node label"));
                }
                stack.push(Frame::Open {
                    label: text[start..pos].to_string(),
                    children: Vec::new(),
                    offset: open_at,
                });
            }
            b')' => {
                let Some(Frame::Open {
                    label,
                    children,
                    offset,
                }) = stack.pop()
                else {
                    return Err(err(pos, "unbalanced ')'"));
                };
                if children.is_empty() {
                    return Err(err(offset, "empty node"));
                }
                let node = TreeNode::Phrase { label, children };
                match stack.last_mut() {
                    Some(Frame::Open { children, .. }) => children.push(node),
                    None => root = Some(node),
                }
                pos += 1;
            }
            _ => {
                let start = pos;
                while pos < bytes.len() && !is_delimiter(bytes[pos]) {
                    pos += 1;
                }
                let Some(Frame::Open { children, .. }) = stack.last_mut() else {
                    return Err(err(start, "token outside of any node"));
                };
                let index = tokens.len();
                let token = text[start..pos].to_string();
                tokens.push(token.clone());
                children.push(TreeNode::Leaf { index, token });
            }
        }
    }

    if let Some(Frame::Open { offset, .. }) = stack.last() {
        return Err(err(*offset, "unbalanced '(': node is never closed"));
    }
    let root = root.ok_or_else(|| err(0, "no tree found"))?;
    if tokens.is_empty() {
        return Err(err(0, "tree has no tokens"));
    }
    Ok(ConstituencyTree { root, tokens })
}

fn is_delimiter(b: u8) -> bool {
    b == b'(' || b == b')' || b.is_ascii_whitespace()
}

/// One span per phrase node in pre-order. Duplicate intervals are kept.
pub fn extract_spans(tree: &ConstituencyTree) -> Vec<ConstituentSpan> {
    fn walk(node: &TreeNode, out: &mut Vec<ConstituentSpan>) {
        if let TreeNode::Phrase { label, children } = node {
            let (start, end) = node.leaf_range();
            out.push(ConstituentSpan::new(start, end, label.clone()));
            for child in children {
                walk(child, out);
            }
        }
    }
    let mut out = Vec::new();
    walk(&tree.root, &mut out);
    out
}

/// Closed, ordered phrase-label schema with its BIO column layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhraseSchema {
    labels: Vec<String>,
}

impl PhraseSchema {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(ShineError::Schema(format!("duplicate phrase label {l:?}")));
            }
        }
        Ok(PhraseSchema { labels })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.position(label).is_some()
    }

    /// Number of BIO columns (two per label).
    pub fn width(&self) -> usize {
        2 * self.labels.len()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.labels
            .iter()
            .flat_map(|l| [format!("B-{l}"), format!("I-{l}")])
            .collect()
    }
}

/// L×C count matrix; column `2k` is `B-label_k`, column `2k+1` is `I-label_k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanFeatureMatrix {
    len: usize,
    counts: Vec<u32>,
    label_index: BTreeMap<String, usize>,
    columns: Vec<String>,
}

impl SpanFeatureMatrix {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn label_index(&self) -> &BTreeMap<String, usize> {
        &self.label_index
    }

    pub fn get(&self, token: usize, column: usize) -> u32 {
        self.counts[token * self.width() + column]
    }

    pub fn row(&self, token: usize) -> &[u32] {
        let w = self.width();
        &self.counts[token * w..(token + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> {
        (0..self.len).map(move |i| self.row(i))
    }
}

/// Sums the BIO one-hot vectors of every span: `(s, B-X)` gets one count and
/// each `(k, I-X)` with `s < k <= e` gets one count.
pub fn build_span_counts(
    spans: &[ConstituentSpan],
    len: usize,
    schema: &PhraseSchema,
) -> Result<SpanFeatureMatrix> {
    let width = schema.width();
    let mut counts = vec![0u32; len * width];
    for span in spans {
        check_span(span, len)?;
        let k = schema
            .position(&span.label)
            .ok_or_else(|| ShineError::Schema(format!("unknown phrase label {:?}", span.label)))?;
        counts[span.start * width + 2 * k] += 1;
        for tok in span.start + 1..=span.end {
            counts[tok * width + 2 * k + 1] += 1;
        }
    }
    let columns = schema.column_names();
    let label_index = columns.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
    Ok(SpanFeatureMatrix {
        len,
        counts,
        label_index,
        columns,
    })
}

fn check_span(span: &ConstituentSpan, len: usize) -> Result<()> {
    if span.start > span.end || span.end >= len {
        return Err(ShineError::Range {
            start: span.start,
            end: span.end,
            len,
        });
    }
    Ok(())
}

/// Symmetric L×L sub-span importance matrix with entries ≥ 1 and a unit diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyMatrix {
    len: usize,
    values: Vec<u32>,
}

impl FrequencyMatrix {
    /// The neutral matrix: every entry 1.
    pub fn ones(len: usize) -> Self {
        FrequencyMatrix {
            len,
            values: vec![1; len * len],
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.values[i * self.len + j]
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.values[i * self.len..(i + 1) * self.len]
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    /// Row-major entries as reals.
    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| f64::from(v)).collect()
    }

    /// Embeds the matrix in a larger one, padding new rows/columns with 1.
    pub fn padded(&self, len: usize) -> Self {
        assert!(len >= self.len, "cannot pad to a shorter length");
        let mut out = FrequencyMatrix::ones(len);
        for i in 0..self.len {
            out.values[i * len..i * len + self.len].copy_from_slice(self.row(i));
        }
        out
    }
}

/// Counts, for each token pair `i != j`, the constituents covering `[min, max]`.
pub fn build_frequency_matrix(spans: &[ConstituentSpan], len: usize) -> Result<FrequencyMatrix> {
    if len == 0 {
        return Err(ShineError::Empty("frequency matrix of a zero-length sentence".into()));
    }
    let mut raw = vec![0u32; len * len];
    for span in spans {
        check_span(span, len)?;
        for a in span.start..=span.end {
            for b in a + 1..=span.end {
                raw[a * len + b] += 1;
            }
        }
    }
    let mut values = vec![1u32; len * len];
    for a in 0..len {
        for b in a + 1..len {
            let v = raw[a * len + b].max(1);
            values[a * len + b] = v;
            values[b * len + a] = v;
        }
    }
    Ok(FrequencyMatrix { len, values })
}
