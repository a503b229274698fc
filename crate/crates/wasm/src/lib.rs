//! wasm-bindgen bindings for the static demo page in `www/`.
//!
//! Each export has a plain `*_json` twin returning `Result<String, String>`
//! so the logic runs and is tested natively.

use serde_json::{json, Value};
use shine::encoder::{frequency_tensor, modulate_weights};
use shine::interaction::sym_kl;
use shine::numerics::Tensor;
use shine::syntax::{build_frequency_matrix, build_span_counts, extract_spans, parse_bracketed_tree, PhraseSchema};
use wasm_bindgen::prelude::*;

const DEFAULT_LABELS: &str = "NP VP PP S";

fn labels_of(text: &str) -> Vec<&str> {
    let text = if text.trim().is_empty() { DEFAULT_LABELS } else { text };
    text.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect()
}

fn parse_matrix(text: &str, len: usize) -> Result<Tensor, String> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(text).map_err(|e| format!("attention: {e}"))?;
    if rows.len() != len || rows.iter().any(|r| r.len() != len) {
        return Err(format!("attention must be {len}x{len}"));
    }
    if rows.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
        return Err("attention weights must be finite and non-negative".into());
    }
    Tensor::from_rows(len, len, rows.concat()).map_err(|e| e.to_string())
}

fn to_rows(t: &Tensor) -> Vec<Vec<f64>> {
    (0..t.rows()).map(|r| t.row(r).to_vec()).collect()
}

fn matrix<T: Copy + Into<Value>>(rows: impl Iterator<Item = impl AsRef<[T]>>) -> Value {
    rows.map(|r| r.as_ref().iter().map(|&v| v.into()).collect::<Value>()).collect()
}

/// Span-count matrix and frequency matrix of a bracketed tree. Phrase nodes
/// whose label is outside `labels` are reported under `skipped`.
pub fn featurize_json(tree: &str, labels: &str) -> Result<String, String> {
    let tree = parse_bracketed_tree(tree).map_err(|e| e.to_string())?;
    let schema = PhraseSchema::new(labels_of(labels)).map_err(|e| e.to_string())?;
    let (spans, skipped): (Vec<_>, Vec<_>) = extract_spans(&tree).into_iter().partition(|s| schema.contains(&s.label));
    let x = build_span_counts(&spans, tree.len(), &schema).map_err(|e| e.to_string())?;
    let f = build_frequency_matrix(&spans, tree.len()).map_err(|e| e.to_string())?;
    let span = |s: &shine::syntax::ConstituentSpan| json!([s.start, s.end, s.label]);
    Ok(json!({
        "tokens": tree.tokens(),
        "columns": x.columns(),
        "spans": spans.iter().map(span).collect::<Vec<_>>(),
        "skipped": skipped.iter().map(span).collect::<Vec<_>>(),
        "counts": matrix(x.rows()),
        "frequency": matrix((0..f.len()).map(|i| f.row(i))),
    })
    .to_string())
}

/// Reweights attention rows by the tree's frequency matrix and renormalizes.
/// An empty `attention` string stands for uniform attention.
pub fn modulate_json(tree: &str, labels: &str, attention: &str) -> Result<String, String> {
    let parsed = parse_bracketed_tree(tree).map_err(|e| e.to_string())?;
    let schema = PhraseSchema::new(labels_of(labels)).map_err(|e| e.to_string())?;
    let spans: Vec<_> = extract_spans(&parsed).into_iter().filter(|s| schema.contains(&s.label)).collect();
    let len = parsed.len();
    let f = frequency_tensor(&build_frequency_matrix(&spans, len).map_err(|e| e.to_string())?, len);
    let a = if attention.trim().is_empty() {
        Tensor::filled(len, len, 1.0 / len as f64)
    } else {
        parse_matrix(attention, len)?
    };
    let g = modulate_weights(&a, &f).map_err(|e| e.to_string())?;
    Ok(json!({
        "tokens": parsed.tokens(),
        "frequency": to_rows(&f),
        "attention": to_rows(&a),
        "modulated": to_rows(&g),
    })
    .to_string())
}

/// Symmetric KL between two non-negative vectors, each normalized first.
pub fn sym_kl_json(p: &str, q: &str) -> Result<String, String> {
    let read = |name: &str, text: &str| -> Result<Vec<f64>, String> {
        let v: Vec<f64> = serde_json::from_str(text).map_err(|e| format!("{name}: {e}"))?;
        let total: f64 = v.iter().sum();
        if v.is_empty() || v.iter().any(|x| !x.is_finite() || *x < 0.0) || total <= 0.0 {
            return Err(format!("{name} must be a non-empty list of non-negative numbers"));
        }
        Ok(v.into_iter().map(|x| x / total).collect())
    };
    let (p, q) = (read("p", p)?, read("q", q)?);
    let value = sym_kl(&p, &q).map_err(|e| e.to_string())?;
    let kl = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| x * (x.max(1e-8).ln() - y.max(1e-8).ln())).sum()
    };
    Ok(json!({
        "p": p,
        "q": q,
        "forward": kl(&p, &q),
        "backward": kl(&q, &p),
        "symmetric": value,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn featurize(tree: &str, labels: &str) -> Result<String, JsValue> {
    featurize_json(tree, labels).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn modulate(tree: &str, labels: &str, attention: &str) -> Result<String, JsValue> {
    modulate_json(tree, labels, attention).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn symmetric_kl(p: &str, q: &str) -> Result<String, JsValue> {
    sym_kl_json(p, q).map_err(|e| JsValue::from_str(&e))
}
