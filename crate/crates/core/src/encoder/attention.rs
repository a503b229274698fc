use crate::error::{Result, ShineError};
use crate::numerics::{Graph, ParamStore, Tensor, Var};
use crate::syntax::FrequencyMatrix;

/// Scaled dot-product attention for one head.
///
/// `A = softmax(Q Kᵀ / sqrt(d_k))` over unmasked key columns. With a frequency
/// matrix `F` the weights become `G(A)_ij = F_ij A_ij / Σ_j F_ij A_ij` before
/// multiplying `V`; without one `A` is used directly.
pub fn frequency_attention(
    g: &mut Graph,
    q: Var,
    k: Var,
    v: Var,
    freq: Option<&Tensor>,
    mask: &[bool],
) -> Result<Var> {
    let weights = attention_weights(g, q, k, freq, mask)?;
    g.matmul(weights, v)
}

/// The (possibly modulated) attention matrix alone.
pub fn attention_weights(g: &mut Graph, q: Var, k: Var, freq: Option<&Tensor>, mask: &[bool]) -> Result<Var> {
    let len = g.shape(q)[0];
    if g.shape(k)[0] != len || mask.len() != len {
        return Err(ShineError::shape("attention", g.shape(q), g.shape(k)));
    }
    let d_k = g.shape(q)[1] as f64;
    let kt = g.transpose(k)?;
    let scores = g.matmul(q, kt)?;
    let scores = g.scale(scores, 1.0 / d_k.sqrt())?;
    let a = g.softmax_masked(scores, Some(mask))?;
    match freq {
        None => Ok(a),
        Some(f) => {
            if f.shape() != [len, len] {
                return Err(ShineError::shape("frequency_attention", &[len, len], f.shape()));
            }
            let modulated = g.mul_const(a, f.clone())?;
            g.row_normalize(modulated)
        }
    }
}

/// `G(A)` for a fixed attention matrix, outside any graph.
pub fn modulate_weights(attention: &Tensor, freq: &Tensor) -> Result<Tensor> {
    let store = ParamStore::new();
    let mut g = Graph::new(&store);
    let a = g.input(attention.clone())?;
    let m = g.mul_const(a, freq.clone())?;
    let out = g.row_normalize(m)?;
    Ok(g.value(out).clone())
}

/// Frequency matrix as a real tensor, padded with ones to `len`.
pub fn frequency_tensor(freq: &FrequencyMatrix, len: usize) -> Tensor {
    let f = if freq.len() == len { freq.clone() } else { freq.padded(len) };
    Tensor::from_rows(len, len, f.to_f64()).expect("square")
}
