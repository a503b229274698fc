use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::attention::frequency_attention;
use crate::error::Result;
use crate::numerics::{Graph, Init, ParamId, ParamStore, Tensor, Var};

#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    pub fn register<R: Rng>(store: &mut ParamStore, name: &str, input: usize, output: usize, rng: &mut R) -> Result<Self> {
        Ok(Linear {
            weight: store.init(format!("{name}.weight"), input, output, Init::Xavier, rng)?,
            bias: store.init(format!("{name}.bias"), 1, output, Init::Zeros, rng)?,
        })
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let w = g.param(self.weight);
        let b = g.param(self.bias);
        let y = g.matmul(x, w)?;
        g.add_row(y, b)
    }
}

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
}

impl LayerNorm {
    pub fn register<R: Rng>(store: &mut ParamStore, name: &str, width: usize, rng: &mut R) -> Result<Self> {
        Ok(LayerNorm {
            gain: store.init(format!("{name}.gain"), 1, width, Init::Ones, rng)?,
            bias: store.init(format!("{name}.bias"), 1, width, Init::Zeros, rng)?,
        })
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let gain = g.param(self.gain);
        let bias = g.param(self.bias);
        g.layer_norm(x, gain, bias)
    }
}

/// Inverted dropout driven by a seeded generator; a no-op when `rng` is `None`.
pub struct Dropout<'r> {
    pub rate: f64,
    pub rng: Option<&'r mut ChaCha8Rng>,
}

impl<'r> Dropout<'r> {
    pub fn disabled() -> Self {
        Dropout { rate: 0.0, rng: None }
    }

    pub fn apply(&mut self, g: &mut Graph, x: Var) -> Result<Var> {
        let rate = self.rate;
        let Some(rng) = self.rng.as_deref_mut() else {
            return Ok(x);
        };
        if rate <= 0.0 {
            return Ok(x);
        }
        let shape = g.shape(x).to_vec();
        let keep = 1.0 / (1.0 - rate);
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
            .collect();
        g.mul_const(x, Tensor::new(shape, data)?)
    }
}

/// Multi-head self-attention; when a frequency matrix is supplied every head's
/// weights are modulated by it.
#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    pub heads: usize,
}

impl MultiHeadAttention {
    pub fn register<R: Rng>(store: &mut ParamStore, name: &str, d_model: usize, heads: usize, rng: &mut R) -> Result<Self> {
        Ok(MultiHeadAttention {
            query: Linear::register(store, &format!("{name}.query"), d_model, d_model, rng)?,
            key: Linear::register(store, &format!("{name}.key"), d_model, d_model, rng)?,
            value: Linear::register(store, &format!("{name}.value"), d_model, d_model, rng)?,
            output: Linear::register(store, &format!("{name}.output"), d_model, d_model, rng)?,
            heads,
        })
    }

    pub fn forward(&self, g: &mut Graph, x: Var, mask: &[bool], freq: Option<&Tensor>) -> Result<Var> {
        let q = self.query.forward(g, x)?;
        let k = self.key.forward(g, x)?;
        let v = self.value.forward(g, x)?;
        let d_model = g.shape(x)[1];
        let d_head = d_model / self.heads;
        let mut outs = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let (a, b) = (h * d_head, (h + 1) * d_head);
            let qh = g.slice_cols(q, a, b)?;
            let kh = g.slice_cols(k, a, b)?;
            let vh = g.slice_cols(v, a, b)?;
            outs.push(frequency_attention(g, qh, kh, vh, freq, mask)?);
        }
        let joined = if outs.len() == 1 { outs[0] } else { g.concat_cols(&outs)? };
        self.output.forward(g, joined)
    }
}

/// Post-norm transformer block: attention and a GELU feed-forward network,
/// each with dropout, a residual connection and layer normalization.
#[derive(Debug, Clone)]
pub struct TransformerLayer {
    pub attention: MultiHeadAttention,
    pub norm1: LayerNorm,
    pub ff_in: Linear,
    pub ff_out: Linear,
    pub norm2: LayerNorm,
}

impl TransformerLayer {
    pub fn register<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        d_model: usize,
        heads: usize,
        ff_width: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(TransformerLayer {
            attention: MultiHeadAttention::register(store, &format!("{name}.attn"), d_model, heads, rng)?,
            norm1: LayerNorm::register(store, &format!("{name}.norm1"), d_model, rng)?,
            ff_in: Linear::register(store, &format!("{name}.ff_in"), d_model, ff_width, rng)?,
            ff_out: Linear::register(store, &format!("{name}.ff_out"), ff_width, d_model, rng)?,
            norm2: LayerNorm::register(store, &format!("{name}.norm2"), d_model, rng)?,
        })
    }

    pub fn forward(
        &self,
        g: &mut Graph,
        x: Var,
        mask: &[bool],
        freq: Option<&Tensor>,
        dropout: &mut Dropout,
    ) -> Result<Var> {
        let a = self.attention.forward(g, x, mask, freq)?;
        let a = dropout.apply(g, a)?;
        let r = g.add(x, a)?;
        let h = self.norm1.forward(g, r)?;
        let f = self.ff_in.forward(g, h)?;
        let f = g.gelu(f)?;
        let f = self.ff_out.forward(g, f)?;
        let f = dropout.apply(g, f)?;
        let r = g.add(h, f)?;
        self.norm2.forward(g, r)
    }
}

/// `rows × width` tensor of ones on real rows and zeros on padding.
pub fn row_mask(mask: &[bool], width: usize) -> Tensor {
    let data = mask
        .iter()
        .flat_map(|&m| std::iter::repeat_n(if m { 1.0 } else { 0.0 }, width))
        .collect();
    Tensor::from_rows(mask.len(), width, data).expect("sized from mask")
}

/// Fixed sinusoidal position table.
pub fn sinusoidal_positions(len: usize, d_model: usize) -> Tensor {
    let mut t = Tensor::zeros(len, d_model);
    for pos in 0..len {
        for i in 0..d_model {
            let exponent = (2 * (i / 2)) as f64 / d_model as f64;
            let angle = pos as f64 / 10_000f64.powf(exponent);
            t.set(pos, i, if i % 2 == 0 { angle.sin() } else { angle.cos() });
        }
    }
    t
}
