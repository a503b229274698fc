//! Contextual, language-universal and fused sentence representations.
//!
//! * `h_c`: token embeddings plus sinusoidal positions through a small
//!   transformer.
//! * `h_l`: the concatenated one-hot/count feature matrix projected to
//!   `d_model` and passed through a position-free transformer.
//! * `h_f`: a linear map of `[h_c ; h_l]` followed by transformer layers whose
//!   attention is modulated by the sentence's frequency matrix.

pub mod attention;
pub mod layers;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Schemas, Sentence};
use crate::error::{Result, ShineError};
use crate::numerics::{Graph, Init, ParamId, ParamStore, Tensor, Var};
use crate::syntax::build_span_counts;

pub use attention::{attention_weights, frequency_attention, frequency_tensor, modulate_weights};
pub use layers::{row_mask, sinusoidal_positions, Dropout, LayerNorm, Linear, MultiHeadAttention, TransformerLayer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub d_model: usize,
    pub contextual_layers: usize,
    pub feature_layers: usize,
    pub fusion_layers: usize,
    pub heads: usize,
    pub ff_width: usize,
    pub dropout: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            d_model: 64,
            contextual_layers: 2,
            feature_layers: 2,
            fusion_layers: 1,
            heads: 8,
            ff_width: 256,
            dropout: 0.1,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("d_model", self.d_model),
            ("contextual_layers", self.contextual_layers),
            ("feature_layers", self.feature_layers),
            ("fusion_layers", self.fusion_layers),
            ("heads", self.heads),
            ("ff_width", self.ff_width),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(ShineError::Config(format!("{name} must be at least 1")));
        }
        if self.d_model % self.heads != 0 {
            return Err(ShineError::Config(format!(
                "d_model {} is not divisible by {} heads",
                self.d_model, self.heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ShineError::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

/// Which language-universal blocks enter `x_l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub entity: bool,
    pub constituency: bool,
}

impl FeatureLayout {
    pub fn width(&self, schemas: &Schemas) -> usize {
        schemas.pos.len()
            + schemas.deprel.len()
            + if self.entity { schemas.bio_tags().len() } else { 0 }
            + if self.constituency { schemas.phrase.width() } else { 0 }
    }
}

/// Language-universal features of one sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBundle {
    pub pos: Tensor,
    pub deprel: Tensor,
    pub entity: Option<Tensor>,
    pub constituency: Option<Tensor>,
}

impl FeatureBundle {
    pub fn len(&self) -> usize {
        self.pos.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Column-wise concatenation `[x_p ; x_d ; x_e ; x_c]`.
    pub fn concat(&self) -> Tensor {
        let blocks: Vec<&Tensor> = [Some(&self.pos), Some(&self.deprel), self.entity.as_ref(), self.constituency.as_ref()]
            .into_iter()
            .flatten()
            .collect();
        let rows = self.len();
        let width: usize = blocks.iter().map(|b| b.cols()).sum();
        let mut out = Tensor::zeros(rows, width);
        for r in 0..rows {
            let mut at = 0;
            for b in &blocks {
                out.row_mut(r)[at..at + b.cols()].copy_from_slice(b.row(r));
                at += b.cols();
            }
        }
        out
    }

    pub fn width(&self) -> usize {
        self.pos.cols()
            + self.deprel.cols()
            + self.entity.as_ref().map_or(0, Tensor::cols)
            + self.constituency.as_ref().map_or(0, Tensor::cols)
    }
}

fn one_hot(tags: &[String], labels: &[String], what: &str) -> Result<Tensor> {
    let mut t = Tensor::zeros(tags.len(), labels.len());
    for (i, tag) in tags.iter().enumerate() {
        let j = labels
            .iter()
            .position(|l| l == tag)
            .ok_or_else(|| ShineError::Schema(format!("unknown {what} tag {tag:?}")))?;
        t.set(i, j, 1.0);
    }
    Ok(t)
}

pub fn featurize(sentence: &Sentence, schemas: &Schemas, layout: FeatureLayout) -> Result<FeatureBundle> {
    let pos = one_hot(&sentence.pos, &schemas.pos, "POS")?;
    let deprel = one_hot(&sentence.deprel, &schemas.deprel, "deprel")?;
    let entity = if layout.entity {
        Some(one_hot(&sentence.entity_tags, &schemas.bio_tags(), "entity")?)
    } else {
        None
    };
    let constituency = if layout.constituency {
        let counts = build_span_counts(&sentence.spans, sentence.len(), &schemas.phrase)?;
        let data = counts.rows().flat_map(|r| r.iter().map(|&c| f64::from(c))).collect();
        Some(Tensor::from_rows(sentence.len(), counts.width(), data)?)
    } else {
        None
    };
    Ok(FeatureBundle {
        pos,
        deprel,
        entity,
        constituency,
    })
}

#[derive(Debug, Clone)]
pub struct ContextualEncoder {
    pub embedding: ParamId,
    pub layers: Vec<TransformerLayer>,
}

impl ContextualEncoder {
    pub fn register<R: Rng>(store: &mut ParamStore, cfg: &EncoderConfig, vocab_size: usize, rng: &mut R) -> Result<Self> {
        let embedding = store.init("contextual.embedding", vocab_size, cfg.d_model, Init::Embedding, rng)?;
        let layers = (0..cfg.contextual_layers)
            .map(|i| TransformerLayer::register(store, &format!("contextual.layer{i}"), cfg.d_model, cfg.heads, cfg.ff_width, rng))
            .collect::<Result<_>>()?;
        Ok(ContextualEncoder { embedding, layers })
    }

    /// `h_c`: one `d_model` row per position, zero on padding.
    pub fn forward(&self, g: &mut Graph, ids: &[usize], mask: &[bool], dropout: &mut Dropout) -> Result<Var> {
        if ids.len() != mask.len() {
            return Err(ShineError::shape("contextual_encode", &[ids.len()], &[mask.len()]));
        }
        let emb = g.param(self.embedding);
        let vocab = g.shape(emb)[0];
        if let Some(&bad) = ids.iter().find(|&&i| i >= vocab) {
            return Err(ShineError::Schema(format!("token id {bad} outside vocabulary of {vocab}")));
        }
        let d_model = g.shape(emb)[1];
        let x = g.gather_rows(emb, ids)?;
        let pe = g.input(sinusoidal_positions(ids.len(), d_model))?;
        let mut h = g.add(x, pe)?;
        h = dropout.apply(g, h)?;
        for layer in &self.layers {
            h = layer.forward(g, h, mask, None, dropout)?;
        }
        g.mul_const(h, row_mask(mask, d_model))
    }
}

#[derive(Debug, Clone)]
pub struct FeatureEncoder {
    pub input: Linear,
    pub layers: Vec<TransformerLayer>,
}

impl FeatureEncoder {
    pub fn register<R: Rng>(store: &mut ParamStore, cfg: &EncoderConfig, width: usize, rng: &mut R) -> Result<Self> {
        let input = Linear::register(store, "feature.input", width, cfg.d_model, rng)?;
        let layers = (0..cfg.feature_layers)
            .map(|i| TransformerLayer::register(store, &format!("feature.layer{i}"), cfg.d_model, cfg.heads, cfg.ff_width, rng))
            .collect::<Result<_>>()?;
        Ok(FeatureEncoder { input, layers })
    }

    /// `h_l` from the concatenated feature matrix. No positional signal is
    /// added, so the encoder is permutation-equivariant.
    pub fn forward(&self, g: &mut Graph, x_l: &Tensor, mask: &[bool], dropout: &mut Dropout) -> Result<Var> {
        let w = g.param(self.input.weight);
        let expected = g.shape(w)[0];
        if x_l.cols() != expected {
            return Err(ShineError::shape("feature_encode", &[x_l.rows(), expected], x_l.shape()));
        }
        if x_l.rows() != mask.len() {
            return Err(ShineError::shape("feature_encode", x_l.shape(), &[mask.len()]));
        }
        let x = g.input(x_l.clone())?;
        let mut h = self.input.forward(g, x)?;
        let d_model = g.shape(h)[1];
        for layer in &self.layers {
            h = layer.forward(g, h, mask, None, dropout)?;
        }
        g.mul_const(h, row_mask(mask, d_model))
    }
}

#[derive(Debug, Clone)]
pub struct Fusion {
    pub merge: Linear,
    pub layers: Vec<TransformerLayer>,
}

impl Fusion {
    pub fn register<R: Rng>(store: &mut ParamStore, cfg: &EncoderConfig, rng: &mut R) -> Result<Self> {
        let merge = Linear::register(store, "fusion.merge", 2 * cfg.d_model, cfg.d_model, rng)?;
        let layers = (0..cfg.fusion_layers)
            .map(|i| TransformerLayer::register(store, &format!("fusion.layer{i}"), cfg.d_model, cfg.heads, cfg.ff_width, rng))
            .collect::<Result<_>>()?;
        Ok(Fusion { merge, layers })
    }

    /// `h_w = Linear([h_c ; h_l])`, then frequency-modulated transformer layers.
    /// `freq = None` gives ordinary attention.
    pub fn forward(
        &self,
        g: &mut Graph,
        h_c: Var,
        h_l: Var,
        freq: Option<&Tensor>,
        mask: &[bool],
        dropout: &mut Dropout,
    ) -> Result<Var> {
        if g.shape(h_c) != g.shape(h_l) {
            return Err(ShineError::shape("fuse", g.shape(h_c), g.shape(h_l)));
        }
        let joined = g.concat_cols(&[h_c, h_l])?;
        let mut h = self.merge.forward(g, joined)?;
        let d_model = g.shape(h)[1];
        for layer in &self.layers {
            h = layer.forward(g, h, mask, freq, dropout)?;
        }
        g.mul_const(h, row_mask(mask, d_model))
    }
}
