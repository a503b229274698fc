use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Interval, Mention, Schemas, Sentence, Vocabulary};
use crate::encoder::{
    featurize, frequency_tensor, ContextualEncoder, Dropout, EncoderConfig, FeatureEncoder, FeatureLayout, Fusion,
};
use crate::error::{Result, ShineError};
use crate::numerics::checkpoint::{read_params, write_params};
use crate::numerics::{Graph, ParamStore, Tensor, Var};
use crate::syntax::build_frequency_matrix;
use crate::tasks::{
    argmax, candidate_mention, ner_forward, pair_candidates, pair_forward_with, sentence_representation, NerHead,
    PairCandidate, PairHead, Task,
};

/// Everything needed to rebuild a model's parameter layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub task: Task,
    pub encoder: EncoderConfig,
    pub layout: FeatureLayout,
    pub use_frequency: bool,
    pub schemas: Schemas,
    pub vocab: Vocabulary,
}

impl ModelSpec {
    pub fn new(task: Task, encoder: EncoderConfig, no_constituency: bool, no_frequency: bool, schemas: Schemas, vocab: Vocabulary) -> Self {
        ModelSpec {
            task,
            encoder,
            layout: FeatureLayout {
                entity: task != Task::Ner,
                constituency: !no_constituency,
            },
            use_frequency: !(no_frequency || no_constituency),
            schemas,
            vocab,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Head {
    Ner(NerHead),
    Pair(PairHead),
}

#[derive(Debug, Clone)]
pub struct ShineModel {
    pub spec: ModelSpec,
    pub store: ParamStore,
    pub contextual: ContextualEncoder,
    pub feature: FeatureEncoder,
    pub fusion: Fusion,
    pub head: Head,
}

/// A sentence converted to model inputs, padded to `ids.len()`.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub ids: Vec<usize>,
    pub mask: Vec<bool>,
    pub len: usize,
    pub x_l: Tensor,
    pub freq: Tensor,
    pub gold_tags: Vec<usize>,
    pub candidates: Vec<PairCandidate>,
    /// Task-related mentions for the mention-level interaction loss.
    pub mentions: Vec<Interval>,
}

pub enum Output {
    Tags(Var),
    Pairs(Vec<Var>),
}

pub struct Forward {
    pub h_c: Var,
    pub h_l: Var,
    pub h_f: Var,
    pub output: Output,
}

#[derive(Serialize, Deserialize)]
struct Metadata {
    format: String,
    spec: ModelSpec,
}

const FORMAT: &str = "shine-model";

impl ShineModel {
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.encoder.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let cfg = &spec.encoder;
        let contextual = ContextualEncoder::register(&mut store, cfg, spec.vocab.len(), &mut rng)?;
        let feature = FeatureEncoder::register(&mut store, cfg, spec.layout.width(&spec.schemas), &mut rng)?;
        let fusion = Fusion::register(&mut store, cfg, &mut rng)?;
        let classes = spec.task.classes(&spec.schemas);
        let head = match spec.task {
            Task::Ner => Head::Ner(NerHead::register(&mut store, cfg.d_model, classes, &mut rng)?),
            _ => Head::Pair(PairHead::register(&mut store, cfg.d_model, classes, &mut rng)?),
        };
        Ok(ShineModel {
            spec,
            store,
            contextual,
            feature,
            fusion,
            head,
        })
    }

    pub fn classes(&self) -> &[String] {
        match &self.head {
            Head::Ner(h) => &h.labels,
            Head::Pair(h) => &h.labels,
        }
    }

    pub fn check_schemas(&self, schemas: &Schemas) -> Result<()> {
        if *schemas != self.spec.schemas {
            return Err(ShineError::Schema("corpus schemas differ from the model's".into()));
        }
        Ok(())
    }

    pub fn prepare(&self, sentence: &Sentence, pad_to: usize) -> Result<Prepared> {
        let len = sentence.len();
        if len == 0 || pad_to < len {
            return Err(ShineError::shape("prepare", &[len], &[pad_to]));
        }
        let mut ids = self.spec.vocab.encode(&sentence.tokens);
        ids.resize(pad_to, Vocabulary::PAD);
        let mut mask = vec![true; len];
        mask.resize(pad_to, false);
        let bundle = featurize(sentence, &self.spec.schemas, self.spec.layout)
            .map_err(|e| ShineError::Schema(format!("sentence {}: {e}", sentence.id)))?;
        let real = bundle.concat();
        let mut x_l = Tensor::zeros(pad_to, real.cols());
        for r in 0..len {
            x_l.row_mut(r).copy_from_slice(real.row(r));
        }
        let freq = if self.spec.use_frequency {
            frequency_tensor(&build_frequency_matrix(&sentence.spans, len)?, pad_to)
        } else {
            Tensor::filled(pad_to, pad_to, 1.0)
        };
        let (gold_tags, candidates) = match &self.head {
            Head::Ner(h) => (h.encode_gold(&sentence.entity_tags)?, Vec::new()),
            Head::Pair(h) => (Vec::new(), pair_candidates(sentence, self.spec.task, &h.labels)?),
        };
        let mut mentions: Vec<Interval> = match self.spec.task {
            Task::Ner => sentence.entities().map(|(s, _)| s).collect(),
            Task::Relation => sentence.relations().flat_map(|(a, b, _)| [a, b]).collect(),
            Task::Earl => sentence.event_args().flat_map(|(t, a, _, _)| [t, a]).collect(),
        };
        mentions.sort();
        mentions.dedup();
        Ok(Prepared {
            ids,
            mask,
            len,
            x_l,
            freq,
            gold_tags,
            candidates,
            mentions,
        })
    }

    pub fn forward(&self, g: &mut Graph, ex: &Prepared, dropout: &mut Dropout) -> Result<Forward> {
        let h_c = self.contextual.forward(g, &ex.ids, &ex.mask, dropout)?;
        let h_l = self.feature.forward(g, &ex.x_l, &ex.mask, dropout)?;
        let h_f = self.fusion.forward(g, h_c, h_l, Some(&ex.freq), &ex.mask, dropout)?;
        let output = match &self.head {
            Head::Ner(h) => Output::Tags(ner_forward(g, h_f, h)?),
            Head::Pair(h) => {
                let s = sentence_representation(g, h_f, ex.len)?;
                let probs = ex
                    .candidates
                    .iter()
                    .map(|c| pair_forward_with(g, h_f, s, c.first, c.second, ex.len, h))
                    .collect::<Result<Vec<_>>>()?;
                Output::Pairs(probs)
            }
        };
        Ok(Forward { h_c, h_l, h_f, output })
    }

    /// Label distributions without dropout: an `L × K` tag matrix for tagging
    /// tasks, one `1 × r` row per candidate otherwise.
    pub fn distributions(&self, sentence: &Sentence) -> Result<(Prepared, Vec<Tensor>)> {
        let ex = self.prepare(sentence, sentence.len())?;
        let mut g = Graph::new(&self.store);
        let f = self.forward(&mut g, &ex, &mut Dropout::disabled())?;
        let out = match f.output {
            Output::Tags(p) => vec![g.value(p).clone()],
            Output::Pairs(ps) => ps.iter().map(|&p| g.value(p).clone()).collect(),
        };
        Ok((ex, out))
    }

    pub fn predict(&self, sentence: &Sentence) -> Result<Vec<Mention>> {
        let (ex, dists) = self.distributions(sentence)?;
        let classes = self.classes();
        match self.spec.task {
            Task::Ner => {
                let probs = &dists[0];
                let tags: Vec<&str> = (0..ex.len).map(|r| classes[argmax(probs.row(r))].as_str()).collect();
                Ok(crate::metrics::decode_bio(&tags)?
                    .into_iter()
                    .map(|(s, e, label)| Mention::Entity { span: (s, e), label })
                    .collect())
            }
            task => Ok(ex
                .candidates
                .iter()
                .zip(&dists)
                .filter_map(|(c, p)| candidate_mention(task, c, &classes[argmax(p.data())]))
                .collect()),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = serde_json::to_string(&Metadata {
            format: FORMAT.into(),
            spec: self.spec.clone(),
        })?;
        let mut buf = Vec::new();
        write_params(&mut buf, &self.store, &meta)?;
        Ok(buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (loaded, meta) = read_params(bytes)?;
        let meta: Metadata = serde_json::from_str(&meta)?;
        if meta.format != FORMAT {
            return Err(ShineError::Checkpoint(format!("unexpected checkpoint format {:?}", meta.format)));
        }
        let mut spec = meta.spec;
        spec.vocab.reindex();
        let mut model = ShineModel::new(spec, 0)?;
        model
            .store
            .copy_values_from(&loaded)
            .map_err(|e| ShineError::Checkpoint(e.to_string()))?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::util::write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
