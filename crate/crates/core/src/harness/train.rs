use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::model::{ModelSpec, Output, Prepared, ShineModel};
use crate::corpus::{build_vocab, Corpus, Mention, Vocabulary};
use crate::encoder::Dropout;
use crate::error::{Result, ShineError};
use crate::interaction::{interaction_loss_graph, LevelValues};
use crate::metrics::{argument_f1, entity_f1, relation_f1, MetricsReport, Prf, Scored};
use crate::numerics::{AdamState, Graph, ParamId, ParamStore, Tensor};
use crate::tasks::{distill_loss_graph, ner_loss_graph, pair_loss_graph, total_loss_graph, Task};

/// Mean per-sentence losses over one epoch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochLosses {
    pub task: f64,
    pub global: f64,
    pub local: f64,
    pub mention: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub kind: String,
    pub task: Task,
    pub variant: String,
    pub seed: u64,
    pub config_hash: String,
    /// Losses of the untrained model over the training data, without dropout.
    pub initial: EpochLosses,
    pub losses: Vec<EpochLosses>,
    /// Selection-split F1 per epoch, where evaluated.
    pub dev_f1: Vec<Option<f64>>,
    pub best_epoch: usize,
    pub metrics: BTreeMap<String, MetricsReport>,
    pub wall_clock_secs: f64,
}

impl RunReport {
    pub fn epochs(&self) -> usize {
        self.losses.len()
    }
}

/// Output of [`evaluate`].
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: MetricsReport,
    pub predictions: Vec<Vec<Mention>>,
}

fn scored(corpus: &Corpus, mentions: impl Fn(usize) -> Vec<Mention>) -> Vec<Scored> {
    (0..corpus.len()).flat_map(|i| mentions(i).into_iter().map(move |m| (i, m))).collect()
}

/// Task-appropriate exact-match scores of `predictions` against `corpus`.
pub fn score(task: Task, corpus: &Corpus, predictions: &[Vec<Mention>]) -> Prf {
    let gold = scored(corpus, |i| corpus.sentences[i].mentions.clone());
    let pred = scored(corpus, |i| predictions.get(i).cloned().unwrap_or_default());
    match task {
        Task::Ner => entity_f1(&gold, &pred),
        Task::Relation => relation_f1(&gold, &pred),
        Task::Earl => argument_f1(&gold, &pred),
    }
}

pub fn evaluate(model: &ShineModel, corpus: &Corpus, seed: u64) -> Result<Evaluation> {
    model.check_schemas(&corpus.schemas)?;
    let predictions = corpus
        .sentences
        .iter()
        .map(|s| model.predict(s))
        .collect::<Result<Vec<_>>>()?;
    let scores = score(model.spec.task, corpus, &predictions);
    Ok(Evaluation {
        report: MetricsReport {
            task: model.spec.task.name().into(),
            language: corpus.language.clone(),
            seed,
            sentences: corpus.len(),
            scores,
        },
        predictions,
    })
}

/// Stable length grouping: shuffle, sort by length, cut, shuffle the batches.
fn length_batches(lengths: &[usize], batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.shuffle(rng);
    order.sort_by_key(|&i| lengths[i]);
    let mut batches: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    batches.shuffle(rng);
    batches
}

fn stream(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

fn clip(store: &mut ParamStore, max_norm: f64) {
    if max_norm <= 0.0 {
        return;
    }
    let sq: f64 = store
        .iter()
        .map(|(_, p)| p.grad.data().iter().map(|g| g * g).sum::<f64>())
        .sum();
    let norm = sq.sqrt();
    if norm > max_norm {
        store.scale_grads(max_norm / norm);
    }
}

fn tag_errors(epoch: usize, step: usize, e: ShineError) -> ShineError {
    if e.is_numeric() {
        ShineError::Numeric(format!("epoch {epoch}, step {step}: {e}"))
    } else {
        e
    }
}

struct SentenceLoss {
    losses: EpochLosses,
    grads: Option<Vec<(ParamId, Tensor)>>,
}

fn supervised_step(
    model: &ShineModel,
    ex: &Prepared,
    cfg: &TrainConfig,
    alpha: f64,
    dropout_rng: Option<&mut ChaCha8Rng>,
    want_grads: bool,
) -> Result<SentenceLoss> {
    let mut g = Graph::new(&model.store);
    let mut dropout = Dropout {
        rate: cfg.encoder.dropout,
        rng: dropout_rng,
    };
    let f = model.forward(&mut g, ex, &mut dropout)?;
    let task = match &f.output {
        Output::Tags(p) => Some(ner_loss_graph(&mut g, *p, &ex.gold_tags)?),
        Output::Pairs(ps) if ps.is_empty() => None,
        Output::Pairs(ps) => {
            let gold: Vec<usize> = ex.candidates.iter().map(|c| c.label).collect();
            Some(pair_loss_graph(&mut g, ps, &gold)?)
        }
    };
    let (levels, inter) = if alpha > 0.0 {
        let lv = interaction_loss_graph(&mut g, f.h_c, f.h_l, &ex.mentions, &ex.mask, &cfg.interaction)?;
        (lv.values(&g), Some(lv.total))
    } else {
        (LevelValues::default(), None)
    };
    let objective = match (task, inter) {
        (Some(t), Some(i)) => Some(total_loss_graph(&mut g, t, i, alpha)?),
        (Some(t), None) => Some(t),
        (None, Some(i)) => Some(g.scale(i, alpha)?),
        (None, None) => None,
    };
    let task_value = task.map_or(0.0, |t| g.value(t).item());
    let losses = EpochLosses {
        task: task_value,
        global: levels.global,
        local: levels.local,
        mention: levels.task,
        total: objective.map_or(0.0, |o| g.value(o).item()),
    };
    let grads = match objective {
        Some(o) if want_grads => Some(g.backward(o)?.into_params()),
        _ => None,
    };
    Ok(SentenceLoss { losses, grads })
}

fn mean_losses(sum: EpochLosses, n: usize) -> EpochLosses {
    let n = n.max(1) as f64;
    EpochLosses {
        task: sum.task / n,
        global: sum.global / n,
        local: sum.local / n,
        mention: sum.mention / n,
        total: sum.total / n,
    }
}

fn add_losses(a: &mut EpochLosses, b: &EpochLosses) {
    a.task += b.task;
    a.global += b.global;
    a.local += b.local;
    a.mention += b.mention;
    a.total += b.total;
}

fn check_corpus(corpus: &Corpus, schemas: &crate::corpus::Schemas, what: &str) -> Result<()> {
    corpus.validate()?;
    if corpus.is_empty() {
        return Err(ShineError::Empty(format!("{what} corpus is empty")));
    }
    if corpus.schemas != *schemas {
        return Err(ShineError::Schema(format!("{what} corpus schemas differ from the training corpus")));
    }
    Ok(())
}

/// Optimizer loop shared by supervised training and distillation.
struct Loop<'a> {
    cfg: &'a TrainConfig,
    adam: AdamState,
    batch_rng: ChaCha8Rng,
    dropout_rng: ChaCha8Rng,
    word_rng: ChaCha8Rng,
    step: usize,
}

impl<'a> Loop<'a> {
    fn new(cfg: &'a TrainConfig) -> Self {
        Loop {
            cfg,
            adam: AdamState::new(cfg.optimizer),
            batch_rng: stream(cfg.seed, 1),
            dropout_rng: stream(cfg.seed, 2),
            word_rng: stream(cfg.seed, 3),
            step: 0,
        }
    }

    fn word_dropout(&mut self, ex: &mut Prepared) {
        let p = self.cfg.word_dropout;
        if p <= 0.0 {
            return;
        }
        for id in &mut ex.ids[..ex.len] {
            if self.word_rng.random::<f64>() < p {
                *id = Vocabulary::UNK;
            }
        }
    }

    fn lr_scale(&self) -> f64 {
        match self.cfg.warmup_steps {
            0 => 1.0,
            w => ((self.step + 1) as f64 / w as f64).min(1.0),
        }
    }

    /// One pass over `lengths.len()` items; `item` returns the loss and
    /// gradients of one example padded to the batch maximum.
    fn epoch<F>(&mut self, model: &mut ShineModel, lengths: &[usize], epoch: usize, mut item: F) -> Result<EpochLosses>
    where
        F: FnMut(&ShineModel, usize, usize, &mut Self) -> Result<SentenceLoss>,
    {
        let mut sum = EpochLosses::default();
        for batch in length_batches(lengths, self.cfg.batch_size, &mut self.batch_rng) {
            let pad = batch.iter().map(|&i| lengths[i]).max().unwrap_or(0);
            model.store.zero_grad();
            for &i in &batch {
                let out = item(model, i, pad, self).map_err(|e| tag_errors(epoch, self.step, e))?;
                add_losses(&mut sum, &out.losses);
                if let Some(gr) = out.grads {
                    model.store.accumulate(&gr);
                }
            }
            model.store.scale_grads(1.0 / batch.len() as f64);
            clip(&mut model.store, self.cfg.max_grad_norm);
            let scale = self.lr_scale();
            self.adam
                .step(&mut model.store, scale)
                .map_err(|e| tag_errors(epoch, self.step, e))?;
            self.step += 1;
        }
        Ok(mean_losses(sum, lengths.len()))
    }
}

/// Trains a model on `train`, keeping the parameters with the best F1 on the
/// selection split: `dev` by default, `target_dev` when
/// `select_on_target_dev` is set.
pub fn train(
    config: &TrainConfig,
    train: &Corpus,
    dev: &Corpus,
    target_dev: Option<&Corpus>,
) -> Result<(ShineModel, RunReport)> {
    config.validate()?;
    let started = Instant::now();
    let ablation = config.ablation.resolved();
    check_corpus(train, &train.schemas, "training")?;
    check_corpus(dev, &train.schemas, "dev")?;
    let selection = if config.select_on_target_dev {
        let t = target_dev
            .ok_or_else(|| ShineError::Config("select_on_target_dev needs a target dev corpus".into()))?;
        check_corpus(t, &train.schemas, "target dev")?;
        t
    } else {
        dev
    };
    let vocab = build_vocab(train, config.min_count)?;
    let spec = ModelSpec::new(
        config.task,
        config.encoder.clone(),
        ablation.no_constituency,
        ablation.no_frequency,
        train.schemas.clone(),
        vocab,
    );
    let mut model = ShineModel::new(spec, config.seed)?;
    let alpha = config.effective_alpha();
    let prepared = train
        .sentences
        .iter()
        .map(|s| model.prepare(s, s.len()))
        .collect::<Result<Vec<_>>>()?;
    let lengths: Vec<usize> = prepared.iter().map(|p| p.len).collect();

    let mut initial = EpochLosses::default();
    for ex in &prepared {
        let out = supervised_step(&model, ex, config, alpha, None, false)?;
        add_losses(&mut initial, &out.losses);
    }
    let initial = mean_losses(initial, prepared.len());

    let mut lp = Loop::new(config);
    let mut losses = Vec::new();
    let mut dev_f1 = Vec::new();
    let mut best: Option<(f64, usize, ParamStore)> = None;
    let mut since_best = 0;
    for epoch in 1..=config.epochs {
        let record = lp.epoch(&mut model, &lengths, epoch, |m, i, pad, lp| {
            let mut ex = m.prepare(&train.sentences[i], pad)?;
            lp.word_dropout(&mut ex);
            supervised_step(m, &ex, config, alpha, Some(&mut lp.dropout_rng), true)
        })?;
        losses.push(record);
        if epoch % config.eval_every == 0 || epoch == config.epochs {
            let f1 = evaluate(&model, selection, config.seed)?.report.scores.f1;
            dev_f1.push(Some(f1));
            if best.as_ref().is_none_or(|(b, _, _)| f1 > *b) {
                best = Some((f1, epoch, model.store.clone()));
                since_best = 0;
            } else {
                since_best += config.eval_every;
            }
            if config.patience > 0 && since_best >= config.patience {
                break;
            }
        } else {
            dev_f1.push(None);
        }
    }
    let (_, best_epoch, store) = best.expect("at least one evaluation");
    model.store = store;
    let mut metrics = BTreeMap::new();
    metrics.insert("dev".to_string(), evaluate(&model, dev, config.seed)?.report);
    if let Some(path) = &config.checkpoint {
        model.save(path)?;
    }
    let report = RunReport {
        kind: "train".into(),
        task: config.task,
        variant: ablation.name().into(),
        seed: config.seed,
        config_hash: config.hash(),
        initial,
        losses,
        dev_f1,
        best_epoch,
        metrics,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    Ok((model, report))
}

/// Trains a student of the teacher's architecture to match the teacher's tag
/// distributions on unlabeled text.
pub fn distill(teacher: &ShineModel, unlabeled: &Corpus, config: &TrainConfig) -> Result<(ShineModel, RunReport)> {
    config.validate()?;
    let started = Instant::now();
    if teacher.spec.task != Task::Ner || config.task != Task::Ner {
        return Err(ShineError::Config("distillation is defined for the tagging task".into()));
    }
    let ablation = config.ablation.resolved();
    let wanted = ModelSpec::new(
        config.task,
        config.encoder.clone(),
        ablation.no_constituency,
        ablation.no_frequency,
        teacher.spec.schemas.clone(),
        teacher.spec.vocab.clone(),
    );
    if wanted != teacher.spec {
        return Err(ShineError::Config(
            "student architecture differs from the teacher's (encoder or ablation settings)".into(),
        ));
    }
    check_corpus(unlabeled, &teacher.spec.schemas, "unlabeled")?;
    let mut student = if config.student_from_teacher {
        teacher.clone()
    } else {
        ShineModel::new(teacher.spec.clone(), config.seed)?
    };
    let soft = unlabeled
        .sentences
        .iter()
        .map(|s| teacher.distributions(s).map(|(_, d)| d.into_iter().next().expect("tag matrix")))
        .collect::<Result<Vec<_>>>()?;
    let lengths: Vec<usize> = unlabeled.sentences.iter().map(|s| s.len()).collect();

    let step = |m: &ShineModel, i: usize, pad: usize, rng: Option<&mut ChaCha8Rng>, grads: bool, words: Option<&mut Loop>| {
        let mut ex = m.prepare(&unlabeled.sentences[i], pad)?;
        if let Some(lp) = words {
            lp.word_dropout(&mut ex);
        }
        let mut g = Graph::new(&m.store);
        let mut dropout = Dropout {
            rate: config.encoder.dropout,
            rng,
        };
        let f = m.forward(&mut g, &ex, &mut dropout)?;
        let Output::Tags(probs) = f.output else {
            unreachable!("tagging model")
        };
        let k = soft[i].cols();
        let mut target = Tensor::zeros(pad, k);
        for r in 0..ex.len {
            target.row_mut(r).copy_from_slice(soft[i].row(r));
        }
        let t = g.input(target)?;
        let loss = distill_loss_graph(&mut g, t, probs, ex.len)?;
        let value = g.value(loss).item();
        Ok(SentenceLoss {
            losses: EpochLosses {
                task: value,
                total: value,
                ..Default::default()
            },
            grads: if grads { Some(g.backward(loss)?.into_params()) } else { None },
        })
    };

    let mut initial = EpochLosses::default();
    for i in 0..lengths.len() {
        add_losses(&mut initial, &step(&student, i, lengths[i], None, false, None)?.losses);
    }
    let initial = mean_losses(initial, lengths.len());

    let mut lp = Loop::new(config);
    let mut losses = Vec::new();
    for epoch in 1..=config.epochs {
        let record = lp.epoch(&mut student, &lengths, epoch, |m, i, pad, lp| {
            let mut rng = lp.dropout_rng.clone();
            let out = step(m, i, pad, Some(&mut rng), true, Some(lp));
            lp.dropout_rng = rng;
            out
        })?;
        losses.push(record);
    }
    if let Some(path) = &config.checkpoint {
        student.save(path)?;
    }
    let report = RunReport {
        kind: "distill".into(),
        task: config.task,
        variant: ablation.name().into(),
        seed: config.seed,
        config_hash: config.hash(),
        initial,
        dev_f1: vec![None; losses.len()],
        best_epoch: losses.len(),
        losses,
        metrics: BTreeMap::new(),
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    Ok((student, report))
}
