use shine::corpus::{generate_synthetic_pair, Corpus, GenConfig};
use shine::encoder::{Dropout, EncoderConfig};
use shine::harness::{
    distill, evaluate, run_ablation, score, train, Ablation, AblationRun, AblationTable, ModelSpec, Output, ShineModel,
    TrainConfig,
};
use shine::numerics::{AdamConfig, Graph, Tensor};
use shine::tasks::Task;
use shine::ShineError;

fn corpora(n: usize) -> (Corpus, Corpus) {
    generate_synthetic_pair(&GenConfig::benchmark(n), 5).unwrap()
}

fn small(task: Task, epochs: usize) -> TrainConfig {
    TrainConfig {
        task,
        epochs,
        batch_size: 4,
        encoder: EncoderConfig {
            d_model: 8,
            contextual_layers: 1,
            feature_layers: 1,
            fusion_layers: 1,
            heads: 2,
            ff_width: 16,
            dropout: 0.1,
        },
        optimizer: AdamConfig {
            learning_rate: 2e-3,
            ..Default::default()
        },
        ..Default::default()
    }
}

#[test]
fn same_seed_same_series() {
    let (src, _) = corpora(16);
    let cfg = TrainConfig { word_dropout: 0.2, ..small(Task::Ner, 3) };
    let (m1, r1) = train(&cfg, &src, &src, None).unwrap();
    let (m2, r2) = train(&cfg, &src, &src, None).unwrap();
    assert_eq!(r1.losses, r2.losses);
    assert_eq!(r1.dev_f1, r2.dev_f1);
    assert_eq!(m1.store, m2.store);
    assert_eq!(r1.epochs(), 3);
    let (_, r3) = train(&TrainConfig { seed: 1, ..cfg }, &src, &src, None).unwrap();
    assert_ne!(r1.losses, r3.losses);
}

#[test]
fn no_all_reports_zero_interaction() {
    let (src, _) = corpora(12);
    let cfg = TrainConfig {
        ablation: Ablation::variant("no_all").unwrap(),
        ..small(Task::Ner, 2)
    };
    let (model, report) = train(&cfg, &src, &src, None).unwrap();
    assert_eq!(report.variant, "no_all");
    for l in &report.losses {
        assert_eq!((l.global, l.local, l.mention), (0.0, 0.0, 0.0));
    }
    assert!(!model.spec.use_frequency && !model.spec.layout.constituency);
}

#[test]
fn checkpoints_round_trip_bit_exactly() {
    let (src, tgt) = corpora(12);
    let (model, _) = train(&small(Task::Ner, 1), &src, &src, None).unwrap();
    let back = ShineModel::from_bytes(&model.to_bytes().unwrap()).unwrap();
    assert_eq!(back.spec, model.spec);
    for ((_, a), (_, b)) in model.store.iter().zip(back.store.iter()) {
        assert_eq!(a.name, b.name);
        let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.value), bits(&b.value));
    }
    let path = std::env::temp_dir().join(format!("shine-ckpt-{}.bin", std::process::id()));
    model.save(&path).unwrap();
    let loaded = ShineModel::load(&path).unwrap();
    std::fs::remove_file(&path).unwrap();
    for s in &tgt.sentences {
        assert_eq!(loaded.predict(s).unwrap(), model.predict(s).unwrap());
    }
    assert!(ShineModel::from_bytes(b"SHINECKX").is_err());
}

#[test]
fn evaluation_is_pure_and_matches_rescoring() {
    let (src, tgt) = corpora(16);
    let (model, report) = train(&small(Task::Ner, 2), &src, &src, None).unwrap();
    let before = model.store.clone();
    let a = evaluate(&model, &tgt, 0).unwrap();
    let b = evaluate(&model, &tgt, 0).unwrap();
    assert_eq!(model.store, before);
    assert_eq!(a.report, b.report);
    assert_eq!(score(Task::Ner, &tgt, &a.predictions), a.report.scores);
    assert!((report.metrics["dev"].scores.f1 - evaluate(&model, &src, 0).unwrap().report.scores.f1).abs() < 1e-12);

    let empty = score(Task::Ner, &tgt, &[]);
    assert_eq!((empty.precision, empty.recall, empty.f1), (0.0, 0.0, 0.0));
    assert!(empty.gold > 0);
}

#[test]
fn disabled_frequency_is_the_full_model_with_unit_frequency() {
    let (src, _) = corpora(8);
    let vocab = shine::corpus::build_vocab(&src, 1).unwrap();
    let enc = small(Task::Ner, 1).encoder;
    let full = ShineModel::new(
        ModelSpec::new(Task::Ner, enc.clone(), false, false, src.schemas.clone(), vocab.clone()),
        3,
    )
    .unwrap();
    let plain = ShineModel::new(ModelSpec::new(Task::Ner, enc, false, true, src.schemas.clone(), vocab), 3).unwrap();
    assert_eq!(full.store, plain.store);
    for s in &src.sentences {
        let mut ex = full.prepare(s, s.len() + 2).unwrap();
        let theirs = plain.prepare(s, s.len() + 2).unwrap();
        ex.freq = Tensor::filled(s.len() + 2, s.len() + 2, 1.0);
        let mut g1 = Graph::new(&full.store);
        let mut g2 = Graph::new(&plain.store);
        let a = full.forward(&mut g1, &ex, &mut Dropout::disabled()).unwrap();
        let b = plain.forward(&mut g2, &theirs, &mut Dropout::disabled()).unwrap();
        let (Output::Tags(pa), Output::Tags(pb)) = (a.output, b.output) else {
            panic!("tagging heads")
        };
        let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(g1.value(pa)), bits(g2.value(pb)));
    }
}

#[test]
fn pair_tasks_train_and_score() {
    let (src, tgt) = corpora(16);
    for task in [Task::Relation, Task::Earl] {
        let (model, report) = train(&small(task, 2), &src, &src, None).unwrap();
        assert_eq!(model.classes()[0], "None");
        assert!(report.losses.iter().all(|l| l.total.is_finite()));
        assert!(report.initial.mention > 0.0);
        let ev = evaluate(&model, &tgt, 0).unwrap();
        assert_eq!(ev.report.task, task.name());
        assert!(ev.report.scores.gold > 0);
    }
}

#[test]
fn distillation_contract() {
    let (src, tgt) = corpora(12);
    let (teacher, _) = train(&small(Task::Ner, 2), &src, &src, None).unwrap();
    let cfg = TrainConfig {
        student_from_teacher: true,
        ..small(Task::Ner, 2)
    };
    let (_, r1) = distill(&teacher, &tgt, &cfg).unwrap();
    assert_eq!(r1.initial.task, 0.0);
    let (s1, r1) = distill(&teacher, &tgt, &small(Task::Ner, 2)).unwrap();
    let (s2, r2) = distill(&teacher, &tgt, &small(Task::Ner, 2)).unwrap();
    assert_eq!(r1.losses, r2.losses);
    assert_eq!(s1.store, s2.store);
    assert!(r1.initial.task > 0.0);

    let wider = TrainConfig {
        encoder: EncoderConfig { d_model: 12, ..cfg.encoder.clone() },
        ..cfg.clone()
    };
    assert!(matches!(distill(&teacher, &tgt, &wider), Err(ShineError::Config(_))));
    let ablated = TrainConfig {
        ablation: Ablation::variant("no_constituency").unwrap(),
        ..cfg
    };
    assert!(distill(&teacher, &tgt, &ablated).is_err());
}

#[test]
fn selection_and_schema_errors() {
    let (src, _) = corpora(8);
    let cfg = TrainConfig {
        select_on_target_dev: true,
        ..small(Task::Ner, 1)
    };
    assert!(matches!(train(&cfg, &src, &src, None), Err(ShineError::Config(_))));
    let mut other = src.clone();
    other.schemas.pos.push("EXTRA".into());
    assert!(matches!(train(&small(Task::Ner, 1), &src, &other, None), Err(ShineError::Schema(_))));
    let (model, _) = train(&small(Task::Ner, 1), &src, &src, None).unwrap();
    assert!(evaluate(&model, &other, 0).is_err());
}

#[test]
fn divergent_training_aborts_with_a_numeric_error() {
    let (src, _) = corpora(8);
    let cfg = TrainConfig {
        max_grad_norm: 0.0,
        optimizer: AdamConfig {
            learning_rate: 1e300,
            ..Default::default()
        },
        ..small(Task::Ner, 3)
    };
    match train(&cfg, &src, &src, None) {
        Err(ShineError::Numeric(msg)) => assert!(msg.contains("epoch"), "{msg}"),
        other => panic!("expected a numeric failure, got {:?}", other.map(|r| r.1.losses)),
    }
}

#[test]
fn ablation_cells_aggregate_runs() {
    let (src, tgt) = corpora(12);
    let seeds = [1, 2];
    let base = small(Task::Ner, 2);
    let table = run_ablation(&base, &src, &src, &[("source", &src), ("target", &tgt)], &seeds, &["full", "no_all"]).unwrap();
    assert_eq!(table.runs.len(), 4);
    for cell in &table.cells {
        let vals: Vec<f64> = table
            .runs
            .iter()
            .filter(|r| r.variant == cell.variant)
            .map(|r| r.f1[&cell.eval])
            .collect();
        assert_eq!(vals.len(), 2);
        let mean = (vals[0] + vals[1]) / 2.0;
        assert!((cell.mean - mean).abs() < 1e-15);
        assert!((cell.stdev - (vals[0] - vals[1]).abs() / 2f64.sqrt()).abs() < 1e-12);
    }
    let manual = TrainConfig {
        seed: 2,
        ablation: Ablation {
            no_all: true,
            ..Default::default()
        }
        .resolved(),
        ..base
    };
    let (m, _) = train(&manual, &src, &src, None).unwrap();
    let run = table.runs.iter().find(|r| r.variant == "no_all" && r.seed == 2).unwrap();
    assert_eq!(run.f1["target"], evaluate(&m, &tgt, 2).unwrap().report.scores.f1);
    let text = table.to_text();
    assert!(text.lines().count() == 3 && text.contains("no_all"));

    let rebuilt = AblationTable::from_runs(table.evals.clone(), table.runs.clone());
    assert_eq!(rebuilt, table);
    let json = serde_json::to_string(&table).unwrap();
    let back: AblationTable = serde_json::from_str(&json).unwrap();
    assert_eq!(back.runs.iter().map(|r: &AblationRun| r.seed).collect::<Vec<_>>(), vec![1, 2, 1, 2]);
    assert!(run_ablation(&small(Task::Ner, 1), &src, &src, &[], &[], &["full"]).is_err());
}
