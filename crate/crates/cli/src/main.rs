use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use shine::corpus::{generate_synthetic_pair, load_corpus, save_corpus, Corpus, GenConfig};
use shine::harness::{distill, evaluate, run_ablation, train, Ablation, ShineModel, TrainConfig, VARIANTS};
use shine::syntax::{build_frequency_matrix, build_span_counts};
use shine::ShineError;

#[derive(Parser)]
#[command(name = "shine", version, about = "Syntax-augmented cross-lingual extraction pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dump span-count and frequency matrices for every sentence of a corpus.
    Featurize {
        corpus: PathBuf,
        /// Output file (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic source/target corpus pair.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Generator config (TOML); the built-in benchmark grammar otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        sentences: Option<usize>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Train a model and write the checkpoint and run report.
    Train {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        dev: PathBuf,
        /// Target-language dev set, scored each evaluation and used for selection with `select_on_target_dev`.
        #[arg(long)]
        target_dev: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Score a checkpoint on an annotated corpus.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Distil a tagging teacher into a student on unlabeled text.
    Distill {
        #[arg(long)]
        teacher: PathBuf,
        #[arg(long)]
        unlabeled: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Train every variant for every seed and tabulate the scores.
    Ablate {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        dev: PathBuf,
        /// Evaluation set as NAME=PATH; an eval named `target` doubles as target dev.
        #[arg(long = "eval", value_parser = parse_eval, required = true)]
        evals: Vec<(String, PathBuf)>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        seeds: Vec<u64>,
        #[arg(long, value_delimiter = ',')]
        variants: Vec<String>,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    span_length: Option<usize>,
    #[arg(long, value_name = "VARIANT")]
    ablate: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn parse_eval(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.into(), path.into())),
        _ => Err(format!("expected NAME=PATH, got `{s}`")),
    }
}

impl RunArgs {
    fn resolve(&self) -> shine::Result<TrainConfig> {
        let mut cfg = match &self.config {
            Some(p) => TrainConfig::load(p)?,
            None => TrainConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(a) = self.alpha {
            cfg.interaction.alpha = a;
        }
        if let Some(p) = self.span_length {
            cfg.interaction.span_length = p;
        }
        if let Some(e) = self.epochs {
            cfg.epochs = e;
        }
        if let Some(v) = &self.ablate {
            cfg.ablation = Ablation::variant(v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> shine::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> shine::Result<()> {
    write_atomic(path, serde_json::to_string_pretty(value)?.as_bytes())
}

fn load(path: &Path) -> shine::Result<Corpus> {
    load_corpus(path)
}

/// Text dump: per sentence, an `id x_c <columns>` header and the count rows,
/// then an `id F` header and the frequency rows.
fn dump_matrices(corpus: &Corpus) -> shine::Result<String> {
    let mut out = String::new();
    for s in &corpus.sentences {
        let x = build_span_counts(&s.spans, s.len(), &corpus.schemas.phrase)?;
        let f = build_frequency_matrix(&s.spans, s.len())?;
        let join = |r: &[u32]| r.iter().map(u32::to_string).collect::<Vec<_>>().join(" ");
        let _ = writeln!(out, "{} x_c {}", s.id, x.columns().join(" "));
        for row in x.rows() {
            let _ = writeln!(out, "{}", join(row));
        }
        let _ = writeln!(out, "{} F", s.id);
        for i in 0..f.len() {
            let _ = writeln!(out, "{}", join(f.row(i)));
        }
        out.push('\n');
    }
    Ok(out)
}

fn run(cmd: Command) -> shine::Result<()> {
    match cmd {
        Command::Featurize { corpus, out } => {
            let dump = dump_matrices(&load(&corpus)?)?;
            match out {
                Some(p) => write_atomic(&p, dump.as_bytes())?,
                None => print!("{dump}"),
            }
        }
        Command::Gen {
            seed,
            config,
            sentences,
            out,
        } => {
            let mut gen = match config {
                Some(p) => GenConfig::from_toml(&std::fs::read_to_string(p)?)?,
                None => GenConfig::benchmark(200),
            };
            if let Some(n) = sentences {
                gen.sentences = n;
            }
            let (src, tgt) = generate_synthetic_pair(&gen, seed)?;
            std::fs::create_dir_all(&out)?;
            save_corpus(&src, out.join("source.txt"))?;
            save_corpus(&tgt, out.join("target.txt"))?;
            write_atomic(&out.join("gen.toml"), gen.to_toml().as_bytes())?;
        }
        Command::Train {
            train: train_path,
            dev,
            target_dev,
            run,
        } => {
            let cfg = run.resolve()?;
            let (train_set, dev_set) = (load(&train_path)?, load(&dev)?);
            let target = target_dev.as_deref().map(load).transpose()?;
            write_atomic(&run.out.join("config.toml"), cfg.to_toml().as_bytes())?;
            let (model, report) = train(&cfg, &train_set, &dev_set, target.as_ref())?;
            model.save(&run.out.join("model.bin"))?;
            write_json(&run.out.join("report.json"), &report)?;
            eprintln!("best epoch {} dev F1 {:.4}", report.best_epoch, report.metrics["dev"].scores.f1);
        }
        Command::Evaluate { model, data, seed, out } => {
            let model = ShineModel::load(&model)?;
            let ev = evaluate(&model, &load(&data)?, seed)?;
            ev.report.write(&out, "metrics")?;
            print!("{}", ev.report.to_key_values());
        }
        Command::Distill { teacher, unlabeled, run } => {
            let cfg = run.resolve()?;
            let teacher = ShineModel::load(&teacher)?;
            let text = load(&unlabeled)?;
            write_atomic(&run.out.join("config.toml"), cfg.to_toml().as_bytes())?;
            let (student, report) = distill(&teacher, &text, &cfg)?;
            student.save(&run.out.join("model.bin"))?;
            write_json(&run.out.join("report.json"), &report)?;
        }
        Command::Ablate {
            train: train_path,
            dev,
            evals,
            seeds,
            variants,
            run,
        } => {
            let cfg = run.resolve()?;
            let (train_set, dev_set) = (load(&train_path)?, load(&dev)?);
            let sets = evals
                .iter()
                .map(|(n, p)| Ok((n.as_str(), load(p)?)))
                .collect::<shine::Result<Vec<_>>>()?;
            let refs: Vec<(&str, &Corpus)> = sets.iter().map(|(n, c)| (*n, c)).collect();
            let names: Vec<&str> = if variants.is_empty() {
                VARIANTS.to_vec()
            } else {
                variants.iter().map(String::as_str).collect()
            };
            write_atomic(&run.out.join("config.toml"), cfg.to_toml().as_bytes())?;
            let table = run_ablation(&cfg, &train_set, &dev_set, &refs, &seeds, &names)?;
            write_json(&run.out.join("ablation.json"), &table)?;
            write_atomic(&run.out.join("ablation.txt"), table.to_text().as_bytes())?;
            print!("{}", table.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &ShineError) -> u8 {
    if e.is_numeric() {
        3
    } else {
        2
    }
}
