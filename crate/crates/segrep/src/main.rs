use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use segrep::core::eval::f_score;
use segrep::core::segment::NONE_LABEL;
use segrep::core::{LabelSet, TaskKind};
use segrep::corpus::{detect_file_task, parse_conll, parse_wordseg, ParsedCorpus};
use segrep::emit::{emit_segmented_corpus, Units};
use segrep::pipeline::{predict_file, train_to_dir};
use segrep::{checkpoint, config, Error, Result};

/// Neural semi-Markov CRF segmentation.
#[derive(Parser)]
#[command(name = "segrep", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model; writes model.ckpt, config.toml and train.log to --out.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        dev: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Segment a file with a trained model.
    Predict {
        /// Checkpoint file or training output directory.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Score predictions against gold segmentations.
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
    },
    /// Write a raw corpus as space-separated predicted segment keys.
    EmitSegmented {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        raw: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Joins units inside a segment; defaults to the model's separator.
        #[arg(long)]
        separator: Option<String>,
    },
}

fn warn(messages: impl IntoIterator<Item = String>) {
    for m in messages {
        eprintln!("warning: {m}");
    }
}

fn checkpoint_path(model: &Path) -> PathBuf {
    if model.is_dir() {
        model.join("model.ckpt")
    } else {
        model.to_path_buf()
    }
}

fn read_gold(path: &Path, task: TaskKind, labels: Option<&LabelSet>) -> Result<ParsedCorpus> {
    match task {
        TaskKind::SpanLabeled => parse_conll(path, labels),
        TaskKind::WordSeg => parse_wordseg(path, false),
    }
}

fn eval(gold: &Path, pred: &Path) -> Result<()> {
    let task = detect_file_task(gold)?;
    let (g, p) = (read_gold(gold, task, None)?, read_gold(pred, task, None)?);
    let (g, p) = if task == TaskKind::SpanLabeled {
        let names: Vec<&str> = g.corpus.labels.names().iter().chain(p.corpus.labels.names()).map(String::as_str).collect();
        let labels = LabelSet::span_labeled(names.into_iter().filter(|n| *n != NONE_LABEL));
        (read_gold(gold, task, Some(&labels))?, read_gold(pred, task, Some(&labels))?)
    } else {
        (g, p)
    };
    let preds: Vec<_> = p.corpus.sequences.iter().map(|e| e.gold.clone()).collect();
    let prf = f_score(&g.corpus, &preds)?;
    println!("precision\t{:.4}", prf.precision);
    println!("recall\t{:.4}", prf.recall);
    println!("f1\t{:.4}", prf.f1);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, train, dev, out } => {
            let cfg = config::load_config(&config)?;
            let run = train_to_dir(&cfg, &train, &dev, &out, |r| {
                eprintln!(
                    "epoch {}\tnll {:.6}\tdev f1 {:.4}\tlr {:.6}",
                    r.epoch, r.mean_nll, r.dev.f1, r.learning_rate
                );
            })?;
            warn(run.notes.messages());
            println!(
                "best epoch {} dev f1 {:.4}; checkpoint {}",
                run.outcome.best_epoch,
                run.outcome.best_dev.f1,
                run.files.checkpoint.display()
            );
        }
        Command::Predict { model, input, output } => {
            let model = checkpoint::load(&checkpoint_path(&model))?;
            let n = predict_file(&model, &input, &output)?;
            eprintln!("segmented {n} sequence(s)");
        }
        Command::Eval { gold, pred } => eval(&gold, &pred)?,
        Command::EmitSegmented {
            model,
            raw,
            out,
            separator,
        } => {
            let model = checkpoint::load(&checkpoint_path(&model))?;
            let sep = separator.unwrap_or_else(|| model.separator().to_string());
            let units = Units::for_task(model.config().task, model.config().normalize_fullwidth);
            let report = emit_segmented_corpus(&model, units, &sep, &raw, &out)?;
            if report.ambiguous_keys > 0 {
                warn([format!("{} segment key(s) with the separator inside a unit", report.ambiguous_keys)]);
            }
            eprintln!("wrote {} line(s), {} segment(s)", report.lines, report.segments);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}

fn report(e: &Error) -> ExitCode {
    let class = e.class();
    let msg = e.to_string().replace('\n', " ");
    eprintln!("error[{}]: {msg}", class.name());
    ExitCode::from(class.exit_code() as u8)
}
