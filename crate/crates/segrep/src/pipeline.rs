//! Model construction from configuration and data, training runs with
//! their log, and batch prediction.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use segrep_core::embedding::{key_is_ambiguous, segment_key, Vocab};
use segrep_core::model::{Model, ModelConfig, Resources, SegmentSource};
use segrep_core::trainer::{self, EpochReport, TrainOutcome};
use segrep_core::{LabelSet, LabeledCorpus, Segmentation, TaskKind};

use crate::checkpoint;
use crate::config::to_toml;
use crate::corpus::{self, ParsedCorpus};
use crate::embeddings::load_embeddings;
use crate::error::{Error, ErrorClass, Result};

/// Warnings collected while preparing data; the caller decides how to
/// report them.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Notes {
    pub tag_repairs: usize,
    pub skipped_lines: usize,
    pub duplicate_embeddings: usize,
    pub ambiguous_keys: usize,
}

impl Notes {
    pub fn messages(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut add = |n: usize, what: &str| {
            if n > 0 {
                out.push(format!("{n} {what}"));
            }
        };
        add(self.tag_repairs, "ill-formed tag sequence(s) repaired");
        add(self.skipped_lines, "empty line(s) skipped");
        add(self.duplicate_embeddings, "duplicate embedding entries (last kept)");
        add(self.ambiguous_keys, "segment key(s) with the separator inside a unit");
        out
    }

    fn absorb(&mut self, parsed: &ParsedCorpus) {
        self.tag_repairs += parsed.repairs;
        self.skipped_lines += parsed.skipped_lines;
    }
}

/// Reads a gold corpus in the format of `config.task`.
pub fn read_corpus(path: &Path, config: &ModelConfig, labels: Option<&LabelSet>) -> Result<ParsedCorpus> {
    match config.task {
        TaskKind::SpanLabeled => corpus::parse_conll(path, labels),
        TaskKind::WordSeg => corpus::parse_wordseg(path, config.normalize_fullwidth),
    }
}

/// Initialises a model for `train`. Resolves the maximum segment length
/// to the longest gold segment when it is not configured.
pub fn build_model(config: &ModelConfig, train: &LabeledCorpus, notes: &mut Notes) -> Result<Model> {
    if train.task != config.task {
        return Err(Error::Config("training data does not match the configured task".into()));
    }
    let mut config = config.clone();
    if config.max_segment_len.is_none() {
        let longest = train.max_segment_len();
        if longest == 0 {
            return Err(Error::Data("training corpus has no segments".into()));
        }
        config.max_segment_len = Some(longest);
    }
    let unit_pretrained = match &config.unit_embeddings {
        Some(p) => {
            let loaded = load_embeddings(Path::new(p), Some(config.unit_pretrained_dim))?;
            notes.duplicate_embeddings += loaded.duplicates;
            Some(loaded.table)
        }
        None => None,
    };
    let unit_vocab: Vocab = train.sequences.iter().flat_map(|e| e.tokens.iter()).collect();
    let sep = config.separator().to_string();
    let segments = if !config.use_segment_embeddings {
        SegmentSource::Disabled
    } else if let Some(p) = &config.segment_embeddings {
        let loaded = load_embeddings(Path::new(p), Some(config.semb_dim))?;
        notes.duplicate_embeddings += loaded.duplicates;
        SegmentSource::Pretrained(loaded.table)
    } else {
        let mut lexicon = Vocab::new();
        for ex in &train.sequences {
            for s in &ex.gold {
                let units = &ex.tokens[s.start..s.end];
                if key_is_ambiguous(units, &sep) {
                    notes.ambiguous_keys += 1;
                }
                lexicon.insert(segment_key(units, &sep)?.as_str());
            }
        }
        SegmentSource::Lexicon(lexicon)
    };
    let resources = Resources {
        unit_pretrained,
        unit_vocab,
        segments,
    };
    Ok(Model::new(config, train.labels.clone(), resources)?)
}

pub const LOG_HEADER: &str = "epoch\tmean_nll\tdev_f\tlr";

pub fn log_line(r: &EpochReport) -> String {
    format!("{}\t{:?}\t{:?}\t{:?}", r.epoch, r.mean_nll, r.dev.f1, r.learning_rate)
}

/// Tab-separated training log, one row per epoch.
pub fn format_log(reports: &[EpochReport]) -> String {
    let mut s = String::from(LOG_HEADER);
    s.push('\n');
    for r in reports {
        let _ = writeln!(s, "{}", log_line(r));
    }
    s
}

/// Files produced by [`train_to_dir`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainFiles {
    pub checkpoint: PathBuf,
    pub config: PathBuf,
    pub log: PathBuf,
}

impl TrainFiles {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            checkpoint: dir.join("model.ckpt"),
            config: dir.join("config.toml"),
            log: dir.join("train.log"),
        }
    }
}

pub struct TrainRun {
    pub model: Model,
    pub outcome: TrainOutcome,
    pub notes: Notes,
    pub files: TrainFiles,
}

/// Trains on `train_path`, selects on `dev_path` and writes the best
/// checkpoint, the resolved configuration and the log into `out_dir`.
pub fn train_to_dir(
    config: &ModelConfig,
    train_path: &Path,
    dev_path: &Path,
    out_dir: &Path,
    mut progress: impl FnMut(&EpochReport),
) -> Result<TrainRun> {
    let mut notes = Notes::default();
    let train = read_corpus(train_path, config, None)?;
    notes.absorb(&train);
    let mut model = build_model(config, &train.corpus, &mut notes)?;
    let dev = read_corpus(dev_path, config, Some(model.labels()))?;
    notes.absorb(&dev);

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, ErrorClass::Internal, e))?;
    let files = TrainFiles::in_dir(out_dir);
    let log_file = File::create(&files.log).map_err(|e| Error::io(&files.log, ErrorClass::Internal, e))?;
    let mut log = BufWriter::new(log_file);
    let io = |e| Error::io(&files.log, ErrorClass::Internal, e);
    writeln!(log, "{LOG_HEADER}").map_err(io)?;
    let mut write_err = None;
    let outcome = trainer::train(&mut model, &train.corpus, &dev.corpus, &config.train, |r| {
        if let Err(e) = writeln!(log, "{}", log_line(r)).and_then(|_| log.flush()) {
            write_err.get_or_insert(e);
        }
        progress(r);
    })?;
    if let Some(e) = write_err {
        return Err(io(e));
    }
    log.flush().map_err(io)?;

    checkpoint::save(&model, &files.checkpoint)?;
    fs::write(&files.config, to_toml(model.config())?).map_err(|e| Error::io(&files.config, ErrorClass::Internal, e))?;
    Ok(TrainRun {
        model,
        outcome,
        notes,
        files,
    })
}

/// Decodes every sequence.
pub fn predict_all(model: &Model, sequences: &[Vec<String>]) -> Result<Vec<Segmentation>> {
    Ok(sequences.iter().map(|t| model.decode(t)).collect::<segrep_core::Result<_>>()?)
}

/// Reads `input` in the model's format and writes predictions in the same
/// format.
pub fn predict_file(model: &Model, input: &Path, output: &Path) -> Result<usize> {
    let task = model.config().task;
    let sequences = corpus::parse_tokens(input, task, model.config().normalize_fullwidth)?;
    let preds = predict_all(model, &sequences)?;
    let file = File::create(output).map_err(|e| Error::io(output, ErrorClass::Internal, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(output, ErrorClass::Internal, e);
    for (tokens, seg) in sequences.iter().zip(&preds) {
        if task == TaskKind::SpanLabeled && tokens.is_empty() {
            continue;
        }
        corpus::write_sequence(&mut w, task, model.labels(), tokens, seg).map_err(io)?;
    }
    w.flush().map_err(io)?;
    Ok(sequences.len())
}
