//! Behaviour of the training loop on small synthetic corpora.

mod common;

use common::{resources, small_config, toy_corpus};
use segrep_core::composition::CompositionKind;
use segrep_core::embedding::{EmbeddingTable, Vocab};
use segrep_core::model::{Model, SegmentSource};
use segrep_core::params::checksum;
use segrep_core::trainer::{evaluate, train, TrainConfig};
use segrep_core::{Error, Example, LabelSet, LabeledCorpus, Segment, Segmentation, TaskKind};

fn cfg(epochs: usize) -> TrainConfig {
    TrainConfig {
        max_epochs: epochs,
        ..TrainConfig::default()
    }
}

#[test]
fn forced_unit_segments_score_perfectly_at_first_epoch() {
    let seqs = (0..4)
        .map(|k| {
            let tokens: Vec<String> = (0..k + 2).map(|i| format!("c{i}")).collect();
            let gold = Segmentation::new((0..tokens.len()).map(|i| Segment::new(i, i + 1, 0)).collect());
            Example::new(tokens, gold)
        })
        .collect();
    let corpus = LabeledCorpus::new(TaskKind::WordSeg, LabelSet::word_seg(), seqs);
    let mut config = small_config(CompositionKind::Scnn);
    config.task = TaskKind::WordSeg;
    config.max_segment_len = Some(1);
    let mut model = Model::new(config, LabelSet::word_seg(), resources(&corpus, SegmentSource::Disabled)).unwrap();
    let out = train(&mut model, &corpus, &corpus, &cfg(1), |_| {}).unwrap();
    assert_eq!(out.epochs[0].dev.f1, 1.0);
    assert!(out.epochs[0].mean_nll.abs() < 1e-12);
}

#[test]
fn deterministic_given_seed() {
    let corpus = toy_corpus(8, 1);
    let run = || {
        let mut model = Model::new(
            small_config(CompositionKind::Srnn),
            corpus.labels.clone(),
            resources(&corpus, SegmentSource::Disabled),
        )
        .unwrap();
        let out = train(&mut model, &corpus, &corpus, &cfg(3), |_| {}).unwrap();
        (out, model.params().clone())
    };
    let (a, pa) = run();
    let (b, pb) = run();
    assert_eq!(a, b);
    assert_eq!(pa, pb);
}

#[test]
fn invalid_gold_fails_before_training() {
    let mut corpus = toy_corpus(5, 2);
    corpus.sequences[3].gold = Segmentation::new(vec![Segment::new(0, 1, 0)]);
    let mut model = Model::new(
        small_config(CompositionKind::Sconcate),
        corpus.labels.clone(),
        resources(&corpus, SegmentSource::Disabled),
    )
    .unwrap();
    let before = model.params().clone();
    let mut calls = 0;
    let err = train(&mut model, &corpus, &toy_corpus(2, 3), &cfg(2), |_| calls += 1).unwrap_err();
    assert!(matches!(&err, Error::Validation(m) if m.contains("sequence 3")), "{err}");
    assert_eq!(calls, 0);
    assert_eq!(model.params(), &before);

    let empty = LabeledCorpus::new(TaskKind::SpanLabeled, corpus.labels.clone(), Vec::new());
    assert!(train(&mut model, &empty, &corpus, &cfg(1), |_| {}).is_err());
}

#[test]
fn loss_is_finite_and_improves() {
    let corpus = toy_corpus(10, 4);
    let mut model = Model::new(
        small_config(CompositionKind::Sconcate),
        corpus.labels.clone(),
        resources(&corpus, SegmentSource::Disabled),
    )
    .unwrap();
    let out = train(&mut model, &corpus, &corpus, &cfg(15), |_| {}).unwrap();
    assert!(out.epochs.iter().all(|e| e.mean_nll.is_finite()));
    assert!(out.epochs[out.best_epoch].mean_nll <= out.epochs[0].mean_nll);
    let (_, prf) = evaluate(&model, &corpus).unwrap();
    assert_eq!(prf, out.best_dev);
    for (t, e) in out.epochs.iter().enumerate() {
        assert_eq!(e.epoch, t);
        assert_eq!(e.learning_rate, 0.1 / (1.0 + 0.1 * t as f64));
    }
}

#[test]
fn early_stopping_after_patience() {
    let corpus = toy_corpus(4, 5);
    let mut model = Model::new(
        small_config(CompositionKind::Sconcate),
        corpus.labels.clone(),
        resources(&corpus, SegmentSource::Disabled),
    )
    .unwrap();
    let config = TrainConfig {
        max_epochs: 200,
        patience: 2,
        ..TrainConfig::default()
    };
    let out = train(&mut model, &corpus, &corpus, &config, |_| {}).unwrap();
    assert!(out.stopped_early);
    assert_eq!(out.epochs.len(), out.best_epoch + 1 + 2);
    let best = out.epochs[out.best_epoch].dev.f1;
    assert!(out.epochs[..out.best_epoch].iter().all(|e| e.dev.f1 < best));
    assert!(out.epochs[out.best_epoch + 1..].iter().all(|e| e.dev.f1 <= best));
}

#[test]
fn frozen_tables_are_untouched() {
    let corpus = toy_corpus(6, 6);
    let lexicon: Vocab = ["w0_w1_w2", "w3"].into_iter().collect();
    let pretrained = EmbeddingTable::from_entries(4, [("w0".to_string(), vec![0.1, 0.2, 0.3, 0.4])]).unwrap().0;
    for finetune in [false, true] {
        let mut config = small_config(CompositionKind::Srnn);
        config.use_segment_embeddings = true;
        config.finetune_segment_embeddings = finetune;
        let mut res = resources(&corpus, SegmentSource::Lexicon(lexicon.clone()));
        res.unit_pretrained = Some(pretrained.clone());
        let mut model = Model::new(config, corpus.labels.clone(), res).unwrap();
        let seg = model.segment_embedding_param().unwrap();
        let unit = model.encoder().pretrained().param();
        let (seg0, unit0) = (checksum(model.params().value(seg)), checksum(model.params().value(unit)));
        train(&mut model, &corpus, &corpus, &cfg(2), |_| {}).unwrap();
        assert_eq!(checksum(model.params().value(unit)), unit0);
        assert_eq!(checksum(model.params().value(seg)) == seg0, !finetune);
    }
}
