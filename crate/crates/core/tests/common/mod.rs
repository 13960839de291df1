#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use segrep_core::composition::CompositionKind;
use segrep_core::embedding::Vocab;
use segrep_core::model::{ModelConfig, Resources, SegmentSource};
use segrep_core::{Example, LabelSet, LabeledCorpus, Segment, Segmentation, TaskKind};

/// Phrases over a 30-word vocabulary, each word in exactly one phrase, so
/// the gold segmentation is a function of the tokens.
pub fn phrases() -> Vec<(Vec<String>, usize)> {
    let lens = [3, 1, 2, 2, 3, 1, 2, 3, 1, 2, 2, 3, 1, 2, 2];
    let mut out = Vec::new();
    let mut w = 0;
    for (i, &len) in lens.iter().enumerate() {
        let words = (w..w + len).map(|k| format!("w{k}")).collect();
        out.push((words, i % 2));
        w += len;
    }
    assert_eq!(w, 30);
    out
}

pub fn toy_corpus(count: usize, seed: u64) -> LabeledCorpus {
    let labels = LabelSet::new(vec!["A".into(), "B".into()]).unwrap();
    let table = phrases();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sequences = (0..count)
        .map(|_| {
            let k = rng.gen_range(3..=5);
            let mut tokens = Vec::new();
            let mut segs = Vec::new();
            for _ in 0..k {
                let (words, label) = table.choose(&mut rng).unwrap();
                segs.push(Segment::new(tokens.len(), tokens.len() + words.len(), *label));
                tokens.extend(words.iter().cloned());
            }
            Example::new(tokens, Segmentation::new(segs))
        })
        .collect();
    LabeledCorpus::new(TaskKind::SpanLabeled, labels, sequences)
}

pub fn small_config(kind: CompositionKind) -> ModelConfig {
    ModelConfig {
        composition: kind,
        max_segment_len: Some(3),
        unit_pretrained_dim: 4,
        unit_tuned_dim: 4,
        input_dim: 6,
        hidden_dim: 6,
        scomp_dim: 5,
        semb_dim: 3,
        label_dim: 2,
        segment_dim: 6,
        ..ModelConfig::default()
    }
}

pub fn unit_vocab(corpus: &LabeledCorpus) -> Vocab {
    corpus.sequences.iter().flat_map(|e| e.tokens.iter()).collect()
}

pub fn resources(corpus: &LabeledCorpus, segments: SegmentSource) -> Resources {
    Resources {
        unit_pretrained: None,
        unit_vocab: unit_vocab(corpus),
        segments,
    }
}
