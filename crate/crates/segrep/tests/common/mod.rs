#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use segrep::core::{Example, LabelSet, LabeledCorpus, Segment, Segmentation, TaskKind};

/// Phrases covering a 30-word vocabulary; each word occurs in exactly one
/// phrase, so gold segmentations are determined by the tokens.
pub fn phrases() -> Vec<(Vec<String>, usize)> {
    let lens = [3, 1, 2, 2, 3, 1, 2, 3, 1, 2, 2, 3, 1, 2, 2];
    let mut out = Vec::new();
    let mut w = 0;
    for (i, &len) in lens.iter().enumerate() {
        out.push(((w..w + len).map(|k| format!("w{k}")).collect(), i % 2));
        w += len;
    }
    assert_eq!(w, 30);
    out
}

/// `count` sequences of 3 to 5 phrases with labels `A` and `B`.
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

/// BIESO text of a toy corpus where label `B` phrases are written as `O`
/// tokens, so files exercise entities and outside tokens.
pub fn toy_conll(count: usize, seed: u64) -> String {
    let corpus = toy_corpus(count, seed);
    let mut out = String::new();
    for ex in &corpus.sequences {
        for s in &ex.gold {
            let n = s.len();
            for (i, tok) in ex.tokens[s.start..s.end].iter().enumerate() {
                let tag = match (s.label, n, i) {
                    (1, _, _) => "O".to_string(),
                    (_, 1, _) => "S-ENT".to_string(),
                    (_, _, 0) => "B-ENT".to_string(),
                    (_, n, i) if i + 1 == n => "E-ENT".to_string(),
                    _ => "I-ENT".to_string(),
                };
                out.push_str(&format!("{tok} {tag}\n"));
            }
        }
        out.push('\n');
    }
    out
}

pub fn toy_wordseg(count: usize, seed: u64) -> String {
    let corpus = toy_corpus(count, seed);
    let alphabet: Vec<char> = "甲乙丙丁戊己庚辛壬癸子丑寅卯辰巳午未申酉戌亥天地玄黄宇宙洪荒".chars().collect();
    let mut out = String::new();
    for ex in &corpus.sequences {
        let words: Vec<String> = ex
            .gold
            .iter()
            .map(|s| {
                ex.tokens[s.start..s.end]
                    .iter()
                    .map(|t| alphabet[t[1..].parse::<usize>().unwrap()])
                    .collect()
            })
            .collect();
        out.push_str(&words.join(" "));
        out.push('\n');
    }
    out
}

pub const SMALL_DIMS: &str = "unit_pretrained_dim = 4
unit_tuned_dim = 4
input_dim = 6
hidden_dim = 6
scomp_dim = 5
semb_dim = 3
label_dim = 2
segment_dim = 6
";
