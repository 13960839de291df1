//! Two-column BIESO files (`token tag`, blank line between sequences) and
//! whitespace-separated word segmentation files (one sentence per line).

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use segrep_core::bieso::{decode_spans, encode, Tag, TagKind};
use segrep_core::normalize::fullwidth_to_ascii;
use segrep_core::segment::NONE_LABEL;
use segrep_core::{Example, LabelSet, LabeledCorpus, Segment, Segmentation, TaskKind};

use crate::error::{Error, ErrorClass, Result};

const DOCSTART: &str = "-DOCSTART-";

/// A tagged sequence with label names not yet mapped to ids.
#[derive(Clone, Debug, PartialEq, Eq)]
struct NamedSequence {
    tokens: Vec<String>,
    segments: Vec<(usize, usize, String)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParsedCorpus {
    pub corpus: LabeledCorpus,
    /// Ill-formed tag transitions that were repaired.
    pub repairs: usize,
    /// Empty lines skipped in word segmentation files.
    pub skipped_lines: usize,
}

fn read_lines<R: BufRead>(reader: R) -> Result<Vec<String>> {
    reader
        .lines()
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(Path::new(""), ErrorClass::Data, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, ErrorClass::Data, e))
}

/// Splits a CoNLL file into sequences of `(line number, fields)`.
fn conll_blocks(lines: &[String]) -> Vec<Vec<(usize, Vec<&str>)>> {
    let mut blocks = Vec::new();
    let mut current = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            if !current.is_empty() {
                blocks.push(std::mem::take(&mut current));
            }
        } else if fields[0] != DOCSTART {
            current.push((i + 1, fields));
        }
    }
    if !current.is_empty() {
        blocks.push(current);
    }
    blocks
}

/// Parses a two-column BIESO file. With `labels` given, every label must
/// belong to it; otherwise the label set is collected from the file.
pub fn read_conll<R: BufRead>(reader: R, labels: Option<&LabelSet>) -> Result<ParsedCorpus> {
    let lines = read_lines(reader)?;
    let mut named = Vec::new();
    let mut repairs = 0;
    for block in conll_blocks(&lines) {
        let mut tokens = Vec::with_capacity(block.len());
        let mut tags = Vec::with_capacity(block.len());
        for (no, fields) in &block {
            if fields.len() != 2 {
                return Err(Error::parse(*no, format!("expected 2 columns, found {}", fields.len())));
            }
            let tag = Tag::parse(fields[1]).map_err(|e| Error::parse(*no, e.to_string()))?;
            tokens.push(fields[0].to_string());
            tags.push(tag);
        }
        let (spans, fixed) = decode_spans(&tags);
        repairs += fixed;
        let segments = spans
            .into_iter()
            .map(|s| (s.start, s.end, s.label.unwrap_or_else(|| NONE_LABEL.to_string())))
            .collect();
        named.push(NamedSequence { tokens, segments });
    }
    let labels = match labels {
        Some(l) => l.clone(),
        None => {
            let names: BTreeSet<&str> = named.iter().flat_map(|s| s.segments.iter().map(|x| x.2.as_str())).collect();
            LabelSet::span_labeled(names)
        }
    };
    let sequences = named
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            let segs = s
                .segments
                .into_iter()
                .map(|(a, b, name)| {
                    labels
                        .id(&name)
                        .map(|y| Segment::new(a, b, y))
                        .ok_or_else(|| Error::Data(format!("sequence {i}: unknown label {name:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Example::new(s.tokens, Segmentation::new(segs)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ParsedCorpus {
        corpus: LabeledCorpus::new(TaskKind::SpanLabeled, labels, sequences),
        repairs,
        skipped_lines: 0,
    })
}

pub fn parse_conll(path: &Path, labels: Option<&LabelSet>) -> Result<ParsedCorpus> {
    read_conll(open(path)?, labels).map_err(|e| e.at(path))
}

/// Characters of a word-segmentation unit string, optionally folded to ASCII.
pub fn characters(text: &str, normalize: bool) -> Vec<String> {
    let text = if normalize {
        fullwidth_to_ascii(text)
    } else {
        text.to_string()
    };
    text.chars().filter(|c| !c.is_whitespace()).map(String::from).collect()
}

/// Parses one sentence per line, words separated by whitespace. Characters
/// become tokens and every word is a `WORD` segment.
pub fn read_wordseg<R: BufRead>(reader: R, normalize: bool) -> Result<ParsedCorpus> {
    let labels = LabelSet::word_seg();
    let mut sequences = Vec::new();
    let mut skipped = 0;
    for line in read_lines(reader)? {
        if line.trim().is_empty() {
            skipped += 1;
            continue;
        }
        let mut tokens = Vec::new();
        let mut segs = Vec::new();
        for word in line.split_whitespace() {
            let chars = characters(word, normalize);
            segs.push(Segment::new(tokens.len(), tokens.len() + chars.len(), 0));
            tokens.extend(chars);
        }
        sequences.push(Example::new(tokens, Segmentation::new(segs)));
    }
    Ok(ParsedCorpus {
        corpus: LabeledCorpus::new(TaskKind::WordSeg, labels, sequences),
        repairs: 0,
        skipped_lines: skipped,
    })
}

pub fn parse_wordseg(path: &Path, normalize: bool) -> Result<ParsedCorpus> {
    read_wordseg(open(path)?, normalize).map_err(|e| e.at(path))
}

/// Token sequences of a prediction input; tags are ignored when present.
/// Word segmentation input keeps empty lines as empty sequences.
pub fn read_tokens<R: BufRead>(reader: R, task: TaskKind, normalize: bool) -> Result<Vec<Vec<String>>> {
    let lines = read_lines(reader)?;
    Ok(match task {
        TaskKind::SpanLabeled => conll_blocks(&lines)
            .into_iter()
            .map(|b| b.into_iter().map(|(_, f)| f[0].to_string()).collect())
            .collect(),
        TaskKind::WordSeg => lines.iter().map(|l| characters(l, normalize)).collect(),
    })
}

pub fn parse_tokens(path: &Path, task: TaskKind, normalize: bool) -> Result<Vec<Vec<String>>> {
    read_tokens(open(path)?, task, normalize).map_err(|e| e.at(path))
}

/// Writes one sequence in the format of `task`.
pub fn write_sequence<W: Write>(
    mut w: W,
    task: TaskKind,
    labels: &LabelSet,
    tokens: &[String],
    seg: &Segmentation,
) -> std::io::Result<()> {
    match task {
        TaskKind::SpanLabeled => {
            let tags = encode(seg, labels.none_id(), true);
            for (tok, tag) in tokens.iter().zip(&tags) {
                writeln!(w, "{tok} {}", tag.render(|y| labels.name(*y)))?;
            }
            writeln!(w)
        }
        TaskKind::WordSeg => {
            let words: Vec<String> = seg.iter().map(|s| tokens[s.start..s.end].concat()).collect();
            writeln!(w, "{}", words.join(" "))
        }
    }
}

/// Guesses the format of an evaluation file: two-column lines whose
/// second field is a tag mean BIESO, anything else is word segmentation.
pub fn detect_task<R: BufRead>(reader: R) -> Result<TaskKind> {
    let mut saw_line = false;
    for line in read_lines(reader)? {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() || fields[0] == DOCSTART {
            continue;
        }
        saw_line = true;
        let tagged = fields.len() == 2
            && Tag::parse(fields[1]).is_ok_and(|t| t.kind == TagKind::Outside || t.label.is_some());
        if !tagged {
            return Ok(TaskKind::WordSeg);
        }
    }
    Ok(if saw_line {
        TaskKind::SpanLabeled
    } else {
        TaskKind::WordSeg
    })
}

pub fn detect_file_task(path: &Path) -> Result<TaskKind> {
    detect_task(open(path)?).map_err(|e| e.at(path))
}
