//! Auto-segmented corpora for external segment-embedding training: each
//! predicted segment is written as its key, keys separated by spaces.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use segrep_core::embedding::{key_is_ambiguous, segment_key};
use segrep_core::model::Segmenter;
use segrep_core::TaskKind;

use crate::corpus::characters;
use crate::error::{Error, ErrorClass, Result};

/// How a raw line becomes units.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Units {
    /// Whitespace-separated words.
    Words,
    /// Characters, whitespace dropped; optionally folded to ASCII.
    Characters { normalize: bool },
}

impl Units {
    pub fn for_task(task: TaskKind, normalize: bool) -> Self {
        match task {
            TaskKind::SpanLabeled => Units::Words,
            TaskKind::WordSeg => Units::Characters { normalize },
        }
    }

    pub fn split(self, line: &str) -> Vec<String> {
        match self {
            Units::Words => line.split_whitespace().map(String::from).collect(),
            Units::Characters { normalize } => characters(line, normalize),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EmitReport {
    pub lines: usize,
    pub segments: usize,
    /// Segments containing a unit that itself contains the separator.
    pub ambiguous_keys: usize,
}

pub fn emit_segmented<S, R, W>(segmenter: &S, units: Units, separator: &str, input: R, mut out: W) -> Result<EmitReport>
where
    S: Segmenter + ?Sized,
    R: BufRead,
    W: Write,
{
    let io = |class| move |e| Error::io(Path::new(""), class, e);
    let mut report = EmitReport::default();
    for line in input.lines() {
        let line = line.map_err(io(ErrorClass::Data))?;
        let tokens = units.split(&line);
        let mut keys = Vec::new();
        if !tokens.is_empty() {
            for s in &segmenter.segment(&tokens)? {
                let unit_slice = &tokens[s.start..s.end];
                if key_is_ambiguous(unit_slice, separator) {
                    report.ambiguous_keys += 1;
                }
                keys.push(segment_key(unit_slice, separator)?.into_string());
            }
        }
        report.lines += 1;
        report.segments += keys.len();
        writeln!(out, "{}", keys.join(" ")).map_err(io(ErrorClass::Internal))?;
    }
    out.flush().map_err(io(ErrorClass::Internal))?;
    Ok(report)
}

pub fn emit_segmented_corpus<S: Segmenter + ?Sized>(
    segmenter: &S,
    units: Units,
    separator: &str,
    raw: &Path,
    out: &Path,
) -> Result<EmitReport> {
    let input = File::open(raw).map_err(|e| Error::io(raw, ErrorClass::Data, e))?;
    let output = File::create(out).map_err(|e| Error::io(out, ErrorClass::Internal, e))?;
    emit_segmented(segmenter, units, separator, BufReader::new(input), BufWriter::new(output)).map_err(|e| e.at(raw))
}
