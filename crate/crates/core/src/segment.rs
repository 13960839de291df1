//! Segments, segmentations and label inventories.
//!
//! Positions are 0-based and half-open internally (`start..end`). The
//! 1-based closed `(u, v)` form is available through [`Segment::one_based`]
//! and [`Segment::from_one_based`].

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Label of non-entity segments in span-labeled tasks.
pub const NONE_LABEL: &str = "NONE";
/// Single label of word segmentation tasks.
pub const WORD_LABEL: &str = "WORD";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub label: usize,
}

impl Segment {
    pub fn new(start: usize, end: usize, label: usize) -> Self {
        Self { start, end, label }
    }

    /// From 1-based inclusive bounds `(u, v)`.
    pub fn from_one_based(u: usize, v: usize, label: usize) -> Self {
        assert!(u >= 1 && v >= u, "invalid 1-based span ({u}, {v})");
        Self::new(u - 1, v, label)
    }

    pub fn one_based(&self) -> (usize, usize) {
        (self.start + 1, self.end)
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (u, v) = self.one_based();
        write!(f, "({u},{v},{})", self.label)
    }
}

/// Ordered segments covering a sequence without gaps or overlaps.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Segmentation {
    segments: Vec<Segment>,
}

impl Segmentation {
    pub fn new(segments: Vec<Segment>) -> Self {
        Self { segments }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Segment> {
        self.segments.iter()
    }

    /// Number of covered positions.
    pub fn covered(&self) -> usize {
        self.segments.last().map_or(0, |s| s.end)
    }

    /// Checks the cover invariants for a sequence of length `n`: the first
    /// segment starts at 0, each next one starts where the previous ended,
    /// the last ends at `n`, every length is in `1..=max_len` and every
    /// label is below `num_labels`.
    pub fn validate(&self, n: usize, max_len: Option<usize>, num_labels: usize) -> Result<()> {
        let mut pos = 0;
        for s in &self.segments {
            if s.start != pos || s.end <= s.start {
                return Err(Error::InvalidSegmentation(format!(
                    "segment {s} does not continue at position {}",
                    pos + 1
                )));
            }
            if let Some(l) = max_len {
                if s.len() > l {
                    return Err(Error::InvalidSegmentation(format!(
                        "segment {s} longer than maximum length {l}"
                    )));
                }
            }
            if s.label >= num_labels {
                return Err(Error::InvalidSegmentation(format!("segment {s} has unknown label")));
            }
            pos = s.end;
        }
        if pos != n {
            return Err(Error::InvalidSegmentation(format!(
                "segments cover {pos} of {n} positions"
            )));
        }
        Ok(())
    }

    pub fn max_segment_len(&self) -> usize {
        self.segments.iter().map(Segment::len).max().unwrap_or(0)
    }
}

impl From<Vec<Segment>> for Segmentation {
    fn from(segments: Vec<Segment>) -> Self {
        Self::new(segments)
    }
}

impl<'a> IntoIterator for &'a Segmentation {
    type Item = &'a Segment;
    type IntoIter = core::slice::Iter<'a, Segment>;

    fn into_iter(self) -> Self::IntoIter {
        self.segments.iter()
    }
}

/// Kind of segmentation task.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    /// Labeled spans over words (NER); `NONE` marks non-entities.
    #[default]
    SpanLabeled,
    /// Unlabeled words over characters (CWS).
    WordSeg,
}

/// Ordered label names; ids are indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelSet {
    names: Vec<String>,
}

impl LabelSet {
    pub fn new(names: Vec<String>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::Config("empty label set".to_string()));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::Config(format!("duplicate label {n}")));
            }
        }
        Ok(Self { names })
    }

    /// `NONE` first, then the given labels in sorted order.
    pub fn span_labeled<'a>(labels: impl IntoIterator<Item = &'a str>) -> Self {
        let mut rest: Vec<String> = labels
            .into_iter()
            .filter(|l| *l != NONE_LABEL)
            .map(ToString::to_string)
            .collect();
        rest.sort();
        rest.dedup();
        let mut names = alloc::vec![NONE_LABEL.to_string()];
        names.extend(rest);
        Self { names }
    }

    pub fn word_seg() -> Self {
        Self {
            names: alloc::vec![WORD_LABEL.to_string()],
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn none_id(&self) -> Option<usize> {
        self.id(NONE_LABEL)
    }
}

/// A token sequence with its gold segmentation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Example {
    pub tokens: Vec<String>,
    pub gold: Segmentation,
}

impl Example {
    pub fn new(tokens: Vec<String>, gold: Segmentation) -> Self {
        Self { tokens, gold }
    }
}

/// Gold-segmented sequences sharing one label set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledCorpus {
    pub task: TaskKind,
    pub labels: LabelSet,
    pub sequences: Vec<Example>,
}

impl LabeledCorpus {
    pub fn new(task: TaskKind, labels: LabelSet, sequences: Vec<Example>) -> Self {
        Self { task, labels, sequences }
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// Longest gold segment.
    pub fn max_segment_len(&self) -> usize {
        self.sequences.iter().map(|e| e.gold.max_segment_len()).max().unwrap_or(0)
    }

    /// Checks every gold segmentation; errors name the sequence index.
    pub fn validate(&self, max_len: Option<usize>) -> Result<()> {
        for (i, ex) in self.sequences.iter().enumerate() {
            ex.gold
                .validate(ex.tokens.len(), max_len, self.labels.len())
                .map_err(|e| Error::InvalidSegmentation(format!("sequence {i}: {e}")))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn validation_reports_offending_segment() {
        let s = Segmentation::new(vec![Segment::new(0, 2, 0), Segment::new(3, 4, 0)]);
        let err = s.validate(4, None, 1).unwrap_err();
        assert!(matches!(err, Error::InvalidSegmentation(m) if m.contains("(4,4,0)")));
        let s = Segmentation::new(vec![Segment::new(0, 4, 0)]);
        assert!(s.validate(4, Some(3), 1).is_err());
        assert!(s.validate(4, Some(4), 1).is_ok());
        assert!(s.validate(5, None, 1).is_err());
        assert!(s.validate(4, None, 0).is_err());
        assert!(Segmentation::default().validate(0, None, 1).is_ok());
    }

    #[test]
    fn one_based_conversion() {
        let s = Segment::from_one_based(1, 2, 3);
        assert_eq!(s, Segment::new(0, 2, 3));
        assert_eq!(s.one_based(), (1, 2));
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn label_sets() {
        let l = LabelSet::span_labeled(["PER", "ORG", "PER", "NONE"]);
        assert_eq!(l.names(), &["NONE", "ORG", "PER"]);
        assert_eq!(l.none_id(), Some(0));
        assert_eq!(LabelSet::word_seg().none_id(), None);
        assert!(LabelSet::new(vec!["a".into(), "a".into()]).is_err());
    }
}
