//! BIESO tags.
//!
//! Span-labeled tasks write `B-X I-X E-X` for multi-token segments, `S-X`
//! for single tokens and `O` for `NONE` tokens. Word segmentation uses bare
//! `B I E S` and never `O`. `M` is read as `I`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result, Segment, Segmentation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TagKind {
    Begin,
    Inside,
    End,
    Single,
    Outside,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Tag<L> {
    pub kind: TagKind,
    pub label: Option<L>,
}

impl<L> Tag<L> {
    pub fn new(kind: TagKind, label: Option<L>) -> Self {
        Self { kind, label }
    }

    pub fn outside() -> Self {
        Self::new(TagKind::Outside, None)
    }
}

impl Tag<String> {
    /// Parses `O`, `B`, `B-X`, `I-X`, `E-X`, `S-X` (and `M` for `I`).
    pub fn parse(s: &str) -> Result<Self> {
        if s == "O" {
            return Ok(Self::outside());
        }
        let (prefix, label) = match s.split_once('-') {
            Some((p, l)) if !l.is_empty() => (p, Some(String::from(l))),
            Some(_) => return Err(Error::Validation(format!("tag {s:?} has an empty label"))),
            None => (s, None),
        };
        let kind = match prefix {
            "B" => TagKind::Begin,
            "I" | "M" => TagKind::Inside,
            "E" => TagKind::End,
            "S" => TagKind::Single,
            _ => return Err(Error::Validation(format!("unknown tag prefix in {s:?}"))),
        };
        Ok(Self::new(kind, label))
    }
}

impl<L> Tag<L> {
    /// Writes the tag, naming labels through `name`.
    pub fn render<'a>(&'a self, name: impl Fn(&'a L) -> &'a str) -> String {
        let prefix = match self.kind {
            TagKind::Begin => "B",
            TagKind::Inside => "I",
            TagKind::End => "E",
            TagKind::Single => "S",
            TagKind::Outside => return String::from("O"),
        };
        match &self.label {
            Some(l) => format!("{prefix}-{}", name(l)),
            None => String::from(prefix),
        }
    }
}

/// Tags for a segmentation. With `none = Some(id)`, segments labeled `id`
/// become `O` tokens; with `labeled = false` tags carry no label.
pub fn encode(seg: &Segmentation, none: Option<usize>, labeled: bool) -> Vec<Tag<usize>> {
    let mut tags = Vec::with_capacity(seg.covered());
    for s in seg {
        if Some(s.label) == none {
            tags.extend((0..s.len()).map(|_| Tag::outside()));
            continue;
        }
        let label = labeled.then_some(s.label);
        if s.len() == 1 {
            tags.push(Tag::new(TagKind::Single, label));
        } else {
            tags.push(Tag::new(TagKind::Begin, label));
            tags.extend((2..s.len()).map(|_| Tag::new(TagKind::Inside, label)));
            tags.push(Tag::new(TagKind::End, label));
        }
    }
    tags
}

/// A decoded span; `label` is `None` for `O` tokens and unlabeled tags.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Span<L> {
    pub start: usize,
    pub end: usize,
    pub label: Option<L>,
}

/// Spans from tags, repairing ill-formed sequences.
///
/// `I`/`E` without a matching open chunk start a new chunk, and chunks that
/// are not closed by `E` are closed where the next chunk starts. Each
/// repaired chunk adds one to the returned count.
pub fn decode_spans<L: Clone + PartialEq>(tags: &[Tag<L>]) -> (Vec<Span<L>>, usize) {
    struct Open<L> {
        start: usize,
        label: Option<L>,
        repaired: bool,
    }
    fn close<L>(open: &mut Option<Open<L>>, end: usize, clean: bool, spans: &mut Vec<Span<L>>, repairs: &mut usize) {
        if let Some(o) = open.take() {
            if !clean && !o.repaired {
                *repairs += 1;
            }
            spans.push(Span {
                start: o.start,
                end,
                label: o.label,
            });
        }
    }
    let mut spans = Vec::new();
    let mut repairs = 0;
    let mut open: Option<Open<L>> = None;
    for (i, tag) in tags.iter().enumerate() {
        let continues = matches!(&open, Some(o) if o.label == tag.label);
        match tag.kind {
            TagKind::Begin => {
                close(&mut open, i, false, &mut spans, &mut repairs);
                open = Some(Open {
                    start: i,
                    label: tag.label.clone(),
                    repaired: false,
                });
            }
            TagKind::Inside | TagKind::End => {
                if !continues {
                    close(&mut open, i, false, &mut spans, &mut repairs);
                    open = Some(Open {
                        start: i,
                        label: tag.label.clone(),
                        repaired: true,
                    });
                    repairs += 1;
                }
                if tag.kind == TagKind::End {
                    close(&mut open, i + 1, true, &mut spans, &mut repairs);
                }
            }
            TagKind::Single | TagKind::Outside => {
                close(&mut open, i, false, &mut spans, &mut repairs);
                spans.push(Span {
                    start: i,
                    end: i + 1,
                    label: tag.label.clone(),
                });
            }
        }
    }
    close(&mut open, tags.len(), false, &mut spans, &mut repairs);
    (spans, repairs)
}

/// Decoded segmentation plus the number of repaired chunks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decoded {
    pub segmentation: Segmentation,
    pub repairs: usize,
}

/// Inverse of [`encode`]: unlabeled tags (including `O`) get `unlabeled`.
pub fn decode(tags: &[Tag<usize>], unlabeled: usize) -> Decoded {
    let (spans, repairs) = decode_spans(tags);
    let segments = spans
        .into_iter()
        .map(|s| Segment::new(s.start, s.end, s.label.unwrap_or(unlabeled)))
        .collect();
    Decoded {
        segmentation: Segmentation::new(segments),
        repairs,
    }
}
