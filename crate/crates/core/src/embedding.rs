//! Embedding tables with an out-of-vocabulary row, and segment keys.
//!
//! Row 0 of every table is the UNK row. Tables loaded from files start with
//! a zero UNK row, so a frozen table answers OOV lookups with the zero
//! vector; a trainable table learns its UNK row like any other.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::precondition;
use crate::{Error, Graph, NodeId, ParamId, ParamStore, Result, Tensor};

pub const UNK_ROW: usize = 0;

/// Surface string to row mapping. Rows start at 1.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocab {
    index: BTreeMap<String, usize>,
    words: Vec<String>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a word if missing; returns its row.
    pub fn insert(&mut self, word: &str) -> usize {
        if let Some(&r) = self.index.get(word) {
            return r;
        }
        self.words.push(word.into());
        let r = self.words.len();
        self.index.insert(word.into(), r);
        r
    }

    pub fn row(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// Row for `word`, or [`UNK_ROW`].
    pub fn row_or_unk(&self, word: &str) -> usize {
        self.row(word).unwrap_or(UNK_ROW)
    }

    /// Words in row order (row `i + 1` holds `words()[i]`).
    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl<S: AsRef<str>> FromIterator<S> for Vocab {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut v = Vocab::new();
        for w in iter {
            v.insert(w.as_ref());
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    vocab: Vocab,
    /// `(len + 1) x dim`, row 0 is UNK.
    matrix: Tensor,
    trainable: bool,
}

impl EmbeddingTable {
    /// A table with no entries; every lookup hits the zero UNK row.
    pub fn empty(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        Ok(Self {
            vocab: Vocab::new(),
            matrix: Tensor::zeros(&[1, dim]),
            trainable: false,
        })
    }

    /// Builds a frozen table. Later duplicates replace earlier ones; the
    /// number of replacements is returned alongside.
    pub fn from_entries<I>(dim: usize, entries: I) -> Result<(Self, usize)>
    where
        I: IntoIterator<Item = (String, Vec<f64>)>,
    {
        let mut vocab = Vocab::new();
        let mut data = vec![0.0; dim];
        let mut duplicates = 0;
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        for (word, vector) in entries {
            if vector.len() != dim {
                return Err(Error::Dimension {
                    op: "embedding entry",
                    left: vec![dim],
                    right: vec![vector.len()],
                });
            }
            if let Some(r) = vocab.row(&word) {
                duplicates += 1;
                data[r * dim..(r + 1) * dim].copy_from_slice(&vector);
            } else {
                vocab.insert(&word);
                data.extend_from_slice(&vector);
            }
        }
        let rows = vocab.len() + 1;
        Ok((
            Self {
                vocab,
                matrix: Tensor::matrix(rows, dim, data)?,
                trainable: false,
            },
            duplicates,
        ))
    }

    /// Table over `vocab` with a given matrix (row 0 UNK).
    pub fn from_parts(vocab: Vocab, matrix: Tensor, trainable: bool) -> Result<Self> {
        if matrix.rank() != 2 || matrix.rows() != vocab.len() + 1 {
            return Err(Error::Dimension {
                op: "embedding table",
                left: vec![vocab.len() + 1],
                right: matrix.shape().to_vec(),
            });
        }
        Ok(Self { vocab, matrix, trainable })
    }

    pub fn into_parts(self) -> (Vocab, Tensor, bool) {
        (self.vocab, self.matrix, self.trainable)
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn matrix(&self) -> &Tensor {
        &self.matrix
    }

    pub fn trainable(&self) -> bool {
        self.trainable
    }

    pub fn set_trainable(&mut self, trainable: bool) {
        self.trainable = trainable;
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vocab.row(word).map(|r| self.matrix.row(r))
    }

    /// Total lookup: the stored vector, or the UNK row.
    pub fn lookup(&self, word: &str) -> &[f64] {
        self.matrix.row(self.vocab.row_or_unk(word))
    }

    pub fn unk(&self) -> &[f64] {
        self.matrix.row(UNK_ROW)
    }

    /// Entries in row order, without the UNK row.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vocab
            .words()
            .iter()
            .enumerate()
            .map(|(i, w)| (w.as_str(), self.matrix.row(i + 1)))
    }
}

/// An embedding table whose matrix lives in a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct BoundTable {
    vocab: Vocab,
    param: ParamId,
}

impl BoundTable {
    /// Moves the table's matrix into `store` under `name`.
    pub fn register(store: &mut ParamStore, name: &str, table: EmbeddingTable) -> Result<Self> {
        let (vocab, matrix, trainable) = table.into_parts();
        let param = store.add(name, matrix, trainable)?;
        Ok(Self { vocab, param })
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn param(&self) -> ParamId {
        self.param
    }

    pub fn dim(&self, store: &ParamStore) -> usize {
        store.value(self.param).cols()
    }

    /// Graph node for the vector of `word` (UNK row when absent).
    pub fn lookup(&self, g: &mut Graph<'_>, word: &str) -> Result<NodeId> {
        g.row(self.param, self.vocab.row_or_unk(word))
    }

    /// Copy of the current table.
    pub fn to_table(&self, store: &ParamStore) -> EmbeddingTable {
        let p = store.get(self.param);
        EmbeddingTable {
            vocab: self.vocab.clone(),
            matrix: p.value.clone(),
            trainable: p.trainable,
        }
    }
}

/// Surface string of a whole segment.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SegmentKey(String);

impl SegmentKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl core::fmt::Display for SegmentKey {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Joins segment units with `separator`.
pub fn segment_key<S: AsRef<str>>(units: &[S], separator: &str) -> Result<SegmentKey> {
    if units.is_empty() {
        return Err(precondition("segment key of no units"));
    }
    let mut key = String::new();
    for (i, u) in units.iter().enumerate() {
        if i > 0 {
            key.push_str(separator);
        }
        key.push_str(u.as_ref());
    }
    Ok(SegmentKey(key))
}

/// True when some unit contains the (non-empty) separator, so the key no
/// longer determines the units.
pub fn key_is_ambiguous<S: AsRef<str>>(units: &[S], separator: &str) -> bool {
    !separator.is_empty() && units.iter().any(|u| u.as_ref().contains(separator))
}

/// Separator used when none is configured.
pub fn default_separator(task: crate::segment::TaskKind) -> &'static str {
    match task {
        crate::segment::TaskKind::SpanLabeled => "_",
        crate::segment::TaskKind::WordSeg => "",
    }
}

pub(crate) fn dim_mismatch(what: &str, expected: usize, found: usize) -> Error {
    Error::Config(format!("{what}: expected dimension {expected}, found {found}"))
}
