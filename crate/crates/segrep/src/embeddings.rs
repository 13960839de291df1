//! Word-vector text files: an optional `count dim` header, then one
//! `token v1 .. v_dim` line per entry.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use segrep_core::embedding::EmbeddingTable;

use crate::error::{Error, ErrorClass, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LoadedEmbeddings {
    pub table: EmbeddingTable,
    /// Entries whose token appeared earlier; the last occurrence wins.
    pub duplicates: usize,
    pub had_header: bool,
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut it = line.split_whitespace();
    let count = it.next()?.parse().ok()?;
    let dim = it.next()?.parse().ok()?;
    it.next().is_none().then_some((count, dim))
}

/// Reads a table from text. `expected_dim` is checked when given.
pub fn read_embeddings<R: BufRead>(reader: R, expected_dim: Option<usize>) -> Result<LoadedEmbeddings> {
    let mut lines = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(Path::new(""), ErrorClass::Data, e))?;
        if !line.trim().is_empty() {
            lines.push((i + 1, line));
        }
    }
    let mut start = 0;
    let mut header = None;
    if let Some((_, first)) = lines.first() {
        if let Some((count, dim)) = parse_header(first) {
            let next_fields = lines.get(1).map(|(_, l)| l.split_whitespace().count());
            // a one-dimensional entry with a numeric token looks like a
            // header; the entry count disambiguates
            let fits = match next_fields {
                None => count == 0,
                Some(f) => f == dim + 1 && (dim != 1 || count == lines.len() - 1),
            };
            if fits {
                header = Some((count, dim));
                start = 1;
            }
        }
    }

    let mut dim = header.map(|(_, d)| d);
    let mut entries = Vec::with_capacity(lines.len());
    for (no, line) in &lines[start..] {
        let mut fields = line.split_whitespace();
        let token = fields.next().unwrap_or_default().to_string();
        let values = fields
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::parse(*no, format!("non-numeric value {f:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let d = *dim.get_or_insert(values.len());
        if values.len() != d || d == 0 {
            return Err(Error::parse(
                *no,
                format!("expected {} fields, found {}", d + 1, values.len() + 1),
            ));
        }
        entries.push((token, values));
    }
    if let (Some((count, _)), n) = (header, entries.len()) {
        if count != n {
            return Err(Error::parse(1, format!("header announces {count} entries, found {n}")));
        }
    }
    let dim = match (dim, expected_dim) {
        (Some(d), Some(e)) if d != e => {
            return Err(Error::Config(format!("embedding dimension {d} does not match configured {e}")));
        }
        (Some(d), _) => d,
        (None, Some(e)) => e,
        (None, None) => return Err(Error::Data("embedding file has no entries and no dimension".into())),
    };
    let (table, duplicates) = EmbeddingTable::from_entries(dim, entries)?;
    Ok(LoadedEmbeddings {
        table,
        duplicates,
        had_header: header.is_some(),
    })
}

pub fn load_embeddings(path: &Path, expected_dim: Option<usize>) -> Result<LoadedEmbeddings> {
    let file = File::open(path).map_err(|e| Error::io(path, ErrorClass::Config, e))?;
    read_embeddings(BufReader::new(file), expected_dim).map_err(|e| e.at(path))
}

/// Writes the entries of `table` (not its unknown-word row) with a header.
/// Values are printed in shortest round-trip form.
pub fn write_embeddings<W: Write>(mut w: W, table: &EmbeddingTable) -> Result<()> {
    let io = |e| Error::io(Path::new(""), ErrorClass::Internal, e);
    writeln!(w, "{} {}", table.len(), table.dim()).map_err(io)?;
    for (token, values) in table.entries() {
        if token.is_empty() || token.contains(char::is_whitespace) {
            return Err(Error::Data(format!("token {token:?} cannot be written in the text format")));
        }
        write!(w, "{token}").map_err(io)?;
        for v in values {
            write!(w, " {v:?}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn save_embeddings(path: &Path, table: &EmbeddingTable) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, ErrorClass::Internal, e))?;
    write_embeddings(BufWriter::new(file), table).map_err(|e| e.at(path))
}
