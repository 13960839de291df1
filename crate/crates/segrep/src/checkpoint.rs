//! Binary model checkpoints.
//!
//! Layout (little-endian): magic `SEGREPCK`, `u32` version, the model
//! configuration as TOML, label names, the three vocabularies, then every
//! parameter as name, trainable flag, shape and raw `f64` values. Strings
//! are `u64` length-prefixed UTF-8.

use std::fs;
use std::path::Path;

use segrep_core::embedding::Vocab;
use segrep_core::model::{Model, Vocabularies};
use segrep_core::{LabelSet, Tensor};

use crate::config::{parse_config, to_toml};
use crate::error::{Error, ErrorClass, Result};

const MAGIC: &[u8; 8] = b"SEGREPCK";
pub const VERSION: u32 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.0.extend_from_slice(s.as_bytes());
    }
    fn strings<'a>(&mut self, items: impl ExactSizeIterator<Item = &'a String>) {
        self.u64(items.len() as u64);
        for s in items {
            self.str(s);
        }
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

fn truncated() -> Error {
    Error::Checkpoint("file is truncated".into())
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.data.len()).ok_or_else(truncated)?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn len(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| truncated())
    }
    fn str(&mut self) -> Result<String> {
        let n = self.len()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Checkpoint("invalid UTF-8 string".into()))
    }
    fn strings(&mut self) -> Result<Vec<String>> {
        let n = self.len()?;
        (0..n).map(|_| self.str()).collect()
    }
}

pub fn to_bytes(model: &Model) -> Result<Vec<u8>> {
    let mut w = Writer(MAGIC.to_vec());
    w.u32(VERSION);
    w.str(&to_toml(model.config())?);
    w.strings(model.labels().names().iter());
    let vocabs = model.vocabularies();
    w.strings(vocabs.unit_pretrained.words().iter());
    w.strings(vocabs.unit_tuned.words().iter());
    match &vocabs.segment {
        Some(v) => {
            w.u8(1);
            w.strings(v.words().iter());
        }
        None => w.u8(0),
    }
    let params = model.params();
    w.u64(params.len() as u64);
    for (_, p) in params.iter() {
        w.str(&p.name);
        w.u8(p.trainable as u8);
        w.u32(p.value.shape().len() as u32);
        for &d in p.value.shape() {
            w.u64(d as u64);
        }
        for v in p.value.data() {
            w.0.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(w.0)
}

pub fn from_bytes(data: &[u8]) -> Result<Model> {
    let mut r = Reader { data, pos: 0 };
    if r.take(MAGIC.len()).ok() != Some(&MAGIC[..]) {
        return Err(Error::Checkpoint("not a segrep checkpoint".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version} (expected {VERSION})")));
    }
    let config = parse_config(&r.str()?).map_err(|e| Error::Checkpoint(format!("embedded configuration: {e}")))?;
    let labels = LabelSet::new(r.strings()?).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let vocab = |words: Vec<String>| words.iter().collect::<Vocab>();
    let unit_pretrained = vocab(r.strings()?);
    let unit_tuned = vocab(r.strings()?);
    let segment = match r.u8()? {
        0 => None,
        1 => Some(vocab(r.strings()?)),
        t => return Err(Error::Checkpoint(format!("bad segment table flag {t}"))),
    };
    let count = r.len()?;
    let mut values = Vec::with_capacity(count);
    let mut flags = Vec::with_capacity(count);
    for _ in 0..count {
        let name = r.str()?;
        let trainable = r.u8()? != 0;
        let rank = r.u32()? as usize;
        let shape = (0..rank).map(|_| r.len()).collect::<Result<Vec<_>>>()?;
        let n = shape.iter().try_fold(1usize, |a, d| a.checked_mul(*d)).ok_or_else(truncated)?;
        let bytes = r.take(n.checked_mul(8).ok_or_else(truncated)?)?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let tensor = Tensor::new(shape, data).map_err(|e| Error::Checkpoint(format!("{name}: {e}")))?;
        flags.push((name.clone(), trainable));
        values.push((name, tensor));
    }
    if r.pos != data.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    let vocabs = Vocabularies {
        unit_pretrained,
        unit_tuned,
        segment,
    };
    let model = Model::restore(config, labels, vocabs, values).map_err(|e| Error::Checkpoint(e.to_string()))?;
    for (name, trainable) in flags {
        let id = model.params().id(&name).expect("restored parameter");
        if model.params().get(id).trainable != trainable {
            return Err(Error::Checkpoint(format!("trainable flag of {name} disagrees with configuration")));
        }
    }
    Ok(model)
}

pub fn save(model: &Model, path: &Path) -> Result<()> {
    let bytes = to_bytes(model)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, ErrorClass::Internal, e))
}

pub fn load(path: &Path) -> Result<Model> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, ErrorClass::Checkpoint, e))?;
    from_bytes(&bytes).map_err(|e| match e {
        Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
        other => other,
    })
}
