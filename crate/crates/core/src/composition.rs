//! Segment representations composed from unit representations.
//!
//! * `Srnn`: a segment-level bi-LSTM (own parameters) over `H_u..H_v`;
//!   the final states of both directions are merged by a rectified linear
//!   map.
//! * `Scnn`: a width-2 rectified filter over adjacent pairs, max-pooled.
//!   Length-1 segments are paired with a learned right boundary vector.
//! * `Sconcate`: `H_u..H_v` followed by learned padding up to the maximum
//!   segment length, concatenated and mapped by one rectified linear layer.
//!
//! [`Composer::compose_all`] computes every span up to the maximum length
//! for a whole sentence, sharing work between spans (recurrent prefixes,
//! filter windows).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::precondition;
use crate::lstm::Lstm;
use crate::params::{embedding_uniform, glorot_uniform};
use crate::{Error, Graph, NodeId, ParamId, ParamStore, Result, Tensor};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompositionKind {
    Srnn,
    Scnn,
    #[default]
    Sconcate,
}

impl fmt::Display for CompositionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CompositionKind::Srnn => "srnn",
            CompositionKind::Scnn => "scnn",
            CompositionKind::Sconcate => "sconcate",
        })
    }
}

impl FromStr for CompositionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "srnn" => Ok(CompositionKind::Srnn),
            "scnn" => Ok(CompositionKind::Scnn),
            "sconcate" => Ok(CompositionKind::Sconcate),
            _ => Err(Error::Config(format!("unknown composition kind {s:?}"))),
        }
    }
}

/// Span representations for one sentence, addressed by `(start, len)`.
#[derive(Clone, Debug)]
pub struct SpanTable {
    n: usize,
    max_len: usize,
    nodes: Vec<Option<NodeId>>,
}

impl SpanTable {
    fn new(n: usize, max_len: usize) -> Self {
        Self {
            n,
            max_len,
            nodes: vec![None; n * max_len],
        }
    }

    fn set(&mut self, start: usize, len: usize, node: NodeId) {
        self.nodes[start * self.max_len + len - 1] = Some(node);
    }

    pub fn get(&self, start: usize, len: usize) -> Option<NodeId> {
        if len == 0 || len > self.max_len || start + len > self.n {
            return None;
        }
        self.nodes[start * self.max_len + len - 1]
    }
}

#[derive(Clone, Debug)]
pub struct Srnn {
    forward: Lstm,
    backward: Lstm,
    w_forward: ParamId,
    w_backward: ParamId,
    bias: ParamId,
}

#[derive(Clone, Debug)]
pub struct Scnn {
    w_left: ParamId,
    w_right: ParamId,
    bias: ParamId,
    boundary: ParamId,
}

#[derive(Clone, Debug)]
pub struct Sconcate {
    weight: ParamId,
    bias: ParamId,
    padding: ParamId,
    max_len: usize,
}

#[derive(Clone, Debug)]
pub enum Composer {
    Srnn(Srnn),
    Scnn(Scnn),
    Sconcate(Sconcate),
}

impl Composer {
    /// Registers the parameters of `kind` under `scomp.*`. The recurrent
    /// variant uses `out_dim` hidden units per direction.
    pub fn new<R: Rng + ?Sized>(
        kind: CompositionKind,
        store: &mut ParamStore,
        rng: &mut R,
        unit_dim: usize,
        out_dim: usize,
        max_len: usize,
    ) -> Result<Self> {
        if unit_dim == 0 || out_dim == 0 || max_len == 0 {
            return Err(Error::Config("composition dimensions and max length must be positive".into()));
        }
        Ok(match kind {
            CompositionKind::Srnn => Composer::Srnn(Srnn {
                forward: Lstm::new(store, "scomp.srnn.fwd", unit_dim, out_dim, rng)?,
                backward: Lstm::new(store, "scomp.srnn.bwd", unit_dim, out_dim, rng)?,
                w_forward: store.add("scomp.srnn.w_fwd", glorot_uniform(rng, out_dim, out_dim), true)?,
                w_backward: store.add("scomp.srnn.w_bwd", glorot_uniform(rng, out_dim, out_dim), true)?,
                bias: store.add("scomp.srnn.b", Tensor::zeros(&[out_dim]), true)?,
            }),
            CompositionKind::Scnn => Composer::Scnn(Scnn {
                w_left: store.add("scomp.scnn.w_left", glorot_uniform(rng, out_dim, unit_dim), true)?,
                w_right: store.add("scomp.scnn.w_right", glorot_uniform(rng, out_dim, unit_dim), true)?,
                bias: store.add("scomp.scnn.b", Tensor::zeros(&[out_dim]), true)?,
                boundary: store.add(
                    "scomp.scnn.boundary",
                    Tensor::vector(embedding_uniform(rng, 1, unit_dim).into_data()),
                    true,
                )?,
            }),
            CompositionKind::Sconcate => Composer::Sconcate(Sconcate {
                weight: store.add(
                    "scomp.sconcate.w",
                    glorot_uniform(rng, out_dim, max_len * unit_dim),
                    true,
                )?,
                bias: store.add("scomp.sconcate.b", Tensor::zeros(&[out_dim]), true)?,
                padding: store.add(
                    "scomp.sconcate.pad",
                    Tensor::vector(embedding_uniform(rng, 1, unit_dim).into_data()),
                    true,
                )?,
                max_len,
            }),
        })
    }

    pub fn kind(&self) -> CompositionKind {
        match self {
            Composer::Srnn(_) => CompositionKind::Srnn,
            Composer::Scnn(_) => CompositionKind::Scnn,
            Composer::Sconcate(_) => CompositionKind::Sconcate,
        }
    }

    /// Representation of one segment `H_u..H_v`.
    pub fn compose(&self, g: &mut Graph<'_>, slice: &[NodeId]) -> Result<NodeId> {
        if slice.is_empty() {
            return Err(precondition("cannot compose an empty segment"));
        }
        match self {
            Composer::Srnn(c) => c.compose(g, slice),
            Composer::Scnn(c) => c.compose(g, slice),
            Composer::Sconcate(c) => c.compose(g, slice),
        }
    }

    /// Every span of `units` with length `1..=max_len`.
    pub fn compose_all(&self, g: &mut Graph<'_>, units: &[NodeId], max_len: usize) -> Result<SpanTable> {
        if let Composer::Sconcate(c) = self {
            if max_len > c.max_len {
                return Err(precondition(format!(
                    "segments up to length {max_len} exceed the padding length {}",
                    c.max_len
                )));
            }
        }
        let mut table = SpanTable::new(units.len(), max_len);
        match self {
            Composer::Srnn(c) => c.compose_all(g, units, &mut table)?,
            Composer::Scnn(c) => c.compose_all(g, units, &mut table)?,
            Composer::Sconcate(c) => {
                for start in 0..units.len() {
                    for len in 1..=max_len.min(units.len() - start) {
                        let node = c.compose(g, &units[start..start + len])?;
                        table.set(start, len, node);
                    }
                }
            }
        }
        Ok(table)
    }
}

impl Srnn {
    fn merge(&self, g: &mut Graph<'_>, fwd: NodeId, bwd: NodeId) -> Result<NodeId> {
        let wf = g.param(self.w_forward)?;
        let wb = g.param(self.w_backward)?;
        let b = g.param(self.bias)?;
        let a = g.matvec(wf, fwd)?;
        let c = g.matvec(wb, bwd)?;
        let z = g.add(&[a, c, b])?;
        Ok(g.relu(z))
    }

    fn compose(&self, g: &mut Graph<'_>, slice: &[NodeId]) -> Result<NodeId> {
        let fwd = self.forward.run(g, slice.iter().copied())?;
        let bwd = self.backward.run(g, slice.iter().rev().copied())?;
        self.merge(g, fwd[fwd.len() - 1], bwd[bwd.len() - 1])
    }

    fn compose_all(&self, g: &mut Graph<'_>, units: &[NodeId], table: &mut SpanTable) -> Result<()> {
        let n = units.len();
        let l_max = table.max_len;
        // forward states of spans starting at `start`, indexed by length - 1
        let mut fwd: Vec<Vec<NodeId>> = Vec::with_capacity(n);
        for start in 0..n {
            let end = (start + l_max).min(n);
            fwd.push(self.forward.run(g, units[start..end].iter().copied())?);
        }
        // backward states of spans ending at `end`, indexed by length - 1
        let mut bwd: Vec<Vec<NodeId>> = vec![Vec::new(); n + 1];
        for end in 1..=n {
            let start = end.saturating_sub(l_max);
            bwd[end] = self.backward.run(g, units[start..end].iter().rev().copied())?;
        }
        for start in 0..n {
            for len in 1..=l_max.min(n - start) {
                let node = self.merge(g, fwd[start][len - 1], bwd[start + len][len - 1])?;
                table.set(start, len, node);
            }
        }
        Ok(())
    }
}

impl Scnn {
    fn window(&self, g: &mut Graph<'_>, left: NodeId, right: NodeId) -> Result<NodeId> {
        let b = g.param(self.bias)?;
        let z = g.add(&[left, right, b])?;
        Ok(g.relu(z))
    }

    fn projections(&self, g: &mut Graph<'_>, slice: &[NodeId]) -> Result<(Vec<NodeId>, Vec<NodeId>, NodeId)> {
        let wl = g.param(self.w_left)?;
        let wr = g.param(self.w_right)?;
        let pad = g.param(self.boundary)?;
        let left = slice.iter().map(|&h| g.matvec(wl, h)).collect::<Result<Vec<_>>>()?;
        let right = slice.iter().map(|&h| g.matvec(wr, h)).collect::<Result<Vec<_>>>()?;
        let pad_right = g.matvec(wr, pad)?;
        Ok((left, right, pad_right))
    }

    fn compose(&self, g: &mut Graph<'_>, slice: &[NodeId]) -> Result<NodeId> {
        let (left, right, pad_right) = self.projections(g, slice)?;
        if slice.len() == 1 {
            return self.window(g, left[0], pad_right);
        }
        let mut pooled = self.window(g, left[0], right[1])?;
        for t in 1..slice.len() - 1 {
            let w = self.window(g, left[t], right[t + 1])?;
            pooled = g.max(pooled, w)?;
        }
        Ok(pooled)
    }

    fn compose_all(&self, g: &mut Graph<'_>, units: &[NodeId], table: &mut SpanTable) -> Result<()> {
        let n = units.len();
        let (left, right, pad_right) = self.projections(g, units)?;
        let windows = (0..n.saturating_sub(1))
            .map(|t| self.window(g, left[t], right[t + 1]))
            .collect::<Result<Vec<_>>>()?;
        for start in 0..n {
            let single = self.window(g, left[start], pad_right)?;
            table.set(start, 1, single);
            let mut pooled = None;
            for len in 2..=table.max_len.min(n - start) {
                let w = windows[start + len - 2];
                let node = match pooled {
                    None => w,
                    Some(p) => g.max(p, w)?,
                };
                pooled = Some(node);
                table.set(start, len, node);
            }
        }
        Ok(())
    }
}

impl Sconcate {
    fn compose(&self, g: &mut Graph<'_>, slice: &[NodeId]) -> Result<NodeId> {
        if slice.len() > self.max_len {
            return Err(precondition(format!(
                "segment of length {} exceeds the maximum length {}",
                slice.len(),
                self.max_len
            )));
        }
        let pad = g.param(self.padding)?;
        let mut parts = slice.to_vec();
        parts.resize(self.max_len, pad);
        let x = g.concat(&parts)?;
        let w = g.param(self.weight)?;
        let b = g.param(self.bias)?;
        let y = g.matvec(w, x)?;
        let z = g.add(&[y, b])?;
        Ok(g.relu(z))
    }
}
