//! Named parameters, gradient buffers and the plain SGD update.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::{Error, Result, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    /// Frozen parameters are never touched by [`ParamStore::sgd_step`].
    pub trainable: bool,
}

/// Owns every parameter of a model, addressed by [`ParamId`] or by name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Parameter>,
    by_name: BTreeMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor, trainable: bool) -> Result<ParamId> {
        let name = name.into();
        if !value.is_finite() {
            return Err(Error::Config(alloc::format!("parameter {name} has non-finite values")));
        }
        if self.by_name.contains_key(&name) {
            return Err(Error::Config(alloc::format!("duplicate parameter name {name}")));
        }
        let id = ParamId(self.params.len());
        self.by_name.insert(name.clone(), id);
        self.params.push(Parameter { name, value, trainable });
        Ok(id)
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn set_trainable(&mut self, id: ParamId, trainable: bool) {
        self.params[id.0].trainable = trainable;
    }

    /// Total number of scalar entries in trainable parameters.
    pub fn trainable_size(&self) -> usize {
        self.params.iter().filter(|p| p.trainable).map(|p| p.value.len()).sum()
    }

    /// Plain SGD: `theta -= lr * grad` for every trainable parameter that
    /// received a gradient. Only touched rows of row-sparse gradients move.
    pub fn sgd_step(&mut self, grads: &Gradients, lr: f64) {
        for (i, slot) in grads.slots.iter().enumerate() {
            let Some(g) = slot else { continue };
            let param = &mut self.params[i];
            if !param.trainable {
                continue;
            }
            let cols = param.value.cols();
            let data = param.value.data_mut();
            if g.dense {
                for (w, d) in data.iter_mut().zip(&g.data) {
                    *w -= lr * d;
                }
            } else {
                for &r in &g.rows {
                    let span = r * cols..(r + 1) * cols;
                    for (w, d) in data[span.clone()].iter_mut().zip(&g.data[span]) {
                        *w -= lr * d;
                    }
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
struct ParamGrad {
    data: Vec<f64>,
    /// Whole-tensor gradient; otherwise only `rows` are non-zero.
    dense: bool,
    rows: BTreeSet<usize>,
}

/// Gradient buffers for a [`ParamStore`], filled by
/// [`Graph::accumulate_into`](crate::Graph::accumulate_into).
///
/// Embedding tables receive row-sparse gradients so that clearing, clipping
/// and updating cost is proportional to the rows actually used.
#[derive(Clone, Debug, Default)]
pub struct Gradients {
    slots: Vec<Option<ParamGrad>>,
}

impl Gradients {
    pub fn new() -> Self {
        Self::default()
    }

    fn slot(&mut self, store: &ParamStore, id: ParamId) -> &mut ParamGrad {
        if self.slots.len() <= id.0 {
            self.slots.resize(id.0 + 1, None);
        }
        self.slots[id.0].get_or_insert_with(|| ParamGrad {
            data: vec![0.0; store.value(id).len()],
            dense: false,
            rows: BTreeSet::new(),
        })
    }

    pub(crate) fn add_dense(&mut self, store: &ParamStore, id: ParamId, grad: &[f64]) {
        let slot = self.slot(store, id);
        slot.dense = true;
        for (a, b) in slot.data.iter_mut().zip(grad) {
            *a += b;
        }
    }

    pub(crate) fn add_row(&mut self, store: &ParamStore, id: ParamId, row: usize, grad: &[f64]) {
        let cols = store.value(id).cols();
        let slot = self.slot(store, id);
        slot.rows.insert(row);
        for (a, b) in slot.data[row * cols..(row + 1) * cols].iter_mut().zip(grad) {
            *a += b;
        }
    }

    /// Gradient of one parameter as a flat row-major slice, if any was recorded.
    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.slots.get(id.0).and_then(|s| s.as_ref()).map(|s| s.data.as_slice())
    }

    fn visit_mut(&mut self, store: &ParamStore, mut f: impl FnMut(&mut f64)) {
        for (i, slot) in self.slots.iter_mut().enumerate() {
            let Some(g) = slot else { continue };
            if g.dense {
                g.data.iter_mut().for_each(&mut f);
            } else {
                let cols = store.params[i].value.cols();
                for &r in &g.rows {
                    g.data[r * cols..(r + 1) * cols].iter_mut().for_each(&mut f);
                }
            }
        }
    }

    /// Euclidean norm over gradients of trainable parameters.
    pub fn norm(&self, store: &ParamStore) -> f64 {
        let mut sum = 0.0;
        for (i, slot) in self.slots.iter().enumerate() {
            let Some(g) = slot else { continue };
            if !store.params[i].trainable {
                continue;
            }
            if g.dense {
                sum += g.data.iter().map(|x| x * x).sum::<f64>();
            } else {
                let cols = store.params[i].value.cols();
                for &r in &g.rows {
                    sum += g.data[r * cols..(r + 1) * cols].iter().map(|x| x * x).sum::<f64>();
                }
            }
        }
        libm::sqrt(sum)
    }

    /// Rescales so the global norm is at most `max_norm`. Returns the norm
    /// before clipping.
    pub fn clip_norm(&mut self, store: &ParamStore, max_norm: f64) -> f64 {
        let norm = self.norm(store);
        if norm > max_norm && norm > 0.0 {
            let scale = max_norm / norm;
            self.visit_mut(store, |x| *x *= scale);
        }
        norm
    }

    /// Resets all buffers to zero while keeping their allocations.
    pub fn zero(&mut self, store: &ParamStore) {
        self.visit_mut(store, |x| *x = 0.0);
        for g in self.slots.iter_mut().flatten() {
            g.dense = false;
            g.rows.clear();
        }
    }
}

/// Glorot/Xavier uniform initialisation, `U(-a, a)` with
/// `a = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<R: Rng + ?Sized>(rng: &mut R, fan_out: usize, fan_in: usize) -> Tensor {
    let bound = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
    let data = (0..fan_out * fan_in).map(|_| rng.gen_range(-bound..bound)).collect();
    if fan_in == 1 {
        Tensor::vector(data)
    } else {
        Tensor::matrix(fan_out, fan_in, data).expect("positive dims")
    }
}

/// Embedding rows: each row initialised as a `1 -> dim` Glorot map.
pub fn embedding_uniform<R: Rng + ?Sized>(rng: &mut R, rows: usize, dim: usize) -> Tensor {
    let bound = libm::sqrt(6.0 / (1 + dim) as f64);
    let data = (0..rows * dim).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::matrix(rows, dim, data).expect("positive dims")
}

/// 64-bit FNV-1a over the exact bit patterns of a tensor.
pub fn checksum(t: &Tensor) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for x in t.data() {
        for b in x.to_bits().to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}
