//! Define-by-run reverse-mode automatic differentiation.
//!
//! A [`Graph`] records every operation of one forward pass in creation
//! order, which is also a topological order: an operation can only refer to
//! nodes that already exist. [`Graph::backward`] walks the record in reverse.
//! Parameters are borrowed from a [`ParamStore`] and never copied; their
//! gradients are handed to a [`Gradients`] buffer by
//! [`Graph::accumulate_into`].

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::precondition;
use crate::params::{Gradients, ParamId, ParamStore};
use crate::{Error, Result, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    Row { param: ParamId, row: usize },
    MatVec(NodeId, NodeId),
    Sum(Vec<NodeId>),
    Concat(Vec<NodeId>),
    Slice { input: NodeId, start: usize },
    Relu(NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Max(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Dot(NodeId, NodeId),
    Total(NodeId),
    LogSumExp(Vec<NodeId>),
}

impl Op {
    fn inputs(&self) -> Vec<NodeId> {
        match self {
            Op::Leaf | Op::Param(_) | Op::Row { .. } => Vec::new(),
            Op::MatVec(a, b) | Op::Max(a, b) | Op::Mul(a, b) | Op::Dot(a, b) => vec![*a, *b],
            Op::Sum(xs) | Op::Concat(xs) | Op::LogSumExp(xs) => xs.clone(),
            Op::Slice { input, .. }
            | Op::Relu(input)
            | Op::Tanh(input)
            | Op::Sigmoid(input)
            | Op::Scale(input, _)
            | Op::Total(input) => vec![*input],
        }
    }
}

enum Value<'p> {
    Owned(Tensor),
    Borrowed(&'p Tensor),
}

impl Value<'_> {
    fn get(&self) -> &Tensor {
        match self {
            Value::Owned(t) => t,
            Value::Borrowed(t) => t,
        }
    }
}

struct Node<'p> {
    value: Value<'p>,
    op: Op,
    needs_grad: bool,
}

/// One forward pass worth of recorded operations (the tape).
pub struct Graph<'p> {
    store: Option<&'p ParamStore>,
    nodes: Vec<Node<'p>>,
    grads: Vec<Option<Vec<f64>>>,
    param_nodes: BTreeMap<ParamId, NodeId>,
    track: bool,
}

impl Default for Graph<'_> {
    fn default() -> Self {
        Self::new()
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// `m + ln sum exp(x - m)` with `m = max x`.
pub fn logsumexp_values(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m.is_infinite() {
        return m;
    }
    m + libm::log(xs.iter().map(|x| libm::exp(x - m)).sum::<f64>())
}

impl<'p> Graph<'p> {
    /// A graph without parameters, for standalone computations.
    pub fn new() -> Self {
        Self {
            store: None,
            nodes: Vec::new(),
            grads: Vec::new(),
            param_nodes: BTreeMap::new(),
            track: true,
        }
    }

    pub fn with_params(store: &'p ParamStore) -> Self {
        Self {
            store: Some(store),
            ..Self::new()
        }
    }

    /// A graph that records values only; `backward` becomes a no-op.
    pub fn inference(store: &'p ParamStore) -> Self {
        Self {
            track: false,
            ..Self::with_params(store)
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        self.nodes[id.0].value.get()
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.value(id).data()[0]
    }

    /// Gradient of the last `backward` loss with respect to a node.
    pub fn grad(&self, id: NodeId) -> Option<&[f64]> {
        self.grads.get(id.0).and_then(|g| g.as_deref())
    }

    /// Nodes an operation reads from. Always earlier in the tape.
    pub fn inputs_of(&self, id: NodeId) -> Vec<NodeId> {
        self.nodes[id.0].op.inputs()
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        debug_assert!(value.is_finite() || !value.data().iter().any(|x| x.is_nan()));
        let needs_grad = self.track && op.inputs().iter().any(|i| self.nodes[i.0].needs_grad);
        self.nodes.push(Node {
            value: Value::Owned(value),
            op,
            needs_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn store(&self) -> Result<&'p ParamStore> {
        self.store
            .ok_or_else(|| precondition("graph has no parameter store"))
    }

    /// A leaf that does not receive gradients.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.nodes.push(Node {
            value: Value::Owned(value),
            op: Op::Leaf,
            needs_grad: false,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// A leaf whose gradient is kept after `backward`.
    pub fn variable(&mut self, value: Tensor) -> NodeId {
        let track = self.track;
        self.nodes.push(Node {
            value: Value::Owned(value),
            op: Op::Leaf,
            needs_grad: track,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// The node for a whole parameter; created once per graph.
    pub fn param(&mut self, id: ParamId) -> Result<NodeId> {
        if let Some(&n) = self.param_nodes.get(&id) {
            return Ok(n);
        }
        let store = self.store()?;
        let p = store.get(id);
        self.nodes.push(Node {
            value: Value::Borrowed(&p.value),
            op: Op::Param(id),
            needs_grad: self.track && p.trainable,
        });
        let n = NodeId(self.nodes.len() - 1);
        self.param_nodes.insert(id, n);
        Ok(n)
    }

    /// One row of a matrix parameter (embedding lookup).
    pub fn row(&mut self, id: ParamId, row: usize) -> Result<NodeId> {
        let store = self.store()?;
        let p = store.get(id);
        if row >= p.value.rows() {
            return Err(Error::Dimension {
                op: "row",
                left: p.value.shape().to_vec(),
                right: vec![row],
            });
        }
        self.nodes.push(Node {
            value: Value::Owned(Tensor::vector(p.value.row(row).to_vec())),
            op: Op::Row { param: id, row },
            needs_grad: self.track && p.trainable,
        });
        Ok(NodeId(self.nodes.len() - 1))
    }

    fn dim_err(&self, op: &'static str, a: NodeId, b: NodeId) -> Error {
        Error::Dimension {
            op,
            left: self.value(a).shape().to_vec(),
            right: self.value(b).shape().to_vec(),
        }
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(self.dim_err(op, a, b));
        }
        Ok(())
    }

    /// Matrix-vector product `W x`.
    pub fn matvec(&mut self, w: NodeId, x: NodeId) -> Result<NodeId> {
        let (wv, xv) = (self.value(w), self.value(x));
        if wv.rank() != 2 || xv.rank() != 1 || wv.cols() != xv.len() {
            return Err(self.dim_err("matvec", w, x));
        }
        let n = wv.cols();
        let xs = xv.data();
        let out: Vec<f64> = wv
            .data()
            .chunks_exact(n)
            .map(|row| row.iter().zip(xs).map(|(a, b)| a * b).sum())
            .collect();
        Ok(self.push(Tensor::vector(out), Op::MatVec(w, x)))
    }

    /// Elementwise sum of one or more equally shaped nodes.
    pub fn add(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        let first = *xs.first().ok_or_else(|| precondition("add of no operands"))?;
        let mut out = self.value(first).clone();
        for &x in &xs[1..] {
            self.same_shape("add", first, x)?;
            for (o, v) in out.data_mut().iter_mut().zip(self.value(x).data()) {
                *o += v;
            }
        }
        Ok(self.push(out, Op::Sum(xs.to_vec())))
    }

    /// Concatenation of vectors.
    pub fn concat(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        if xs.is_empty() {
            return Err(precondition("concat of no operands"));
        }
        let mut out = Vec::new();
        for &x in xs {
            let v = self.value(x);
            if v.rank() != 1 {
                return Err(self.dim_err("concat", xs[0], x));
            }
            out.extend_from_slice(v.data());
        }
        Ok(self.push(Tensor::vector(out), Op::Concat(xs.to_vec())))
    }

    /// `x[start..start + len]` of a vector.
    pub fn slice(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let v = self.value(x);
        if v.rank() != 1 || len == 0 || start + len > v.len() {
            return Err(Error::Dimension {
                op: "slice",
                left: v.shape().to_vec(),
                right: vec![start, len],
            });
        }
        let out = Tensor::vector(v.data()[start..start + len].to_vec());
        Ok(self.push(out, Op::Slice { input: x, start }))
    }

    fn map(&mut self, x: NodeId, f: impl Fn(f64) -> f64, op: Op) -> NodeId {
        let mut out = self.value(x).clone();
        out.data_mut().iter_mut().for_each(|v| *v = f(*v));
        self.push(out, op)
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        self.map(x, |v| if v > 0.0 { v } else { 0.0 }, Op::Relu(x))
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        self.map(x, libm::tanh, Op::Tanh(x))
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        self.map(x, sigmoid, Op::Sigmoid(x))
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        self.map(x, |v| c * v, Op::Scale(x, c))
    }

    fn zip(&mut self, name: &'static str, a: NodeId, b: NodeId, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<NodeId> {
        self.same_shape(name, a, b)?;
        let out: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| f(*x, *y))
            .collect();
        let shape = self.value(a).shape().to_vec();
        Ok(self.push(Tensor::new(shape, out)?, op))
    }

    /// Elementwise maximum. Ties send the gradient to `a`.
    pub fn max(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip("max", a, b, f64::max, Op::Max(a, b))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// Inner product of two vectors, as a scalar node.
    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("dot", a, b)?;
        let s = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .sum();
        Ok(self.push(Tensor::scalar(s), Op::Dot(a, b)))
    }

    /// Sum of all entries, as a scalar node.
    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let s = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Total(x))
    }

    /// Numerically stable `log sum exp` over scalar nodes.
    pub fn logsumexp(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        if xs.is_empty() {
            return Err(precondition("logsumexp of an empty list"));
        }
        let mut vals = Vec::with_capacity(xs.len());
        for &x in xs {
            let v = self.value(x);
            if !v.is_scalar() {
                return Err(Error::Dimension {
                    op: "logsumexp",
                    left: v.shape().to_vec(),
                    right: vec![1],
                });
            }
            vals.push(v.data()[0]);
        }
        let out = logsumexp_values(&vals);
        Ok(self.push(Tensor::scalar(out), Op::LogSumExp(xs.to_vec())))
    }

    /// Back-propagates from a scalar loss. Gradients from earlier calls are
    /// discarded.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if !self.value(loss).is_scalar() {
            return Err(precondition("backward needs a scalar loss"));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if self.nodes[i].needs_grad {
                self.propagate(i, &g, &mut grads);
            }
            grads[i] = Some(g);
        }
        self.grads = grads;
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        let val = |id: NodeId| nodes[id.0].value.get().data();
        let mut acc = |id: NodeId, f: &mut dyn FnMut(&mut [f64])| {
            if !nodes[id.0].needs_grad {
                return;
            }
            let slot = grads[id.0].get_or_insert_with(|| vec![0.0; nodes[id.0].value.get().len()]);
            f(slot);
        };
        match &nodes[i].op {
            Op::Leaf | Op::Param(_) | Op::Row { .. } => {}
            Op::MatVec(w, x) => {
                let n = nodes[w.0].value.get().cols();
                let (wv, xv) = (val(*w), val(*x));
                acc(*w, &mut |gw| {
                    for (r, gr) in g.iter().enumerate() {
                        if *gr != 0.0 {
                            for (d, xj) in gw[r * n..(r + 1) * n].iter_mut().zip(xv) {
                                *d += gr * xj;
                            }
                        }
                    }
                });
                acc(*x, &mut |gx| {
                    for (r, gr) in g.iter().enumerate() {
                        if *gr != 0.0 {
                            for (d, wj) in gx.iter_mut().zip(&wv[r * n..(r + 1) * n]) {
                                *d += gr * wj;
                            }
                        }
                    }
                });
            }
            Op::Sum(xs) => {
                for x in xs {
                    acc(*x, &mut |gx| gx.iter_mut().zip(g).for_each(|(d, s)| *d += s));
                }
            }
            Op::Concat(xs) => {
                let mut offset = 0;
                for x in xs {
                    let len = nodes[x.0].value.get().len();
                    let part = &g[offset..offset + len];
                    acc(*x, &mut |gx| gx.iter_mut().zip(part).for_each(|(d, s)| *d += s));
                    offset += len;
                }
            }
            Op::Slice { input, start } => {
                let start = *start;
                acc(*input, &mut |gx| {
                    gx[start..start + g.len()].iter_mut().zip(g).for_each(|(d, s)| *d += s)
                });
            }
            Op::Relu(x) => {
                let xv = val(*x);
                acc(*x, &mut |gx| {
                    for ((d, s), v) in gx.iter_mut().zip(g).zip(xv) {
                        if *v > 0.0 {
                            *d += s;
                        }
                    }
                });
            }
            Op::Tanh(x) => {
                let out = nodes[i].value.get().data();
                acc(*x, &mut |gx| {
                    for ((d, s), y) in gx.iter_mut().zip(g).zip(out) {
                        *d += s * (1.0 - y * y);
                    }
                });
            }
            Op::Sigmoid(x) => {
                let out = nodes[i].value.get().data();
                acc(*x, &mut |gx| {
                    for ((d, s), y) in gx.iter_mut().zip(g).zip(out) {
                        *d += s * y * (1.0 - y);
                    }
                });
            }
            Op::Scale(x, c) => {
                acc(*x, &mut |gx| gx.iter_mut().zip(g).for_each(|(d, s)| *d += c * s));
            }
            Op::Max(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                acc(*a, &mut |ga| {
                    for (k, d) in ga.iter_mut().enumerate() {
                        if av[k] >= bv[k] {
                            *d += g[k];
                        }
                    }
                });
                acc(*b, &mut |gb| {
                    for (k, d) in gb.iter_mut().enumerate() {
                        if av[k] < bv[k] {
                            *d += g[k];
                        }
                    }
                });
            }
            Op::Mul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                acc(*a, &mut |ga| {
                    for ((d, s), y) in ga.iter_mut().zip(g).zip(bv) {
                        *d += s * y;
                    }
                });
                acc(*b, &mut |gb| {
                    for ((d, s), y) in gb.iter_mut().zip(g).zip(av) {
                        *d += s * y;
                    }
                });
            }
            Op::Dot(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                let s = g[0];
                acc(*a, &mut |ga| ga.iter_mut().zip(bv).for_each(|(d, y)| *d += s * y));
                acc(*b, &mut |gb| gb.iter_mut().zip(av).for_each(|(d, y)| *d += s * y));
            }
            Op::Total(x) => {
                let s = g[0];
                acc(*x, &mut |gx| gx.iter_mut().for_each(|d| *d += s));
            }
            Op::LogSumExp(xs) => {
                let out = nodes[i].value.get().data()[0];
                let s = g[0];
                for x in xs {
                    let w = libm::exp(val(*x)[0] - out);
                    acc(*x, &mut |gx| gx[0] += s * w);
                }
            }
        }
    }

    /// Adds parameter gradients from the last `backward` into `grads`.
    pub fn accumulate_into(&self, grads: &mut Gradients) -> Result<()> {
        let Some(store) = self.store else {
            return Ok(());
        };
        for (node, g) in self.nodes.iter().zip(&self.grads) {
            let Some(g) = g else { continue };
            match node.op {
                Op::Param(id) => grads.add_dense(store, id, g),
                Op::Row { param, row } => grads.add_row(store, param, row, g),
                _ => {}
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Tensor {
        Tensor::vector(xs.to_vec())
    }

    #[test]
    fn matvec_examples() {
        let mut g = Graph::new();
        let eye = g.constant(Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let x = g.constant(v(&[3.0, 4.0]));
        let y = g.matvec(eye, x).unwrap();
        assert_eq!(g.value(y).data(), &[3.0, 4.0]);
        let zero = g.constant(Tensor::zeros(&[2, 2]));
        let y = g.matvec(zero, x).unwrap();
        assert_eq!(g.value(y).data(), &[0.0, 0.0]);
        let w = g.constant(Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let ones = g.constant(v(&[1.0, 1.0]));
        let y = g.matvec(w, ones).unwrap();
        assert_eq!(g.value(y).data(), &[3.0, 7.0]);
    }

    #[test]
    fn matvec_shape_error_names_both_shapes() {
        let mut g = Graph::new();
        let w = g.constant(Tensor::zeros(&[2, 3]));
        let x = g.constant(v(&[1.0, 2.0]));
        match g.matvec(w, x) {
            Err(Error::Dimension { left, right, .. }) => {
                assert_eq!(left, vec![2, 3]);
                assert_eq!(right, vec![2]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn elementwise_definitions() {
        let mut g = Graph::new();
        let x = g.constant(v(&[-1.0, 0.0, 2.0]));
        let r = g.relu(x);
        assert_eq!(g.value(r).data(), &[0.0, 0.0, 2.0]);
        let a = g.constant(v(&[1.0, 2.0]));
        let b = g.constant(v(&[3.0]));
        let c = g.concat(&[a, b]).unwrap();
        assert_eq!(g.value(c).data(), &[1.0, 2.0, 3.0]);
        let p = g.constant(v(&[1.0, 5.0]));
        let q = g.constant(v(&[4.0, 2.0]));
        let m = g.max(p, q).unwrap();
        assert_eq!(g.value(m).data(), &[4.0, 5.0]);
        assert!(g.add(&[a, b]).is_err());
        assert!(g.mul(a, b).is_err());
    }

    #[test]
    fn logsumexp_examples() {
        let mut g = Graph::new();
        let z = g.constant(Tensor::scalar(0.0));
        let l = g.logsumexp(&[z, z]).unwrap();
        assert!((g.scalar(l) - core::f64::consts::LN_2).abs() < 1e-15);
        let x = g.constant(Tensor::scalar(-3.25));
        let l = g.logsumexp(&[x]).unwrap();
        assert_eq!(g.scalar(l), -3.25);
        assert!(g.logsumexp(&[]).is_err());
        // no overflow for large inputs
        assert!((logsumexp_values(&[1234.0, 1232.0]) - 1234.126928011042972496444).abs() < 1e-9);
    }

    #[test]
    fn backward_linear_and_dead_relu() {
        let mut g = Graph::new();
        let x = g.variable(v(&[0.5, -2.0, 3.0]));
        let s = g.sum(x);
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[1.0, 1.0, 1.0]);
        assert_eq!(g.grad(s).unwrap(), &[1.0]);

        let mut g = Graph::new();
        let x = g.variable(v(&[0.5, 2.0]));
        let nx = g.scale(x, -1.0);
        let r = g.relu(nx);
        let s = g.sum(r);
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[0.0, 0.0]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut g = Graph::new();
        let x = g.variable(v(&[1.0, 2.0]));
        assert!(g.backward(x).is_err());
    }

    #[test]
    fn shared_nodes_accumulate() {
        let mut g = Graph::new();
        let x = g.variable(v(&[0.3, -0.7]));
        let t = g.tanh(x);
        let f = g.sum(t);
        let twice = g.add(&[f, f]).unwrap();
        g.backward(twice).unwrap();
        let double = g.grad(x).unwrap().to_vec();
        g.backward(f).unwrap();
        let single = g.grad(x).unwrap();
        for (d, s) in double.iter().zip(single) {
            assert_eq!(*d, 2.0 * s);
        }
    }

    #[test]
    fn tape_order_is_topological() {
        let mut g = Graph::new();
        let a = g.variable(v(&[1.0, 2.0]));
        let b = g.sigmoid(a);
        let c = g.mul(a, b).unwrap();
        let d = g.dot(c, b).unwrap();
        let _ = g.logsumexp(&[d, d]).unwrap();
        for i in 0..g.len() {
            for p in g.inputs_of(NodeId(i)) {
                assert!(p.0 < i);
            }
        }
    }

    #[test]
    fn frozen_params_get_no_gradient() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::matrix(1, 2, vec![1.0, 2.0]).unwrap(), false).unwrap();
        let mut g = Graph::with_params(&store);
        let wn = g.param(w).unwrap();
        let x = g.variable(v(&[1.0, 1.0]));
        let y = g.matvec(wn, x).unwrap();
        let s = g.sum(y);
        g.backward(s).unwrap();
        assert!(g.grad(wn).is_none());
        assert_eq!(g.grad(x).unwrap(), &[1.0, 2.0]);
    }
}
