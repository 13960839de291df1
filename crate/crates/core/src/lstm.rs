//! Standard LSTM cell with a forget gate and no peepholes.
//!
//! Gate pre-activations are computed jointly as `W_x x + W_h h + b`, a
//! `4k` vector laid out as input, forget, output and candidate blocks.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::params::glorot_uniform;
use crate::{Error, Graph, NodeId, ParamId, ParamStore, Result, Tensor};

#[derive(Clone, Debug)]
pub struct Lstm {
    input_dim: usize,
    hidden_dim: usize,
    w_x: ParamId,
    w_h: ParamId,
    bias: ParamId,
}

impl Lstm {
    /// Registers `{prefix}.w_x`, `{prefix}.w_h` and `{prefix}.b`.
    ///
    /// Weights are Glorot-uniform over the gate block they feed; the forget
    /// gate bias starts at 1.
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 {
            return Err(Error::Config(format!("{prefix}: LSTM dimensions must be positive")));
        }
        let k = hidden_dim;
        let mut wx = Vec::with_capacity(4 * k * input_dim);
        let mut wh = Vec::with_capacity(4 * k * k);
        for _ in 0..4 {
            wx.extend(glorot_uniform(rng, k, input_dim).into_data());
            wh.extend(glorot_uniform(rng, k, k).into_data());
        }
        let mut b = alloc::vec![0.0; 4 * k];
        b[k..2 * k].iter_mut().for_each(|x| *x = 1.0);
        let w_x = store.add(format!("{prefix}.w_x"), Tensor::matrix(4 * k, input_dim, wx)?, true)?;
        let w_h = store.add(format!("{prefix}.w_h"), Tensor::matrix(4 * k, k, wh)?, true)?;
        let bias = store.add(format!("{prefix}.b"), Tensor::vector(b), true)?;
        Ok(Self {
            input_dim,
            hidden_dim,
            w_x,
            w_h,
            bias,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn param_ids(&self) -> [ParamId; 3] {
        [self.w_x, self.w_h, self.bias]
    }

    /// Zero `(h, c)`.
    pub fn zero_state(&self, g: &mut Graph<'_>) -> (NodeId, NodeId) {
        let h = g.constant(Tensor::zeros(&[self.hidden_dim]));
        let c = g.constant(Tensor::zeros(&[self.hidden_dim]));
        (h, c)
    }

    /// One step: returns `(h, c)`.
    pub fn step(&self, g: &mut Graph<'_>, x: NodeId, h_prev: NodeId, c_prev: NodeId) -> Result<(NodeId, NodeId)> {
        let k = self.hidden_dim;
        let w_x = g.param(self.w_x)?;
        let w_h = g.param(self.w_h)?;
        let b = g.param(self.bias)?;
        let zx = g.matvec(w_x, x)?;
        let zh = g.matvec(w_h, h_prev)?;
        let z = g.add(&[zx, zh, b])?;
        let i_pre = g.slice(z, 0, k)?;
        let f_pre = g.slice(z, k, k)?;
        let o_pre = g.slice(z, 2 * k, k)?;
        let g_pre = g.slice(z, 3 * k, k)?;
        let i = g.sigmoid(i_pre);
        let f = g.sigmoid(f_pre);
        let o = g.sigmoid(o_pre);
        let cand = g.tanh(g_pre);
        let keep = g.mul(f, c_prev)?;
        let write = g.mul(i, cand)?;
        let c = g.add(&[keep, write])?;
        let tc = g.tanh(c);
        let h = g.mul(o, tc)?;
        Ok((h, c))
    }

    /// Runs over `inputs` from zero state; returns the hidden state after
    /// each input.
    pub fn run(&self, g: &mut Graph<'_>, inputs: impl IntoIterator<Item = NodeId>) -> Result<Vec<NodeId>> {
        let (mut h, mut c) = self.zero_state(g);
        let mut out = Vec::new();
        for x in inputs {
            (h, c) = self.step(g, x, h, c)?;
            out.push(h);
        }
        Ok(out)
    }
}
