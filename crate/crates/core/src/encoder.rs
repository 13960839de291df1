//! Input unit representation and the bi-LSTM encoder.
//!
//! `I_i = relu(W_p e^p_i + W_t e^t_i + b)` merges a frozen pretrained
//! embedding with a fine-tuned one, and
//! `H_i = relu(W_f h^fwd_i + W_b h^bwd_i + b')` merges the two LSTM
//! directions. Each bracketed operand has its own matrix.

use alloc::vec::Vec;

use rand::Rng;

use crate::embedding::{BoundTable, EmbeddingTable};
use crate::error::precondition;
use crate::lstm::Lstm;
use crate::params::glorot_uniform;
use crate::{Error, Graph, NodeId, ParamId, ParamStore, Result, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncoderDims {
    pub unit_pretrained: usize,
    pub unit_tuned: usize,
    pub input: usize,
    pub hidden: usize,
}

#[derive(Clone, Debug)]
pub struct Encoder {
    pretrained: BoundTable,
    tuned: BoundTable,
    w_pretrained: ParamId,
    w_tuned: ParamId,
    b_input: ParamId,
    forward: Lstm,
    backward: Lstm,
    w_forward: ParamId,
    w_backward: ParamId,
    b_hidden: ParamId,
    dims: EncoderDims,
}

/// Graph nodes produced by [`Encoder::encode`], one per token in each list.
#[derive(Clone, Debug)]
pub struct EncodedSequence {
    pub inputs: Vec<NodeId>,
    pub forward: Vec<NodeId>,
    pub backward: Vec<NodeId>,
    /// Final unit representations `H_i`.
    pub units: Vec<NodeId>,
}

impl Encoder {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        rng: &mut R,
        dims: EncoderDims,
        pretrained: EmbeddingTable,
        tuned: EmbeddingTable,
    ) -> Result<Self> {
        if pretrained.dim() != dims.unit_pretrained {
            return Err(Error::Config(alloc::format!(
                "pretrained unit embeddings have dimension {}, configured {}",
                pretrained.dim(),
                dims.unit_pretrained
            )));
        }
        if tuned.dim() != dims.unit_tuned {
            return Err(Error::Config(alloc::format!(
                "tuned unit embeddings have dimension {}, configured {}",
                tuned.dim(),
                dims.unit_tuned
            )));
        }
        let pretrained = BoundTable::register(store, "emb.unit_pretrained", pretrained)?;
        let tuned = BoundTable::register(store, "emb.unit_tuned", tuned)?;
        let w_pretrained = store.add(
            "input.w_pretrained",
            glorot_uniform(rng, dims.input, dims.unit_pretrained),
            true,
        )?;
        let w_tuned = store.add("input.w_tuned", glorot_uniform(rng, dims.input, dims.unit_tuned), true)?;
        let b_input = store.add("input.b", Tensor::zeros(&[dims.input]), true)?;
        let forward = Lstm::new(store, "encoder.fwd", dims.input, dims.hidden, rng)?;
        let backward = Lstm::new(store, "encoder.bwd", dims.input, dims.hidden, rng)?;
        let w_forward = store.add("encoder.w_fwd", glorot_uniform(rng, dims.hidden, dims.hidden), true)?;
        let w_backward = store.add("encoder.w_bwd", glorot_uniform(rng, dims.hidden, dims.hidden), true)?;
        let b_hidden = store.add("encoder.b", Tensor::zeros(&[dims.hidden]), true)?;
        Ok(Self {
            pretrained,
            tuned,
            w_pretrained,
            w_tuned,
            b_input,
            forward,
            backward,
            w_forward,
            w_backward,
            b_hidden,
            dims,
        })
    }

    pub fn dims(&self) -> EncoderDims {
        self.dims
    }

    pub fn pretrained(&self) -> &BoundTable {
        &self.pretrained
    }

    pub fn tuned(&self) -> &BoundTable {
        &self.tuned
    }

    pub fn forward_lstm(&self) -> &Lstm {
        &self.forward
    }

    pub fn backward_lstm(&self) -> &Lstm {
        &self.backward
    }

    /// `I_i` for one token.
    pub fn input_unit_repr(&self, g: &mut Graph<'_>, token: &str) -> Result<NodeId> {
        let ep = self.pretrained.lookup(g, token)?;
        let et = self.tuned.lookup(g, token)?;
        let wp = g.param(self.w_pretrained)?;
        let wt = g.param(self.w_tuned)?;
        let b = g.param(self.b_input)?;
        let a = g.matvec(wp, ep)?;
        let c = g.matvec(wt, et)?;
        let z = g.add(&[a, c, b])?;
        Ok(g.relu(z))
    }

    /// Runs both directions from zero state over the whole sequence.
    pub fn encode<S: AsRef<str>>(&self, g: &mut Graph<'_>, tokens: &[S]) -> Result<EncodedSequence> {
        if tokens.is_empty() {
            return Err(precondition("cannot encode an empty sequence"));
        }
        let inputs = tokens
            .iter()
            .map(|t| self.input_unit_repr(g, t.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        let forward = self.forward.run(g, inputs.iter().copied())?;
        let mut backward = self.backward.run(g, inputs.iter().rev().copied())?;
        backward.reverse();
        let wf = g.param(self.w_forward)?;
        let wb = g.param(self.w_backward)?;
        let b = g.param(self.b_hidden)?;
        let mut units = Vec::with_capacity(tokens.len());
        for (&f, &bk) in forward.iter().zip(&backward) {
            let a = g.matvec(wf, f)?;
            let c = g.matvec(wb, bk)?;
            let z = g.add(&[a, c, b])?;
            units.push(g.relu(z));
        }
        Ok(EncodedSequence {
            inputs,
            forward,
            backward,
            units,
        })
    }
}
