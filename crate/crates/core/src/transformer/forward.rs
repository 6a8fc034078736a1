use rand::RngCore;

use crate::nn::{kernels, Graph, Tensor, Var, LAYER_NORM_EPS};
use crate::scalar::Scalar;
use crate::transformer::{EncoderConfig, EncoderParams, TokenBatch, TransformerError};

/// Dropout is applied only in `Train`.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut dyn RngCore),
}

/// Graph handles of the encoder parameters, parallel to
/// [`EncoderParams::tensors`].
#[derive(Debug, Clone)]
pub struct EncoderGraph {
    config: EncoderConfig,
    vars: Vec<Var>,
}

/// Nodes produced by [`EncoderGraph::forward`].
#[derive(Debug, Clone)]
pub struct Forward {
    /// Final hidden states, `[batch·width × d]`.
    pub hidden: Var,
    /// One attention node per layer; see [`Graph::attention_probs`].
    pub attention: Vec<Var>,
}

const PER_LAYER: usize = 16;

/// Adds every parameter tensor to `g` as a leaf.
pub fn bind<T: Scalar>(g: &mut Graph<T>, params: &EncoderParams<T>) -> EncoderGraph {
    EncoderGraph::from_vars(params.config().clone(), params.tensors().iter().map(|t| g.leaf(t.clone())).collect())
}

impl EncoderGraph {
    /// Uses existing graph nodes as parameters, e.g. leaves created by a
    /// gradient checker. `vars` follows the storage order of [`EncoderParams`].
    pub fn from_vars(config: EncoderConfig, vars: Vec<Var>) -> Self {
        assert_eq!(vars.len(), 2 + PER_LAYER * config.num_layers + 4, "parameter count");
        Self { config, vars }
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    fn layer(&self, i: usize, slot: usize) -> Var {
        self.vars[2 + PER_LAYER * i + slot]
    }

    fn top(&self, slot: usize) -> Var {
        self.vars[2 + PER_LAYER * self.config.num_layers + slot]
    }

    pub fn word_embeddings(&self) -> Var {
        self.vars[0]
    }

    pub fn forward<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        batch: &TokenBatch,
        mut mode: Mode<'_>,
    ) -> Result<Forward, TransformerError> {
        let cfg = &self.config;
        batch.check(cfg)?;
        let (b, w) = (batch.batch(), batch.width());
        let eps = T::lit(LAYER_NORM_EPS);
        let rate = cfg.dropout;
        let mut drop = |g: &mut Graph<T>, x: Var| match &mut mode {
            Mode::Eval => x,
            Mode::Train(rng) => g.dropout(x, rate, &mut **rng),
        };

        let ids: Vec<usize> = batch.ids().iter().map(|&i| i as usize).collect();
        let positions: Vec<usize> = (0..b).flat_map(|_| 0..w).collect();
        let tok = g.embedding(self.vars[0], &ids);
        let pos = g.embedding(self.vars[1], &positions);
        let x = g.add(tok, pos);
        let mut x = drop(g, x);

        let mut attention = Vec::with_capacity(cfg.num_layers);
        for i in 0..cfg.num_layers {
            let l = |s| self.layer(i, s);
            let h = g.layer_norm(x, l(0), l(1), eps);
            let proj = |g: &mut Graph<T>, s: usize| {
                let m = g.matmul(h, l(s));
                g.add_row(m, l(s + 1))
            };
            let (q, k, v) = (proj(g, 2), proj(g, 4), proj(g, 6));
            let a = g.attention(q, k, v, b, w, cfg.num_heads, batch.mask());
            attention.push(a);
            let o = g.matmul(a, l(8));
            let o = g.add_row(o, l(9));
            let o = drop(g, o);
            x = g.add(x, o);

            let h = g.layer_norm(x, l(10), l(11), eps);
            let f = g.matmul(h, l(12));
            let f = g.add_row(f, l(13));
            let f = g.gelu(f);
            let f = g.matmul(f, l(14));
            let f = g.add_row(f, l(15));
            let f = drop(g, f);
            x = g.add(x, f);
        }
        let hidden = g.layer_norm(x, self.top(0), self.top(1), eps);
        Ok(Forward { hidden, attention })
    }

    /// MLM logits for the selected rows of `hidden` (all rows when `None`),
    /// scored against the word embedding.
    pub fn mlm_logits<T: Scalar>(&self, g: &mut Graph<T>, hidden: Var, rows: Option<&[usize]>) -> Var {
        let h = match rows {
            Some(r) => g.gather_rows(hidden, r),
            None => hidden,
        };
        g.matmul_nt(h, self.vars[0])
    }

    /// Class logits `[batch × K]` from each row's position-0 hidden state.
    pub fn class_logits<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        hidden: Var,
        batch: &TokenBatch,
        bos: u32,
    ) -> Result<Var, TransformerError> {
        let w = batch.width();
        for r in 0..batch.batch() {
            if batch.row(r)[0] != bos {
                return Err(TransformerError::MissingBos { row: r });
            }
        }
        let rows: Vec<usize> = (0..batch.batch()).map(|r| r * w).collect();
        let pooled = g.gather_rows(hidden, &rows);
        let z = g.matmul(pooled, self.top(2));
        Ok(g.add_row(z, self.top(3)))
    }
}

/// Final hidden states `[batch × width × d]` in evaluation mode.
pub fn encoder_forward<T: Scalar>(params: &EncoderParams<T>, batch: &TokenBatch) -> Result<Tensor<T>, TransformerError> {
    let mut g = Graph::new();
    let eg = bind(&mut g, params);
    let out = eg.forward(&mut g, batch, Mode::Eval)?;
    let d = params.config().model_dim;
    Ok(g.value(out.hidden).clone().reshape(&[batch.batch(), batch.width(), d])?)
}

/// `hidden · Eᵀ` with `E` the word embedding: `[B×T×d] → [B×T×V]`.
pub fn mlm_logits<T: Scalar>(params: &EncoderParams<T>, hidden: &Tensor<T>) -> Result<Tensor<T>, TransformerError> {
    let cfg = params.config();
    let (v, d) = (cfg.vocab_size, cfg.model_dim);
    let &[b, t, hd] = hidden.shape() else {
        return Err(TransformerError::Shape(format!("hidden must be 3-d, got {:?}", hidden.shape())));
    };
    if hd != d {
        return Err(TransformerError::Shape(format!("hidden dim {hd}, model dim {d}")));
    }
    let emb = params.tensors()[0].data();
    let out = kernels::matmul_nt(hidden.data(), emb, b * t, d, v);
    Ok(Tensor::from_vec(&[b, t, v], out)?)
}

/// Class logits `[batch × K]` in evaluation mode. Rows must start with `bos`.
pub fn classify<T: Scalar>(params: &EncoderParams<T>, batch: &TokenBatch, bos: u32) -> Result<Tensor<T>, TransformerError> {
    let mut g = Graph::new();
    let eg = bind(&mut g, params);
    let out = eg.forward(&mut g, batch, Mode::Eval)?;
    let z = eg.class_logits(&mut g, out.hidden, batch, bos)?;
    Ok(g.value(z).clone())
}

/// Argmax class per row, ties toward the lowest index.
pub fn predict<T: Scalar>(params: &EncoderParams<T>, batch: &TokenBatch, bos: u32) -> Result<Vec<usize>, TransformerError> {
    let logits = classify(params, batch, bos)?;
    let k = logits.cols();
    Ok(logits.data().chunks(k).map(kernels::argmax).collect())
}
