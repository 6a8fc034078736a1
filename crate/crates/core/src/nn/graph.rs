//! Tape-based reverse-mode differentiation over dense tensors.
//!
//! A [`Graph`] records every primitive application in evaluation order.
//! [`Graph::backward`] walks the tape in reverse and accumulates vector-Jacobian
//! products into the inputs of each node. Leaves that the loss does not depend
//! on come back with an exact zero gradient.

use rand::{Rng, RngCore};
use rayon::prelude::*;

use crate::nn::kernels;
use crate::nn::{NnError, Tensor};
use crate::scalar::Scalar;

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
struct AttnLayout {
    batch: usize,
    seq: usize,
    heads: usize,
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Sum(Var),
    Gelu(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Vec<T>,
        rstd: Vec<T>,
    },
    Embedding {
        table: Var,
        ids: Vec<usize>,
    },
    GatherRows {
        src: Var,
        rows: Vec<usize>,
    },
    SoftmaxRows(Var),
    Attention {
        q: Var,
        k: Var,
        v: Var,
        layout: AttnLayout,
        probs: Vec<T>,
    },
    CrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        probs: Vec<T>,
    },
    Dropout {
        x: Var,
        mask: Vec<T>,
    },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
}

/// Recorded computation. One graph per forward pass.
#[derive(Debug, Default)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

fn two_d<T: Scalar>(t: &Tensor<T>) -> (usize, usize) {
    (t.rows(), t.cols())
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Adds an input tensor. Every leaf receives a gradient.
    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    /// `a[m×k] · b[k×n]`
    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (m, k) = two_d(self.value(a));
        let (k2, n) = two_d(self.value(b));
        assert_eq!(k, k2, "matmul inner dimension");
        let out = kernels::matmul(self.value(a).data(), self.value(b).data(), m, k, n);
        self.push(Tensor::from_vec(&[m, n], out).unwrap(), Op::MatMul(a, b))
    }

    /// `a[m×k] · b[n×k]ᵀ`
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Var {
        let (m, k) = two_d(self.value(a));
        let (n, k2) = two_d(self.value(b));
        assert_eq!(k, k2, "matmul_nt inner dimension");
        let out = kernels::matmul_nt(self.value(a).data(), self.value(b).data(), m, k, n);
        self.push(Tensor::from_vec(&[m, n], out).unwrap(), Op::MatMulNt(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.shape(), bv.shape(), "add shapes");
        let data = av.data().iter().zip(bv.data()).map(|(&x, &y)| x + y).collect();
        let shape = av.shape().to_vec();
        self.push(Tensor::from_vec(&shape, data).unwrap(), Op::Add(a, b))
    }

    /// Adds a length-`n` vector to every row of an `[m×n]` matrix.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(bias));
        let n = av.cols();
        assert_eq!(bv.len(), n, "add_row width");
        let mut data = av.data().to_vec();
        for row in data.chunks_mut(n) {
            for (x, &b) in row.iter_mut().zip(bv.data()) {
                *x += b;
            }
        }
        let shape = av.shape().to_vec();
        self.push(Tensor::from_vec(&shape, data).unwrap(), Op::AddRow(a, bias))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.shape(), bv.shape(), "mul shapes");
        let data = av.data().iter().zip(bv.data()).map(|(&x, &y)| x * y).collect();
        let shape = av.shape().to_vec();
        self.push(Tensor::from_vec(&shape, data).unwrap(), Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        let av = self.value(a);
        let data = av.data().iter().map(|&x| x * s).collect();
        let shape = av.shape().to_vec();
        self.push(Tensor::from_vec(&shape, data).unwrap(), Op::Scale(a, s))
    }

    /// Sum of all elements, as a one-element tensor.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().copied().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let data = av.data().iter().map(|&x| kernels::gelu(x)).collect();
        let shape = av.shape().to_vec();
        self.push(Tensor::from_vec(&shape, data).unwrap(), Op::Gelu(a))
    }

    /// Row-wise layer normalization with learned gain and bias.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: T) -> Var {
        let xv = self.value(x);
        let n = xv.cols();
        assert_eq!(self.value(gain).len(), n, "layer_norm gain width");
        assert_eq!(self.value(bias).len(), n, "layer_norm bias width");
        let shape = xv.shape().to_vec();
        let mut xhat = xv.data().to_vec();
        let rstd: Vec<T> = xhat
            .chunks_mut(n)
            .map(|row| kernels::standardize(row, eps))
            .collect();
        let g = self.value(gain).data();
        let b = self.value(bias).data();
        let mut out = xhat.clone();
        for row in out.chunks_mut(n) {
            for ((y, &gi), &bi) in row.iter_mut().zip(g).zip(b) {
                *y = *y * gi + bi;
            }
        }
        self.push(
            Tensor::from_vec(&shape, out).unwrap(),
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                rstd,
            },
        )
    }

    /// Looks up rows of `table` for each id.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Var {
        let tv = self.value(table);
        let (vocab, d) = two_d(tv);
        let mut data = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            assert!(id < vocab, "embedding id {id} >= {vocab}");
            data.extend_from_slice(tv.row(id));
        }
        self.push(
            Tensor::from_vec(&[ids.len(), d], data).unwrap(),
            Op::Embedding {
                table,
                ids: ids.to_vec(),
            },
        )
    }

    /// Selects rows of an `[m×n]` matrix.
    pub fn gather_rows(&mut self, src: Var, rows: &[usize]) -> Var {
        let sv = self.value(src);
        let n = sv.cols();
        let mut data = Vec::with_capacity(rows.len() * n);
        for &r in rows {
            data.extend_from_slice(sv.row(r));
        }
        self.push(
            Tensor::from_vec(&[rows.len(), n], data).unwrap(),
            Op::GatherRows {
                src,
                rows: rows.to_vec(),
            },
        )
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let n = av.cols();
        let shape = av.shape().to_vec();
        let mut data = av.data().to_vec();
        data.chunks_mut(n).for_each(kernels::softmax_in_place);
        self.push(Tensor::from_vec(&shape, data).unwrap(), Op::SoftmaxRows(a))
    }

    /// Multi-head scaled dot-product self-attention.
    ///
    /// `q`, `k`, `v` are `[batch·seq × d]` with heads laid out as contiguous
    /// column blocks. Keys whose `key_mask` entry is false get a score of
    /// `-inf` before the softmax. Every sequence must keep at least one key.
    #[allow(clippy::too_many_arguments)]
    pub fn attention(
        &mut self,
        q: Var,
        k: Var,
        v: Var,
        batch: usize,
        seq: usize,
        heads: usize,
        key_mask: &[bool],
    ) -> Var {
        let d = self.value(q).cols();
        assert_eq!(self.value(q).rows(), batch * seq, "attention rows");
        assert_eq!(self.value(k).shape(), self.value(q).shape());
        assert_eq!(self.value(v).shape(), self.value(q).shape());
        assert_eq!(key_mask.len(), batch * seq, "attention mask length");
        assert_eq!(d % heads, 0, "model dim divisible by heads");
        let dh = d / heads;
        let scale = T::one() / T::from_usize(dh).unwrap().sqrt();
        let (qd, kd, vd) = (
            self.value(q).data(),
            self.value(k).data(),
            self.value(v).data(),
        );

        let blocks: Vec<(Vec<T>, Vec<T>)> = (0..batch * heads)
            .into_par_iter()
            .map(|bh| {
                let (b, h) = (bh / heads, bh % heads);
                let qh = head_block(qd, d, b, h, seq, dh);
                let kh = head_block(kd, d, b, h, seq, dh);
                let vh = head_block(vd, d, b, h, seq, dh);
                let mut scores = kernels::matmul_nt(&qh, &kh, seq, dh, seq);
                let mask = &key_mask[b * seq..(b + 1) * seq];
                for row in scores.chunks_mut(seq) {
                    for (s, &keep) in row.iter_mut().zip(mask) {
                        *s = if keep { *s * scale } else { T::neg_infinity() };
                    }
                    kernels::softmax_in_place(row);
                }
                let out = kernels::matmul(&scores, &vh, seq, seq, dh);
                (scores, out)
            })
            .collect();

        let mut out = vec![T::zero(); batch * seq * d];
        let mut probs = Vec::with_capacity(batch * heads * seq * seq);
        for (bh, (p, o)) in blocks.into_iter().enumerate() {
            scatter_head(&mut out, &o, d, bh / heads, bh % heads, seq, dh);
            probs.extend(p);
        }
        self.push(
            Tensor::from_vec(&[batch * seq, d], out).unwrap(),
            Op::Attention {
                q,
                k,
                v,
                layout: AttnLayout {
                    batch,
                    seq,
                    heads,
                },
                probs,
            },
        )
    }

    /// Attention weights recorded by an [`Graph::attention`] node, laid out
    /// as `[batch][head][query][key]`.
    pub fn attention_probs(&self, v: Var) -> Option<&[T]> {
        match &self.nodes[v.0].op {
            Op::Attention { probs, .. } => Some(probs),
            _ => None,
        }
    }

    /// Mean cross-entropy of `logits[m×C]` rows against class targets.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Var {
        let lv = self.value(logits);
        let (m, c) = two_d(lv);
        assert_eq!(targets.len(), m, "one target per row");
        assert!(m > 0, "cross_entropy over zero rows");
        let mut probs = lv.data().to_vec();
        let mut total = T::zero();
        for (row, (&t, src)) in probs
            .chunks_mut(c)
            .zip(targets.iter().zip(lv.data().chunks(c)))
        {
            assert!(t < c, "target {t} >= {c}");
            total += kernels::log_sum_exp(src) - src[t];
            kernels::softmax_in_place(row);
        }
        let loss = total / T::from_usize(m).unwrap();
        self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
            },
        )
    }

    /// Inverted dropout. A rate of zero records nothing and returns `x`.
    pub fn dropout(&mut self, x: Var, rate: f64, rng: &mut dyn RngCore) -> Var {
        if rate <= 0.0 {
            return x;
        }
        let keep = T::lit(1.0 / (1.0 - rate));
        let xv = self.value(x);
        let mask: Vec<T> = (0..xv.len())
            .map(|_| {
                if rng.gen::<f64>() < rate {
                    T::zero()
                } else {
                    keep
                }
            })
            .collect();
        let data = xv.data().iter().zip(&mask).map(|(&a, &m)| a * m).collect();
        let shape = xv.shape().to_vec();
        self.push(Tensor::from_vec(&shape, data).unwrap(), Op::Dropout { x, mask })
    }

    /// Reverse pass from a one-element `loss` node.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>, NnError> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(NnError::Shape(format!(
                "backward needs a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        if !lv.is_finite() {
            return Err(NnError::NonFinite("loss".into()));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(lv.shape(), T::one()));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {
                    grads[i] = Some(g);
                }
                Op::MatMul(a, b) => {
                    let (m, k) = two_d(self.value(*a));
                    let n = self.value(*b).cols();
                    let da = kernels::matmul_nt(g.data(), self.value(*b).data(), m, n, k);
                    let db = kernels::matmul_tn(self.value(*a).data(), g.data(), m, k, n);
                    self.accumulate(&mut grads, *a, da);
                    self.accumulate(&mut grads, *b, db);
                }
                Op::MatMulNt(a, b) => {
                    // c = a·bᵀ, a[m×k], b[n×k]
                    let (m, k) = two_d(self.value(*a));
                    let n = self.value(*b).rows();
                    let da = kernels::matmul(g.data(), self.value(*b).data(), m, n, k);
                    let db = kernels::matmul_tn(g.data(), self.value(*a).data(), m, n, k);
                    self.accumulate(&mut grads, *a, da);
                    self.accumulate(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    self.accumulate(&mut grads, *a, g.data().to_vec());
                    self.accumulate(&mut grads, *b, g.data().to_vec());
                }
                Op::AddRow(a, bias) => {
                    let n = g.cols();
                    let mut db = vec![T::zero(); n];
                    for row in g.data().chunks(n) {
                        for (acc, &x) in db.iter_mut().zip(row) {
                            *acc += x;
                        }
                    }
                    self.accumulate(&mut grads, *a, g.data().to_vec());
                    self.accumulate(&mut grads, *bias, db);
                }
                Op::Mul(a, b) => {
                    let av = self.value(*a).data();
                    let bv = self.value(*b).data();
                    let da = g.data().iter().zip(bv).map(|(&x, &y)| x * y).collect();
                    let db = g.data().iter().zip(av).map(|(&x, &y)| x * y).collect();
                    self.accumulate(&mut grads, *a, da);
                    self.accumulate(&mut grads, *b, db);
                }
                Op::Scale(a, s) => {
                    let da = g.data().iter().map(|&x| x * *s).collect();
                    self.accumulate(&mut grads, *a, da);
                }
                Op::Sum(a) => {
                    let n = self.value(*a).len();
                    self.accumulate(&mut grads, *a, vec![g.item(); n]);
                }
                Op::Gelu(a) => {
                    let da = g
                        .data()
                        .iter()
                        .zip(self.value(*a).data())
                        .map(|(&gy, &x)| gy * kernels::gelu_grad(x))
                        .collect();
                    self.accumulate(&mut grads, *a, da);
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    xhat,
                    rstd,
                } => {
                    let n = g.cols();
                    let nf = T::from_usize(n).unwrap();
                    let gv = self.value(*gain).data();
                    let mut dx = vec![T::zero(); g.len()];
                    let mut dg = vec![T::zero(); n];
                    let mut db = vec![T::zero(); n];
                    for (r, (dy, xh)) in g.data().chunks(n).zip(xhat.chunks(n)).enumerate() {
                        let mut mean_d = T::zero();
                        let mut mean_dx = T::zero();
                        for j in 0..n {
                            let dxh = dy[j] * gv[j];
                            mean_d += dxh;
                            mean_dx += dxh * xh[j];
                            dg[j] += dy[j] * xh[j];
                            db[j] += dy[j];
                        }
                        mean_d /= nf;
                        mean_dx /= nf;
                        let out = &mut dx[r * n..(r + 1) * n];
                        for j in 0..n {
                            let dxh = dy[j] * gv[j];
                            out[j] = rstd[r] * (dxh - mean_d - xh[j] * mean_dx);
                        }
                    }
                    self.accumulate(&mut grads, *x, dx);
                    self.accumulate(&mut grads, *gain, dg);
                    self.accumulate(&mut grads, *bias, db);
                }
                Op::Embedding { table, ids } => {
                    let tv = self.value(*table);
                    let d = tv.cols();
                    let mut dt = vec![T::zero(); tv.len()];
                    for (row, &id) in g.data().chunks(d).zip(ids) {
                        for (acc, &x) in dt[id * d..(id + 1) * d].iter_mut().zip(row) {
                            *acc += x;
                        }
                    }
                    self.accumulate(&mut grads, *table, dt);
                }
                Op::GatherRows { src, rows } => {
                    let sv = self.value(*src);
                    let n = sv.cols();
                    let mut ds = vec![T::zero(); sv.len()];
                    for (row, &r) in g.data().chunks(n).zip(rows) {
                        for (acc, &x) in ds[r * n..(r + 1) * n].iter_mut().zip(row) {
                            *acc += x;
                        }
                    }
                    self.accumulate(&mut grads, *src, ds);
                }
                Op::SoftmaxRows(a) => {
                    let n = g.cols();
                    let y = node.value.data();
                    let mut da = vec![T::zero(); g.len()];
                    for ((out, dy), yr) in da.chunks_mut(n).zip(g.data().chunks(n)).zip(y.chunks(n)) {
                        let dot: T = dy.iter().zip(yr).map(|(&a, &b)| a * b).sum();
                        for j in 0..n {
                            out[j] = yr[j] * (dy[j] - dot);
                        }
                    }
                    self.accumulate(&mut grads, *a, da);
                }
                Op::Attention {
                    q,
                    k,
                    v,
                    layout,
                    probs,
                } => {
                    let (dq, dk, dv) = self.attention_backward(*q, *k, *v, layout, probs, g.data());
                    self.accumulate(&mut grads, *q, dq);
                    self.accumulate(&mut grads, *k, dk);
                    self.accumulate(&mut grads, *v, dv);
                }
                Op::CrossEntropy {
                    logits,
                    targets,
                    probs,
                } => {
                    let c = self.value(*logits).cols();
                    let coef = g.item() / T::from_usize(targets.len()).unwrap();
                    let mut dl = probs.clone();
                    for (row, &t) in dl.chunks_mut(c).zip(targets) {
                        row[t] -= T::one();
                        for x in row.iter_mut() {
                            *x *= coef;
                        }
                    }
                    self.accumulate(&mut grads, *logits, dl);
                }
                Op::Dropout { x, mask } => {
                    let dx = g.data().iter().zip(mask).map(|(&a, &m)| a * m).collect();
                    self.accumulate(&mut grads, *x, dx);
                }
            }
        }

        let grads = grads
            .into_iter()
            .zip(&self.nodes)
            .map(|(g, n)| match n.op {
                Op::Leaf => g,
                _ => None,
            })
            .collect();
        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients { grads, shapes })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<T>>], v: Var, delta: Vec<T>) {
        match &mut grads[v.0] {
            Some(t) => {
                for (a, d) in t.data_mut().iter_mut().zip(delta) {
                    *a += d;
                }
            }
            slot @ None => {
                *slot = Some(Tensor::from_vec(self.value(v).shape(), delta).unwrap());
            }
        }
    }

    fn attention_backward(
        &self,
        q: Var,
        k: Var,
        v: Var,
        layout: &AttnLayout,
        probs: &[T],
        dout: &[T],
    ) -> (Vec<T>, Vec<T>, Vec<T>) {
        let AttnLayout {
            batch, seq, heads, ..
        } = *layout;
        let d = self.value(q).cols();
        let dh = d / heads;
        let scale = T::one() / T::from_usize(dh).unwrap().sqrt();
        let (qd, kd, vd) = (
            self.value(q).data(),
            self.value(k).data(),
            self.value(v).data(),
        );
        let blocks: Vec<(Vec<T>, Vec<T>, Vec<T>)> = (0..batch * heads)
            .into_par_iter()
            .map(|bh| {
                let (b, h) = (bh / heads, bh % heads);
                let p = &probs[bh * seq * seq..(bh + 1) * seq * seq];
                let qh = head_block(qd, d, b, h, seq, dh);
                let kh = head_block(kd, d, b, h, seq, dh);
                let vh = head_block(vd, d, b, h, seq, dh);
                let go = head_block(dout, d, b, h, seq, dh);
                let dvh = kernels::matmul_tn(p, &go, seq, seq, dh);
                let mut ds = kernels::matmul_nt(&go, &vh, seq, dh, seq);
                for (dsr, pr) in ds.chunks_mut(seq).zip(p.chunks(seq)) {
                    let dot: T = dsr.iter().zip(pr).map(|(&a, &b)| a * b).sum();
                    for (x, &pij) in dsr.iter_mut().zip(pr) {
                        *x = pij * (*x - dot) * scale;
                    }
                }
                let dqh = kernels::matmul(&ds, &kh, seq, seq, dh);
                let dkh = kernels::matmul_tn(&ds, &qh, seq, seq, dh);
                (dqh, dkh, dvh)
            })
            .collect();
        let n = batch * seq * d;
        let (mut dq, mut dk, mut dv) = (vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]);
        for (bh, (a, b, c)) in blocks.into_iter().enumerate() {
            let (bi, h) = (bh / heads, bh % heads);
            scatter_head(&mut dq, &a, d, bi, h, seq, dh);
            scatter_head(&mut dk, &b, d, bi, h, seq, dh);
            scatter_head(&mut dv, &c, d, bi, h, seq, dh);
        }
        (dq, dk, dv)
    }
}

fn head_block<T: Scalar>(x: &[T], d: usize, b: usize, h: usize, seq: usize, dh: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(seq * dh);
    for t in 0..seq {
        let start = (b * seq + t) * d + h * dh;
        out.extend_from_slice(&x[start..start + dh]);
    }
    out
}

fn scatter_head<T: Scalar>(
    dst: &mut [T],
    block: &[T],
    d: usize,
    b: usize,
    h: usize,
    seq: usize,
    dh: usize,
) {
    for t in 0..seq {
        let start = (b * seq + t) * d + h * dh;
        dst[start..start + dh].copy_from_slice(&block[t * dh..(t + 1) * dh]);
    }
}

/// Gradients of the leaves of a graph.
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
    shapes: Vec<Vec<usize>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of `v`; exact zeros when the loss does not depend on it.
    pub fn get(&self, v: Var) -> Tensor<T> {
        match &self.grads[v.0] {
            Some(t) => t.clone(),
            None => Tensor::zeros(&self.shapes[v.0]),
        }
    }

    /// Moves the gradient of `v` out; zeros when it was never reached.
    pub fn take(&mut self, v: Var) -> Tensor<T> {
        self.grads[v.0]
            .take()
            .unwrap_or_else(|| Tensor::zeros(&self.shapes[v.0]))
    }

    /// Whether any gradient flowed into `v`.
    pub fn reached(&self, v: Var) -> bool {
        self.grads[v.0].is_some()
    }
}
