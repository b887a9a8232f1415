use super::kernels::{gelu, gelu_grad, gemm_nn, gemm_nt, gemm_tn, permute};
use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul { a: Var, b: Var },
    Add { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Scale { a: Var, c: f64 },
    ScaleBatch { a: Var, factors: Vec<f64> },
    Sum { a: Var },
    Softmax { a: Var, axis: usize },
    LayerNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<f64>, inv_std: Vec<f64> },
    Gelu { a: Var },
    Linear { x: Var, w: Var, b: Option<Var> },
    Reshape { a: Var },
    Permute { a: Var, axes: Vec<usize> },
    Concat { inputs: Vec<Var>, axis: usize },
    Slice { a: Var, axis: usize, start: usize },
    SoftmaxCrossEntropy { logits: Var, labels: Vec<usize>, probs: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    requires_grad: bool,
    op: Op,
}

/// Define-by-run computation record. Nodes are appended in evaluation
/// order, so the node list is already topologically sorted.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of the leaves that were created with `requires_grad`.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

fn split_last2(shape: &[usize]) -> (usize, usize, usize) {
    let r = shape.len();
    (shape[..r - 2].iter().product(), shape[r - 2], shape[r - 1])
}

fn axis_layout(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    (
        shape[..axis].iter().product(),
        shape[axis],
        shape[axis + 1..].iter().product(),
    )
}

fn invert(axes: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; axes.len()];
    for (i, &a) in axes.iter().enumerate() {
        inv[a] = i;
    }
    inv
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Tensor, inputs: &[Var], op: Op) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            requires_grad,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    /// Batched product over the last two axes. `b` either carries the same
    /// leading batch dims as `a` or is a plain matrix shared across them.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let mismatch = || Error::ShapeMismatch {
            op: "matmul",
            lhs: sa.clone(),
            rhs: sb.clone(),
        };
        if sa.len() < 2 || sb.len() < 2 {
            return Err(mismatch());
        }
        let (batch, m, k) = split_last2(&sa);
        let (_, k2, n) = split_last2(&sb);
        let shared = sb.len() == 2;
        if k != k2 || (!shared && sa[..sa.len() - 2] != sb[..sb.len() - 2]) {
            return Err(mismatch());
        }
        let (ad, bd) = (self.value(a).data(), self.value(b).data());
        let mut out = vec![0.0; batch * m * n];
        if shared {
            gemm_nn(ad, bd, &mut out, batch * m, k, n);
        } else {
            for t in 0..batch {
                gemm_nn(
                    &ad[t * m * k..(t + 1) * m * k],
                    &bd[t * k * n..(t + 1) * k * n],
                    &mut out[t * m * n..(t + 1) * m * n],
                    m,
                    k,
                    n,
                );
            }
        }
        let mut shape = sa[..sa.len() - 2].to_vec();
        shape.extend([m, n]);
        Ok(self.push(Tensor::new(shape, out)?, &[a, b], Op::MatMul { a, b }))
    }

    /// Elementwise sum; `b` may be broadcast over leading dims of `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sb.len() > sa.len() || sa[sa.len() - sb.len()..] != *sb {
            return Err(Error::ShapeMismatch {
                op: "add",
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        let bd = self.value(b).data();
        let len = bd.len();
        let mut out = self.value(a).data().to_vec();
        for chunk in out.chunks_mut(len) {
            for (o, &y) in chunk.iter_mut().zip(bd) {
                *o += y;
            }
        }
        let shape = self.shape(a).to_vec();
        Ok(self.push(Tensor::new(shape, out)?, &[a, b], Op::Add { a, b }))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::ShapeMismatch {
                op: "mul",
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let out: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(Tensor::new(shape, out)?, &[a, b], Op::Mul { a, b }))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let t = self.value(a);
        let value = Tensor::new(t.shape().to_vec(), t.data().iter().map(|x| x * c).collect()).expect("same shape");
        self.push(value, &[a], Op::Scale { a, c })
    }

    /// Multiplies slice `i` along the first axis by `factors[i]`.
    pub fn scale_batch(&mut self, a: Var, factors: &[f64]) -> Result<Var> {
        let t = self.value(a);
        if t.shape()[0] != factors.len() {
            return Err(Error::ShapeMismatch {
                op: "scale_batch",
                lhs: t.shape().to_vec(),
                rhs: vec![factors.len()],
            });
        }
        let per = t.numel() / factors.len();
        let out: Vec<f64> = t
            .data()
            .chunks(per)
            .zip(factors)
            .flat_map(|(chunk, &f)| chunk.iter().map(move |x| x * f))
            .collect();
        let value = Tensor::new(t.shape().to_vec(), out)?;
        Ok(self.push(
            value,
            &[a],
            Op::ScaleBatch {
                a,
                factors: factors.to_vec(),
            },
        ))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), &[a], Op::Sum { a })
    }

    /// Max-subtracted softmax along `axis`.
    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        let t = self.value(a);
        if axis >= t.rank() {
            return Err(Error::invalid(format!("softmax axis {axis} out of range for {:?}", t.shape())));
        }
        let (outer, len, inner) = axis_layout(t.shape(), axis);
        let x = t.data();
        let mut out = vec![0.0; x.len()];
        for o in 0..outer {
            for i in 0..inner {
                let at = |l: usize| (o * len + l) * inner + i;
                let max = (0..len).map(|l| x[at(l)]).fold(f64::NEG_INFINITY, f64::max);
                let mut z = 0.0;
                for l in 0..len {
                    let e = (x[at(l)] - max).exp();
                    out[at(l)] = e;
                    z += e;
                }
                for l in 0..len {
                    out[at(l)] /= z;
                }
            }
        }
        let value = Tensor::new(t.shape().to_vec(), out)?;
        Ok(self.push(value, &[a], Op::Softmax { a, axis }))
    }

    /// Standardizes the last axis, then applies `gamma`/`beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        let d = *sx.last().unwrap();
        if d < 2 || self.shape(gamma) != [d] || self.shape(beta) != [d] {
            return Err(Error::ShapeMismatch {
                op: "layer_norm",
                lhs: sx,
                rhs: self.shape(gamma).to_vec(),
            });
        }
        let xd = self.value(x).data();
        let (g, b) = (self.value(gamma).data(), self.value(beta).data());
        let rows = xd.len() / d;
        let mut xhat = vec![0.0; xd.len()];
        let mut inv_std = vec![0.0; rows];
        let mut out = vec![0.0; xd.len()];
        for r in 0..rows {
            let row = &xd[r * d..(r + 1) * d];
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std[r] = is;
            for j in 0..d {
                let h = (row[j] - mean) * is;
                xhat[r * d + j] = h;
                out[r * d + j] = h * g[j] + b[j];
            }
        }
        let value = Tensor::new(sx, out)?;
        Ok(self.push(
            value,
            &[x, gamma, beta],
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
        ))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let value = Tensor::new(t.shape().to_vec(), t.data().iter().map(|&v| gelu(v)).collect()).expect("same shape");
        self.push(value, &[a], Op::Gelu { a })
    }

    /// `x[..., in] · w[in, out] + b[out]`
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (sx, sw) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        let in_dim = *sx.last().unwrap();
        let bad_bias = b.is_some_and(|b| self.shape(b) != [sw.get(1).copied().unwrap_or(0)]);
        if sw.len() != 2 || sw[0] != in_dim || bad_bias {
            return Err(Error::ShapeMismatch {
                op: "linear",
                lhs: sx,
                rhs: sw,
            });
        }
        let out_dim = sw[1];
        let rows = self.value(x).numel() / in_dim;
        let mut out = vec![0.0; rows * out_dim];
        if let Some(b) = b {
            let bd = self.value(b).data();
            for row in out.chunks_mut(out_dim) {
                row.copy_from_slice(bd);
            }
        }
        gemm_nn(self.value(x).data(), self.value(w).data(), &mut out, rows, in_dim, out_dim);
        let mut shape = sx;
        *shape.last_mut().unwrap() = out_dim;
        let inputs: Vec<Var> = [Some(x), Some(w), b].into_iter().flatten().collect();
        Ok(self.push(Tensor::new(shape, out)?, &inputs, Op::Linear { x, w, b }))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(a).clone().reshaped(shape.to_vec())?;
        Ok(self.push(value, &[a], Op::Reshape { a }))
    }

    pub fn permute(&mut self, a: Var, axes: &[usize]) -> Result<Var> {
        let t = self.value(a);
        let mut sorted = axes.to_vec();
        sorted.sort_unstable();
        if sorted != (0..t.rank()).collect::<Vec<_>>() {
            return Err(Error::invalid(format!("invalid permutation {axes:?} for {:?}", t.shape())));
        }
        let (data, shape) = permute(t.data(), t.shape(), axes);
        let value = Tensor::new(shape, data)?;
        Ok(self.push(
            value,
            &[a],
            Op::Permute {
                a,
                axes: axes.to_vec(),
            },
        ))
    }

    pub fn transpose(&mut self, a: Var, d0: usize, d1: usize) -> Result<Var> {
        let rank = self.value(a).rank();
        if d0 >= rank || d1 >= rank {
            return Err(Error::invalid(format!("transpose axes ({d0}, {d1}) out of range for rank {rank}")));
        }
        let mut axes: Vec<usize> = (0..rank).collect();
        axes.swap(d0, d1);
        self.permute(a, &axes)
    }

    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = self
            .shape(*inputs.first().ok_or_else(|| Error::invalid("concat of nothing"))?)
            .to_vec();
        if axis >= first.len() {
            return Err(Error::invalid(format!("concat axis {axis} out of range for {first:?}")));
        }
        let mut total = 0;
        for &v in inputs {
            let s = self.shape(v);
            let compatible = s.len() == first.len()
                && s.iter().zip(&first).enumerate().all(|(d, (x, y))| d == axis || x == y);
            if !compatible {
                return Err(Error::ShapeMismatch {
                    op: "concat",
                    lhs: first,
                    rhs: s.to_vec(),
                });
            }
            total += s[axis];
        }
        let (outer, _, inner) = axis_layout(&first, axis);
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &v in inputs {
                let len = self.shape(v)[axis];
                let d = self.value(v).data();
                out.extend_from_slice(&d[o * len * inner..(o + 1) * len * inner]);
            }
        }
        let mut shape = first;
        shape[axis] = total;
        Ok(self.push(
            Tensor::new(shape, out)?,
            inputs,
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
        ))
    }

    /// Elements `start..end` along `axis`.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, end: usize) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        if axis >= shape.len() || start >= end || end > shape[axis] {
            return Err(Error::invalid(format!(
                "slice {start}..{end} on axis {axis} out of range for {shape:?}"
            )));
        }
        let (outer, len, inner) = axis_layout(&shape, axis);
        let d = self.value(a).data();
        let mut out = Vec::with_capacity(outer * (end - start) * inner);
        for o in 0..outer {
            out.extend_from_slice(&d[(o * len + start) * inner..(o * len + end) * inner]);
        }
        let mut new_shape = shape;
        new_shape[axis] = end - start;
        Ok(self.push(Tensor::new(new_shape, out)?, &[a], Op::Slice { a, axis, start }))
    }

    /// Mean categorical cross-entropy of `softmax(logits)` against integer
    /// labels; probabilities are clamped at 1e-12 before the log.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let t = self.value(logits);
        if t.rank() != 2 || t.shape()[0] != labels.len() {
            return Err(Error::ShapeMismatch {
                op: "softmax_cross_entropy",
                lhs: t.shape().to_vec(),
                rhs: vec![labels.len()],
            });
        }
        if !t.is_finite() {
            return Err(Error::NonFinite("logits reaching the loss".into()));
        }
        let (b, k) = (t.shape()[0], t.shape()[1]);
        if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
            return Err(Error::invalid(format!("label {bad} out of range for {k} classes")));
        }
        let mut probs = vec![0.0; b * k];
        let mut loss = 0.0;
        for (i, row) in t.data().chunks(k).enumerate() {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|v| (v - max).exp()).sum();
            for j in 0..k {
                probs[i * k + j] = (row[j] - max).exp() / z;
            }
            let log_p = row[labels[i]] - max - z.ln();
            loss -= log_p.max(1e-12f64.ln());
        }
        loss /= b as f64;
        Ok(self.push(
            Tensor::scalar(loss),
            &[logits],
            Op::SoftmaxCrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
        ))
    }

    /// Reverse sweep from a scalar `loss`. Consumes the tape.
    pub fn backward(self, loss: Var) -> Result<Gradients> {
        if self.nodes.is_empty() {
            return Err(Error::invalid("backward on an empty tape"));
        }
        if self.value(loss).numel() != 1 {
            return Err(Error::invalid(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let nodes = self.nodes;
        let mut grads: Vec<Option<Vec<f64>>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let node = &nodes[idx];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            let needs = |v: Var| nodes[v.0].requires_grad;
            let val = |v: Var| &nodes[v.0].value;
            let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
                if !nodes[v.0].requires_grad {
                    return;
                }
                let slot = grads[v.0].get_or_insert_with(|| vec![0.0; nodes[v.0].value.numel()]);
                f(slot);
            };

            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul { a, b } => {
                    let (sa, sb) = (val(*a).shape(), val(*b).shape());
                    let (batch, m, k) = split_last2(sa);
                    let n = sb[sb.len() - 1];
                    let shared = sb.len() == 2;
                    let (ad, bd) = (val(*a).data(), val(*b).data());
                    acc(*a, &mut |da| {
                        if shared {
                            gemm_nt(&g, bd, da, batch * m, n, k);
                        } else {
                            for t in 0..batch {
                                gemm_nt(
                                    &g[t * m * n..(t + 1) * m * n],
                                    &bd[t * k * n..(t + 1) * k * n],
                                    &mut da[t * m * k..(t + 1) * m * k],
                                    m,
                                    n,
                                    k,
                                );
                            }
                        }
                    });
                    acc(*b, &mut |db| {
                        if shared {
                            gemm_tn(ad, &g, db, batch * m, k, n);
                        } else {
                            for t in 0..batch {
                                gemm_tn(
                                    &ad[t * m * k..(t + 1) * m * k],
                                    &g[t * m * n..(t + 1) * m * n],
                                    &mut db[t * k * n..(t + 1) * k * n],
                                    m,
                                    k,
                                    n,
                                );
                            }
                        }
                    });
                }
                Op::Add { a, b } => {
                    acc(*a, &mut |da| da.iter_mut().zip(&g).for_each(|(d, x)| *d += x));
                    acc(*b, &mut |db| {
                        let len = db.len();
                        for chunk in g.chunks(len) {
                            db.iter_mut().zip(chunk).for_each(|(d, x)| *d += x);
                        }
                    });
                }
                Op::Mul { a, b } => {
                    let (ad, bd) = (val(*a).data(), val(*b).data());
                    acc(*a, &mut |da| {
                        for i in 0..da.len() {
                            da[i] += g[i] * bd[i];
                        }
                    });
                    acc(*b, &mut |db| {
                        for i in 0..db.len() {
                            db[i] += g[i] * ad[i];
                        }
                    });
                }
                Op::Scale { a, c } => {
                    acc(*a, &mut |da| da.iter_mut().zip(&g).for_each(|(d, x)| *d += c * x));
                }
                Op::ScaleBatch { a, factors } => {
                    acc(*a, &mut |da| {
                        let per = da.len() / factors.len();
                        for (i, d) in da.iter_mut().enumerate() {
                            *d += g[i] * factors[i / per];
                        }
                    });
                }
                Op::Sum { a } => {
                    acc(*a, &mut |da| da.iter_mut().for_each(|d| *d += g[0]));
                }
                Op::Softmax { a, axis } => {
                    let y = node.value.data();
                    let (outer, len, inner) = axis_layout(node.value.shape(), *axis);
                    acc(*a, &mut |da| {
                        for o in 0..outer {
                            for i in 0..inner {
                                let at = |l: usize| (o * len + l) * inner + i;
                                let dot: f64 = (0..len).map(|l| g[at(l)] * y[at(l)]).sum();
                                for l in 0..len {
                                    da[at(l)] += y[at(l)] * (g[at(l)] - dot);
                                }
                            }
                        }
                    });
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                } => {
                    let d = val(*gamma).numel();
                    let gm = val(*gamma).data();
                    acc(*gamma, &mut |dg| {
                        for (r, gr) in g.chunks(d).enumerate() {
                            for j in 0..d {
                                dg[j] += gr[j] * xhat[r * d + j];
                            }
                        }
                    });
                    acc(*beta, &mut |db| {
                        for gr in g.chunks(d) {
                            db.iter_mut().zip(gr).for_each(|(b, v)| *b += v);
                        }
                    });
                    acc(*x, &mut |dx| {
                        for (r, gr) in g.chunks(d).enumerate() {
                            let h = &xhat[r * d..(r + 1) * d];
                            let dh: Vec<f64> = gr.iter().zip(gm).map(|(a, b)| a * b).collect();
                            let mean_dh = dh.iter().sum::<f64>() / d as f64;
                            let mean_dh_h = dh.iter().zip(h).map(|(a, b)| a * b).sum::<f64>() / d as f64;
                            for j in 0..d {
                                dx[r * d + j] += inv_std[r] * (dh[j] - mean_dh - h[j] * mean_dh_h);
                            }
                        }
                    });
                }
                Op::Gelu { a } => {
                    let ad = val(*a).data();
                    acc(*a, &mut |da| {
                        for i in 0..da.len() {
                            da[i] += g[i] * gelu_grad(ad[i]);
                        }
                    });
                }
                Op::Linear { x, w, b } => {
                    let sw = val(*w).shape();
                    let (in_dim, out_dim) = (sw[0], sw[1]);
                    let rows = g.len() / out_dim;
                    let (xd, wd) = (val(*x).data(), val(*w).data());
                    acc(*x, &mut |dx| gemm_nt(&g, wd, dx, rows, out_dim, in_dim));
                    acc(*w, &mut |dw| gemm_tn(xd, &g, dw, rows, in_dim, out_dim));
                    if let Some(b) = b {
                        acc(*b, &mut |db| {
                            for gr in g.chunks(out_dim) {
                                db.iter_mut().zip(gr).for_each(|(d, v)| *d += v);
                            }
                        });
                    }
                }
                Op::Reshape { a } => {
                    acc(*a, &mut |da| da.iter_mut().zip(&g).for_each(|(d, x)| *d += x));
                }
                Op::Permute { a, axes } => {
                    let (back, _) = permute(&g, node.value.shape(), &invert(axes));
                    acc(*a, &mut |da| da.iter_mut().zip(&back).for_each(|(d, x)| *d += x));
                }
                Op::Concat { inputs, axis } => {
                    let (outer, total, inner) = axis_layout(node.value.shape(), *axis);
                    let mut start = 0;
                    for &v in inputs {
                        let len = val(v).shape()[*axis];
                        if needs(v) {
                            acc(v, &mut |dv| {
                                for o in 0..outer {
                                    let src = &g[(o * total + start) * inner..(o * total + start + len) * inner];
                                    let dst = &mut dv[o * len * inner..(o + 1) * len * inner];
                                    dst.iter_mut().zip(src).for_each(|(d, x)| *d += x);
                                }
                            });
                        }
                        start += len;
                    }
                }
                Op::Slice { a, axis, start } => {
                    let (outer, len, inner) = axis_layout(val(*a).shape(), *axis);
                    let width = node.value.shape()[*axis];
                    acc(*a, &mut |da| {
                        for o in 0..outer {
                            let dst = &mut da[(o * len + start) * inner..(o * len + start + width) * inner];
                            let src = &g[o * width * inner..(o + 1) * width * inner];
                            dst.iter_mut().zip(src).for_each(|(d, x)| *d += x);
                        }
                    });
                }
                Op::SoftmaxCrossEntropy { logits, labels, probs } => {
                    let b = labels.len();
                    let k = probs.len() / b;
                    acc(*logits, &mut |dl| {
                        for i in 0..b {
                            for j in 0..k {
                                let onehot = if labels[i] == j { 1.0 } else { 0.0 };
                                dl[i * k + j] += g[0] * (probs[i * k + j] - onehot) / b as f64;
                            }
                        }
                    });
                }
            }
        }

        let grads = grads
            .into_iter()
            .zip(&nodes)
            .map(|(g, node)| match (g, &node.op) {
                (Some(g), Op::Leaf) if node.requires_grad => {
                    Some(Tensor::new(node.value.shape().to_vec(), g).expect("grad matches value"))
                }
                _ => None,
            })
            .collect();
        Ok(Gradients { grads })
    }
}
