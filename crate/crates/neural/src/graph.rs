//! Reverse-mode automatic differentiation on a tape of layer-level ops.
//!
//! Activations are row-major with the batch as the leading dimension:
//! `[batch, channels, length]` for convolutions and `[batch, features]`
//! for linear layers.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::{matmul, Mat, Scalar};
use crate::tensor::Tensor;

pub type NodeId = usize;

enum Op<T> {
    Input,
    Param(usize),
    Conv1d {
        x: NodeId,
        w: NodeId,
        b: NodeId,
        stride: usize,
        // per batch item: [in_ch * kernel, out_len]
        cols: Vec<T>,
    },
    Linear {
        x: NodeId,
        w: NodeId,
        b: NodeId,
    },
    Gelu {
        x: NodeId,
    },
    Add {
        a: NodeId,
        b: NodeId,
    },
    Reshape {
        x: NodeId,
    },
    CrossEntropy {
        logits: NodeId,
        targets: Vec<usize>,
        epsilon: f64,
        probs: Vec<T>,
    },
}

struct Node<T> {
    shape: Vec<usize>,
    // empty for parameters, which are read from the parameter slice
    value: Vec<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// A recorded forward computation over borrowed parameters.
pub struct Graph<'p, T: Scalar> {
    params: &'p [Tensor<T>],
    nodes: Vec<Node<T>>,
}

/// Gradient of the loss with respect to each parameter, in parameter order.
pub type Gradients<T> = Vec<Vec<T>>;

const INV_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// `x Phi(x)` with the exact Gaussian CDF.
pub fn gelu<T: Scalar>(x: T) -> T {
    x * T::of(0.5) * (T::one() + (x * T::of(INV_SQRT_2)).erf())
}

fn gelu_grad<T: Scalar>(x: T) -> T {
    let cdf = T::of(0.5) * (T::one() + (x * T::of(INV_SQRT_2)).erf());
    let pdf = T::of(INV_SQRT_2PI) * (-(x * x) * T::of(0.5)).exp();
    cdf + x * pdf
}

/// Row-wise softmax of `[rows, k]` logits.
pub fn softmax<T: Scalar>(logits: &[T], k: usize) -> Vec<T> {
    let mut out = logits.to_vec();
    for row in out.chunks_mut(k) {
        let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum = sum + *v;
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
    out
}

impl<'p, T: Scalar> Graph<'p, T> {
    pub fn new(params: &'p [Tensor<T>]) -> Self {
        Self {
            params,
            nodes: Vec::new(),
        }
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id].shape
    }

    pub fn value(&self, id: NodeId) -> &[T] {
        match self.nodes[id].op {
            Op::Param(p) => self.params[p].data(),
            _ => &self.nodes[id].value,
        }
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<T>, op: Op<T>, needs_grad: bool) -> NodeId {
        self.nodes.push(Node {
            shape,
            value,
            op,
            needs_grad,
        });
        self.nodes.len() - 1
    }

    fn grad_of(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|&i| self.nodes[i].needs_grad)
    }

    fn check(&self, what: &str, id: NodeId, expected: &[usize]) -> Result<()> {
        if self.shape(id) != expected {
            return Err(Error::Shape {
                what: what.into(),
                expected: expected.to_vec(),
                actual: self.shape(id).to_vec(),
            });
        }
        Ok(())
    }

    /// Constant input (no gradient).
    pub fn input(&mut self, shape: Vec<usize>, data: Vec<T>) -> Result<NodeId> {
        let n: usize = shape.iter().product();
        if n != data.len() || n == 0 {
            return Err(Error::Shape {
                what: "graph input".into(),
                expected: shape,
                actual: vec![data.len()],
            });
        }
        Ok(self.push(shape, data, Op::Input, false))
    }

    pub fn param(&mut self, index: usize) -> NodeId {
        let p = &self.params[index];
        self.push(p.shape().to_vec(), Vec::new(), Op::Param(index), true)
    }

    /// 1-D convolution (no padding). `x: [B, Cin, L]`, `w: [Cout, Cin, K]`,
    /// `b: [Cout]`; output `[B, Cout, (L - K) / stride + 1]`.
    pub fn conv1d(&mut self, x: NodeId, w: NodeId, b: NodeId, stride: usize) -> Result<NodeId> {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        if xs.len() != 3 || ws.len() != 3 || xs[1] != ws[1] || stride == 0 || xs[2] < ws[2] {
            return Err(Error::Shape {
                what: "conv1d input vs weight".into(),
                expected: vec![xs.first().copied().unwrap_or(0), ws[1], ws[2].max(1)],
                actual: xs,
            });
        }
        let (batch, cin, lin) = (xs[0], xs[1], xs[2]);
        let (cout, k) = (ws[0], ws[2]);
        self.check("conv1d bias", b, &[cout])?;
        let lout = (lin - k) / stride + 1;
        let ck = cin * k;

        let xv = self.value(x);
        let wv = self.value(w);
        let bv = self.value(b);
        let mut cols = vec![T::zero(); batch * ck * lout];
        let mut out = vec![T::zero(); batch * cout * lout];
        cols.par_chunks_mut(ck * lout)
            .zip(out.par_chunks_mut(cout * lout))
            .enumerate()
            .for_each(|(n, (col, y))| {
                let xb = &xv[n * cin * lin..(n + 1) * cin * lin];
                for c in 0..cin {
                    for t in 0..k {
                        let row = &mut col[(c * k + t) * lout..(c * k + t + 1) * lout];
                        let src = &xb[c * lin + t..];
                        for (l, r) in row.iter_mut().enumerate() {
                            *r = src[l * stride];
                        }
                    }
                }
                for (o, yrow) in y.chunks_mut(lout).enumerate() {
                    yrow.iter_mut().for_each(|v| *v = bv[o]);
                }
                matmul(Mat::new(wv, cout, ck), Mat::new(col, ck, lout), T::one(), y);
            });
        let needs = self.grad_of(&[x, w, b]);
        Ok(self.push(
            vec![batch, cout, lout],
            out,
            Op::Conv1d { x, w, b, stride, cols },
            needs,
        ))
    }

    /// `x: [B, in]`, `w: [out, in]`, `b: [out]` gives `x w^T + b`.
    pub fn linear(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[1] {
            return Err(Error::Shape {
                what: "linear input".into(),
                expected: vec![xs.first().copied().unwrap_or(0), ws.get(1).copied().unwrap_or(0)],
                actual: xs,
            });
        }
        let (batch, inp, outp) = (xs[0], xs[1], ws[0]);
        self.check("linear bias", b, &[outp])?;
        let bv = self.value(b);
        let mut out: Vec<T> = (0..batch).flat_map(|_| bv.iter().copied()).collect();
        matmul(
            Mat::new(self.value(x), batch, inp),
            Mat::new(self.value(w), outp, inp).t(),
            T::one(),
            &mut out,
        );
        let needs = self.grad_of(&[x, w, b]);
        Ok(self.push(vec![batch, outp], out, Op::Linear { x, w, b }, needs))
    }

    pub fn gelu(&mut self, x: NodeId) -> NodeId {
        let out: Vec<T> = self.value(x).iter().map(|&v| gelu(v)).collect();
        let needs = self.grad_of(&[x]);
        self.push(self.shape(x).to_vec(), out, Op::Gelu { x }, needs)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let shape = self.shape(a).to_vec();
        self.check("add operand", b, &shape)?;
        let out = self.value(a).iter().zip(self.value(b)).map(|(&p, &q)| p + q).collect();
        let needs = self.grad_of(&[a, b]);
        Ok(self.push(shape, out, Op::Add { a, b }, needs))
    }

    pub fn reshape(&mut self, x: NodeId, shape: Vec<usize>) -> Result<NodeId> {
        if shape.iter().product::<usize>() != self.value(x).len() {
            return Err(Error::Shape {
                what: "reshape".into(),
                expected: shape,
                actual: self.shape(x).to_vec(),
            });
        }
        let out = self.value(x).to_vec();
        let needs = self.grad_of(&[x]);
        Ok(self.push(shape, out, Op::Reshape { x }, needs))
    }

    /// Mean label-smoothed cross-entropy: the target distribution puts
    /// `1 - epsilon + epsilon / K` on the true class and `epsilon / K`
    /// elsewhere.
    pub fn cross_entropy(&mut self, logits: NodeId, targets: &[usize], epsilon: f64) -> Result<NodeId> {
        let s = self.shape(logits).to_vec();
        if s.len() != 2 || s[0] != targets.len() {
            return Err(Error::Shape {
                what: "cross-entropy logits".into(),
                expected: vec![targets.len(), s.last().copied().unwrap_or(0)],
                actual: s,
            });
        }
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::invalid(format!(
                "label smoothing must lie in [0, 1), got {epsilon}"
            )));
        }
        let (batch, k) = (s[0], s[1]);
        if let Some(&bad) = targets.iter().find(|&&t| t >= k) {
            return Err(Error::invalid(format!("target class {bad} outside [0, {k})")));
        }
        let z = self.value(logits);
        let mut total = 0.0f64;
        for (row, &t) in z.chunks(k).zip(targets) {
            let max = row.iter().fold(f64::NEG_INFINITY, |m, v| m.max(v.f64()));
            let lse = max + row.iter().map(|v| (v.f64() - max).exp()).sum::<f64>().ln();
            let mean_z = row.iter().map(|v| v.f64()).sum::<f64>() / k as f64;
            total += lse - (1.0 - epsilon) * row[t].f64() - epsilon * mean_z;
        }
        let probs = softmax(z, k);
        let loss = T::of(total / batch as f64);
        let needs = self.grad_of(&[logits]);
        Ok(self.push(
            vec![1],
            vec![loss],
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                epsilon,
                probs,
            },
            needs,
        ))
    }

    /// Back-propagates from a scalar node.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients<T>> {
        let node = self
            .nodes
            .get(loss)
            .ok_or_else(|| Error::State("backward called before any forward op was recorded".into()))?;
        if node.shape != [1] {
            return Err(Error::State(format!(
                "backward needs a scalar node, got shape {:?}",
                node.shape
            )));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..=loss).map(|_| None).collect();
        grads[loss] = Some(vec![T::one()]);
        let mut param_grads: Gradients<T> = self.params.iter().map(|p| vec![T::zero(); p.len()]).collect();

        for id in (0..=loss).rev() {
            let Some(gy) = grads[id].take() else { continue };
            if !self.nodes[id].needs_grad {
                continue;
            }
            match &self.nodes[id].op {
                Op::Input => {}
                Op::Param(p) => {
                    for (acc, g) in param_grads[*p].iter_mut().zip(&gy) {
                        *acc = *acc + *g;
                    }
                }
                Op::Reshape { x } => accumulate(&mut grads, *x, gy),
                Op::Add { a, b } => {
                    accumulate(&mut grads, *b, gy.clone());
                    accumulate(&mut grads, *a, gy);
                }
                Op::Gelu { x } => {
                    let gx = self
                        .value(*x)
                        .iter()
                        .zip(&gy)
                        .map(|(&v, &g)| g * gelu_grad(v))
                        .collect();
                    accumulate(&mut grads, *x, gx);
                }
                Op::CrossEntropy {
                    logits,
                    targets,
                    epsilon,
                    probs,
                } => {
                    let k = self.shape(*logits)[1];
                    let batch = targets.len();
                    let scale = gy[0] / T::of(batch as f64);
                    let off = T::of(epsilon / k as f64);
                    let on = T::of(1.0 - epsilon) + off;
                    let mut gz = probs.clone();
                    for (row, &t) in gz.chunks_mut(k).zip(targets) {
                        for (c, v) in row.iter_mut().enumerate() {
                            let q = if c == t { on } else { off };
                            *v = (*v - q) * scale;
                        }
                    }
                    accumulate(&mut grads, *logits, gz);
                }
                Op::Linear { x, w, b } => {
                    let (batch, inp) = (self.shape(*x)[0], self.shape(*x)[1]);
                    let outp = self.shape(*w)[0];
                    if self.nodes[*w].needs_grad {
                        let mut gw = vec![T::zero(); outp * inp];
                        matmul(
                            Mat::new(&gy, batch, outp).t(),
                            Mat::new(self.value(*x), batch, inp),
                            T::zero(),
                            &mut gw,
                        );
                        accumulate(&mut grads, *w, gw);
                    }
                    if self.nodes[*b].needs_grad {
                        let mut gb = vec![T::zero(); outp];
                        for row in gy.chunks(outp) {
                            for (acc, g) in gb.iter_mut().zip(row) {
                                *acc = *acc + *g;
                            }
                        }
                        accumulate(&mut grads, *b, gb);
                    }
                    if self.nodes[*x].needs_grad {
                        let mut gx = vec![T::zero(); batch * inp];
                        matmul(
                            Mat::new(&gy, batch, outp),
                            Mat::new(self.value(*w), outp, inp),
                            T::zero(),
                            &mut gx,
                        );
                        accumulate(&mut grads, *x, gx);
                    }
                }
                Op::Conv1d { x, w, b, stride, cols } => {
                    let xs = self.shape(*x);
                    let (batch, cin, lin) = (xs[0], xs[1], xs[2]);
                    let ws = self.shape(*w);
                    let (cout, k) = (ws[0], ws[2]);
                    let lout = self.nodes[id].shape[2];
                    let ck = cin * k;
                    if self.nodes[*w].needs_grad {
                        let mut gw = vec![T::zero(); cout * ck];
                        for n in 0..batch {
                            matmul(
                                Mat::new(&gy[n * cout * lout..], cout, lout),
                                Mat::new(&cols[n * ck * lout..], ck, lout).t(),
                                T::one(),
                                &mut gw,
                            );
                        }
                        accumulate(&mut grads, *w, gw);
                    }
                    if self.nodes[*b].needs_grad {
                        let mut gb = vec![T::zero(); cout];
                        for n in 0..batch {
                            for (o, acc) in gb.iter_mut().enumerate() {
                                let row = &gy[(n * cout + o) * lout..(n * cout + o + 1) * lout];
                                *acc = row.iter().fold(*acc, |s, &g| s + g);
                            }
                        }
                        accumulate(&mut grads, *b, gb);
                    }
                    if self.nodes[*x].needs_grad {
                        let wv = self.value(*w);
                        let stride = *stride;
                        let mut gx = vec![T::zero(); batch * cin * lin];
                        gx.par_chunks_mut(cin * lin).enumerate().for_each(|(n, gxb)| {
                            let mut gcols = vec![T::zero(); ck * lout];
                            matmul(
                                Mat::new(wv, cout, ck).t(),
                                Mat::new(&gy[n * cout * lout..], cout, lout),
                                T::zero(),
                                &mut gcols,
                            );
                            for c in 0..cin {
                                for t in 0..k {
                                    let row = &gcols[(c * k + t) * lout..(c * k + t + 1) * lout];
                                    for (l, &g) in row.iter().enumerate() {
                                        let idx = c * lin + l * stride + t;
                                        gxb[idx] = gxb[idx] + g;
                                    }
                                }
                            }
                        });
                        accumulate(&mut grads, *x, gx);
                    }
                }
            }
        }
        Ok(param_grads)
    }
}

fn accumulate<T: Scalar>(grads: &mut [Option<Vec<T>>], id: NodeId, g: Vec<T>) {
    match &mut grads[id] {
        Some(acc) => {
            for (a, v) in acc.iter_mut().zip(g) {
                *a = *a + v;
            }
        }
        slot @ None => *slot = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gelu_values() {
        assert_eq!(gelu(0.0f64), 0.0);
        assert!((gelu(1.0f64) - 0.841_344_746_068_542_9).abs() < 1e-12);
        assert!((gelu(10.0f64) - 10.0).abs() < 1e-6);
        assert!(gelu(-10.0f64).abs() < 1e-6);
    }

    #[test]
    fn gelu_grad_matches_difference() {
        for &x in &[-3.0f64, -0.5, 0.0, 0.7, 2.5] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((gelu_grad(x) - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let z = [1.0f32, 2.0, 3.0, -100.0, 0.0, 100.0];
        let p = softmax(&z, 3);
        for row in p.chunks(3) {
            assert!((row.iter().sum::<f32>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn uniform_logits_give_log_k() {
        let params: Vec<Tensor<f64>> = Vec::new();
        for eps in [0.0, 0.1, 0.5, 0.99] {
            let mut g = Graph::new(&params);
            let z = g.input(vec![2, 1000], vec![0.0; 2000]).unwrap();
            let l = g.cross_entropy(z, &[3, 999], eps).unwrap();
            assert!((g.value(l)[0] - 1000f64.ln()).abs() < 1e-9);
        }
    }

    #[test]
    fn unsmoothed_equals_plain_cross_entropy() {
        let params: Vec<Tensor<f64>> = Vec::new();
        let z = vec![0.3, -1.2, 2.0, 0.5, 0.1, -0.4];
        let mut g = Graph::new(&params);
        let zi = g.input(vec![2, 3], z.clone()).unwrap();
        let l = g.cross_entropy(zi, &[2, 0], 0.0).unwrap();
        let p = softmax(&z, 3);
        let want = -(p[2].ln() + p[3].ln()) / 2.0;
        assert!((g.value(l)[0] - want).abs() < 1e-12);
    }

    #[test]
    fn bad_target_rejected() {
        let params: Vec<Tensor<f64>> = Vec::new();
        let mut g = Graph::new(&params);
        let z = g.input(vec![1, 3], vec![0.0; 3]).unwrap();
        assert!(g.cross_entropy(z, &[3], 0.1).is_err());
        assert!(g.cross_entropy(z, &[0], 1.0).is_err());
    }

    #[test]
    fn backward_on_empty_graph_is_state_error() {
        let params: Vec<Tensor<f64>> = Vec::new();
        let g = Graph::new(&params);
        assert!(matches!(g.backward(0), Err(Error::State(_))));
    }

    #[test]
    fn backward_needs_scalar() {
        let params: Vec<Tensor<f64>> = Vec::new();
        let mut g = Graph::new(&params);
        let x = g.input(vec![2], vec![1.0, 2.0]).unwrap();
        assert!(matches!(g.backward(x), Err(Error::State(_))));
    }

    #[test]
    fn conv_matches_direct_sum() {
        let w: Vec<f64> = (0..2 * 3 * 3).map(|v| (v as f64 * 0.37).sin()).collect();
        let params = vec![
            Tensor::new(vec![2, 3, 3], w.clone()).unwrap(),
            Tensor::new(vec![2], vec![0.5, -0.25]).unwrap(),
        ];
        let x: Vec<f64> = (0..2 * 3 * 11).map(|v| (v as f64 * 0.11).cos()).collect();
        let mut g = Graph::new(&params);
        let xi = g.input(vec![2, 3, 11], x.clone()).unwrap();
        let wi = g.param(0);
        let bi = g.param(1);
        let y = g.conv1d(xi, wi, bi, 2).unwrap();
        assert_eq!(g.shape(y), &[2, 2, 5]);
        let yv = g.value(y);
        for n in 0..2 {
            for o in 0..2 {
                for l in 0..5 {
                    let mut want = params[1].data()[o];
                    for c in 0..3 {
                        for t in 0..3 {
                            want += w[(o * 3 + c) * 3 + t] * x[(n * 3 + c) * 11 + 2 * l + t];
                        }
                    }
                    assert!((yv[(n * 2 + o) * 5 + l] - want).abs() < 1e-12);
                }
            }
        }
    }
}
