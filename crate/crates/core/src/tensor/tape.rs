use super::kernels::{self, ConvGeom};
use super::shape::{broadcast_shape, broadcast_strides, for_each_broadcast, numel, strides};
use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Relu(Var),
    Sigmoid(Var),
    MatMul { a: Var, b: Var, batch: usize, m: usize, k: usize, p: usize },
    Conv { x: Var, w: Var, b: Var, geom: ConvGeom },
    Transpose { x: Var, perm: Vec<usize> },
    Reshape(Var),
    Concat { parts: Vec<Var>, axis: usize },
    Slice { x: Var, axis: usize, start: usize },
    MeanOver { x: Var, axes: Vec<usize> },
    Sum(Var),
    Softmax(Var),
    Cosine { x: Var, norms: Vec<T>, batch: usize, n: usize, d: usize },
    Norm(Var),
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Linear record of operations; inputs always precede their outputs.
#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

/// Gradients of one backward pass, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, var: Var) -> Option<&[T]> {
        self.grads.get(var.0).and_then(|g| g.as_deref())
    }

    /// Gradient of `var`, or zeros of `len` if it did not reach the loss.
    pub fn get_or_zeros(&self, var: Var, len: usize) -> Vec<T> {
        self.get(var).map(<[T]>::to_vec).unwrap_or_else(|| vec![T::ZERO; len])
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a leaf; it takes part in differentiation if the tensor requires grad.
    pub fn leaf(&mut self, tensor: Tensor<T>) -> Var {
        let needs_grad = tensor.requires_grad();
        let mut value = tensor;
        value.clear_grad();
        self.push(value, Op::Leaf, needs_grad)
    }

    pub fn constant(&mut self, tensor: Tensor<T>) -> Var {
        let mut value = tensor;
        value.set_requires_grad(false);
        value.clear_grad();
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, var: Var) -> &Tensor<T> {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        self.nodes[var.0].value.shape()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    fn record(&mut self, shape: &[usize], data: Vec<T>, op: Op<T>, inputs: &[Var]) -> Var {
        let needs = self.needs(inputs);
        let value = Tensor::new(shape, data).expect("kernel produced consistent shape");
        self.push(value, op, needs)
    }

    fn binary(&mut self, name: &'static str, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Result<(Vec<usize>, Vec<T>)> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let out = broadcast_shape(&sa, &sb).map_err(|_| Error::shapes(name, &sa, &sb))?;
        let (da, db) = (self.value(a).data(), self.value(b).data());
        let mut data = vec![T::ZERO; numel(&out)];
        for_each_broadcast(&out, &broadcast_strides(&sa, &out), &broadcast_strides(&sb, &out), |o, ia, ib| {
            data[o] = f(da[ia], db[ib]);
        });
        Ok((out, data))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (shape, data) = self.binary("add", a, b, |x, y| x + y)?;
        Ok(self.record(&shape, data, Op::Add(a, b), &[a, b]))
    }

    /// Elementwise difference; also the broadcast subtraction of a size-one-axis slice.
    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (shape, data) = self.binary("sub", a, b, |x, y| x - y)?;
        Ok(self.record(&shape, data, Op::Sub(a, b), &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (shape, data) = self.binary("mul", a, b, |x, y| x * y)?;
        Ok(self.record(&shape, data, Op::Mul(a, b), &[a, b]))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let f = T::from_f64(factor);
        let v = self.value(x);
        let shape = v.shape().to_vec();
        let data = v.data().iter().map(|&e| e * f).collect();
        self.record(&shape, data, Op::Scale(x, f), &[x])
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let shape = v.shape().to_vec();
        let data = v.data().iter().map(|&e| if e > T::ZERO { e } else { T::ZERO }).collect();
        self.record(&shape, data, Op::Relu(x), &[x])
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let shape = v.shape().to_vec();
        let data = v.data().iter().map(|&e| sigmoid(e)).collect();
        self.record(&shape, data, Op::Sigmoid(x), &[x])
    }

    /// `[m, k] x [k, p]`, or batched `[b, m, k] x [b, k, p]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let (batch, m, k, k2, p) = match (sa.as_slice(), sb.as_slice()) {
            (&[m, k], &[k2, p]) => (1, m, k, k2, p),
            (&[b1, m, k], &[b2, k2, p]) if b1 == b2 => (b1, m, k, k2, p),
            _ => return Err(Error::shapes("matmul", &sa, &sb)),
        };
        if k != k2 {
            return Err(Error::shapes("matmul", &sa, &sb));
        }
        let data = kernels::matmul(self.value(a).data(), self.value(b).data(), batch, m, k, p);
        let shape = if sa.len() == 2 { vec![m, p] } else { vec![batch, m, p] };
        Ok(self.record(&shape, data, Op::MatMul { a, b, batch, m, k, p }, &[a, b]))
    }

    fn conv(&mut self, name: &'static str, x: Var, w: Var, b: Var, kh: usize, kw: usize) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        let sw = self.shape(w).to_vec();
        let sb = self.shape(b).to_vec();
        if kh.is_multiple_of(2) || kw.is_multiple_of(2) {
            return Err(Error::Config(format!("{name}: kernel size {kh}x{kw} must be odd")));
        }
        let &[rows, cols, c_in] = sx.as_slice() else {
            return Err(Error::shape(name, format!("input must be rank 3 [A, B, C_in], got {sx:?}")));
        };
        let c_out = *sw.last().expect("weights have rank >= 2");
        if numel(&sw) != kh * kw * c_in * c_out {
            return Err(Error::shape(name, format!("input {sx:?} does not match weights {sw:?}")));
        }
        if sb != [c_out] {
            return Err(Error::shape(name, format!("bias {sb:?} does not match {c_out} output channels")));
        }
        let geom = ConvGeom { rows, cols, c_in, c_out, kh, kw };
        let data = kernels::conv2d(self.value(x).data(), self.value(w).data(), self.value(b).data(), geom);
        Ok(self.record(&[rows, cols, c_out], data, Op::Conv { x, w, b, geom }, &[x, w, b]))
    }

    /// Per-joint temporal convolution: `x[N, T, C_in]`, `w[k, C_in, C_out]`, odd `k`.
    pub fn conv_temporal(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let sw = self.shape(w).to_vec();
        if sw.len() != 3 {
            return Err(Error::shape("conv_temporal", format!("weights must be [k, C_in, C_out], got {sw:?}")));
        }
        if sw[1] != self.shape(x).get(2).copied().unwrap_or(0) {
            return Err(Error::shapes("conv_temporal", self.shape(x), &sw));
        }
        self.conv("conv_temporal", x, w, b, 1, sw[0])
    }

    /// Convolution over both leading axes: `x[A, B, C_in]`, `w[kh, kw, C_in, C_out]`.
    pub fn conv_spatial_temporal(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let sw = self.shape(w).to_vec();
        if sw.len() != 4 {
            return Err(Error::shape("conv_spatial_temporal", format!("weights must be rank 4, got {sw:?}")));
        }
        if sw[2] != self.shape(x).get(2).copied().unwrap_or(0) {
            return Err(Error::shapes("conv_spatial_temporal", self.shape(x), &sw));
        }
        self.conv("conv_spatial_temporal", x, w, b, sw[0], sw[1])
    }

    /// Channel mixing at every location: `x[A, B, C_in]`, `w[C_in, C_out]`.
    pub fn conv_1x1(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let sw = self.shape(w).to_vec();
        if sw.len() != 2 || sw[0] != self.shape(x).get(2).copied().unwrap_or(0) {
            return Err(Error::shapes("conv_1x1", self.shape(x), &sw));
        }
        self.conv("conv_1x1", x, w, b, 1, 1)
    }

    /// Permutes axes so that output axis `i` is input axis `perm[i]`.
    pub fn transpose(&mut self, x: Var, perm: &[usize]) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let mut seen = vec![false; shape.len()];
        let valid = perm.len() == shape.len() && perm.iter().all(|&p| p < shape.len() && !std::mem::replace(&mut seen[p], true));
        if !valid {
            return Err(Error::shape("transpose", format!("permutation {perm:?} invalid for rank {}", shape.len())));
        }
        let (data, out_shape) = kernels::transpose(self.value(x).data(), &shape, perm);
        Ok(self.record(&out_shape, data, Op::Transpose { x, perm: perm.to_vec() }, &[x]))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let from = self.shape(x);
        if numel(shape) != numel(from) || shape.is_empty() || shape.contains(&0) {
            return Err(Error::shapes("reshape", from, shape));
        }
        let data = self.value(x).data().to_vec();
        Ok(self.record(shape, data, Op::Reshape(x), &[x]))
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = parts.first().ok_or_else(|| Error::shape("concat", "no inputs"))?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(Error::shape("concat", format!("axis {axis} out of range for rank {}", base.len())));
        }
        let mut total = 0;
        for &p in parts {
            let s = self.shape(p);
            let compatible = s.len() == base.len() && s.iter().zip(&base).enumerate().all(|(i, (a, b))| i == axis || a == b);
            if !compatible {
                return Err(Error::shapes("concat", &base, s));
            }
            total += s[axis];
        }
        let mut out_shape = base.clone();
        out_shape[axis] = total;
        let (outer, _, inner) = kernels::split_at_axis(&out_shape, axis);
        let mut data = Vec::with_capacity(numel(&out_shape));
        for o in 0..outer {
            for &p in parts {
                let v = self.value(p);
                let chunk = v.shape()[axis] * inner;
                data.extend_from_slice(&v.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        Ok(self.record(&out_shape, data, Op::Concat { parts: parts.to_vec(), axis }, parts))
    }

    /// Contiguous range `start..start + len` along `axis`.
    pub fn slice(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() || len == 0 || start + len > shape[axis] {
            return Err(Error::shape("slice", format!("range {start}..{} on axis {axis} of {shape:?}", start + len)));
        }
        let (outer, dim, inner) = kernels::split_at_axis(&shape, axis);
        let src = self.value(x).data();
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = o * dim * inner + start * inner;
            data.extend_from_slice(&src[base..base + len * inner]);
        }
        let mut out_shape = shape;
        out_shape[axis] = len;
        Ok(self.record(&out_shape, data, Op::Slice { x, axis, start }, &[x]))
    }

    /// Mean over `axes`, which are removed from the shape (a full reduction yields `[1]`).
    pub fn mean_over(&mut self, x: Var, axes: &[usize]) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let mut axes = axes.to_vec();
        axes.sort_unstable();
        axes.dedup();
        if axes.iter().any(|&a| a >= shape.len()) {
            return Err(Error::shape("mean_over", format!("axes {axes:?} out of range for {shape:?}")));
        }
        let kept: Vec<usize> = shape.iter().enumerate().filter(|(i, _)| !axes.contains(i)).map(|(_, &d)| d).collect();
        let keep_shape: Vec<usize> = shape.iter().enumerate().map(|(i, &d)| if axes.contains(&i) { 1 } else { d }).collect();
        let count: usize = axes.iter().map(|&a| shape[a]).product();
        let mut acc = vec![T::ZERO; numel(&keep_shape)];
        let src = self.value(x).data();
        let dst_strides = broadcast_strides(&keep_shape, &shape);
        for_each_broadcast(&shape, &dst_strides, &strides(&shape), |_, id, is| acc[id] += src[is]);
        let inv = T::ONE / T::from_f64(count as f64);
        acc.iter_mut().for_each(|v| *v *= inv);
        let out_shape = if kept.is_empty() { vec![1] } else { kept };
        Ok(self.record(&out_shape, acc, Op::MeanOver { x, axes }, &[x]))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let total = self.value(x).data().iter().copied().sum();
        self.record(&[1], vec![total], Op::Sum(x), &[x])
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let n = self.value(x).len();
        let s = self.sum(x);
        self.scale(s, 1.0 / n as f64)
    }

    /// Softmax over the last axis, with max subtraction.
    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let shape = v.shape().to_vec();
        let data = kernels::softmax_last(v.data(), *shape.last().expect("rank >= 1"));
        self.record(&shape, data, Op::Softmax(x), &[x])
    }

    /// Cosine similarity of all row pairs over the last two axes: `[.., N, D] -> [.., N, N]`.
    pub fn cosine_rows(&mut self, x: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if shape.len() < 2 {
            return Err(Error::shape("cosine_rows", format!("need rank >= 2, got {shape:?}")));
        }
        let (n, d) = (shape[shape.len() - 2], shape[shape.len() - 1]);
        let batch = numel(&shape[..shape.len() - 2]);
        let (data, norms) = kernels::cosine_rows(self.value(x).data(), batch, n, d);
        let mut out_shape = shape[..shape.len() - 1].to_vec();
        out_shape.push(n);
        Ok(self.record(&out_shape, data, Op::Cosine { x, norms, batch, n, d }, &[x]))
    }

    /// Euclidean norm over the last axis, which is removed.
    pub fn norm_last(&mut self, x: Var) -> Var {
        let shape = self.shape(x).to_vec();
        let d = *shape.last().expect("rank >= 1");
        let data = kernels::norm_last(self.value(x).data(), d);
        let out_shape = if shape.len() == 1 { vec![1] } else { shape[..shape.len() - 1].to_vec() };
        self.record(&out_shape, data, Op::Norm(x), &[x])
    }

    /// Reverse pass from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::Contract(format!("backward needs a scalar loss, got shape {:?}", lv.shape())));
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![T::ONE]);
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node<T>, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let out_shape = node.value.shape();
        let mut give = |v: Var, delta: Vec<T>| {
            if !self.nodes[v.0].needs_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(acc) => acc.iter_mut().zip(&delta).for_each(|(a, &d)| *a += d),
                slot @ None => *slot = Some(delta),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                give(*a, self.unbroadcast(g, out_shape, *a));
                give(*b, self.unbroadcast(g, out_shape, *b));
            }
            Op::Sub(a, b) => {
                give(*a, self.unbroadcast(g, out_shape, *a));
                let neg: Vec<T> = g.iter().map(|&v| -v).collect();
                give(*b, self.unbroadcast(&neg, out_shape, *b));
            }
            Op::Mul(a, b) => {
                for (this, other) in [(*a, *b), (*b, *a)] {
                    if !self.nodes[this.0].needs_grad {
                        continue;
                    }
                    let so = self.shape(other);
                    let od = self.value(other).data();
                    let mut prod = vec![T::ZERO; g.len()];
                    for_each_broadcast(out_shape, &strides(out_shape), &broadcast_strides(so, out_shape), |o, _, io| {
                        prod[o] = g[o] * od[io];
                    });
                    give(this, self.unbroadcast(&prod, out_shape, this));
                }
            }
            Op::Scale(x, f) => give(*x, g.iter().map(|&v| v * *f).collect()),
            Op::Relu(x) => {
                let xd = self.value(*x).data();
                give(*x, g.iter().zip(xd).map(|(&gv, &xv)| if xv > T::ZERO { gv } else { T::ZERO }).collect());
            }
            Op::Sigmoid(x) => {
                let y = node.value.data();
                give(*x, g.iter().zip(y).map(|(&gv, &yv)| gv * yv * (T::ONE - yv)).collect());
            }
            Op::MatMul { a, b, batch, m, k, p } => {
                let (da, db) =
                    kernels::matmul_backward(g, self.value(*a).data(), self.value(*b).data(), *batch, *m, *k, *p);
                give(*a, da);
                give(*b, db);
            }
            Op::Conv { x, w, b, geom } => {
                let (dx, dw, db) = kernels::conv2d_backward(g, self.value(*x).data(), self.value(*w).data(), *geom);
                give(*x, dx);
                give(*w, dw);
                give(*b, db);
            }
            Op::Transpose { x, perm } => {
                let inv = kernels::inverse_perm(perm);
                give(*x, kernels::transpose(g, out_shape, &inv).0);
            }
            Op::Reshape(x) => give(*x, g.to_vec()),
            Op::Concat { parts, axis } => {
                let (outer, _, inner) = kernels::split_at_axis(out_shape, *axis);
                let mut offset = 0;
                for &p in parts {
                    let dim = self.shape(p)[*axis];
                    let mut d = Vec::with_capacity(outer * dim * inner);
                    for o in 0..outer {
                        let base = o * out_shape[*axis] * inner + offset * inner;
                        d.extend_from_slice(&g[base..base + dim * inner]);
                    }
                    offset += dim;
                    give(p, d);
                }
            }
            Op::Slice { x, axis, start } => {
                let in_shape = self.shape(*x);
                let (outer, dim, inner) = kernels::split_at_axis(in_shape, *axis);
                let len = out_shape[*axis];
                let mut d = vec![T::ZERO; numel(in_shape)];
                for o in 0..outer {
                    let dst = o * dim * inner + start * inner;
                    d[dst..dst + len * inner].copy_from_slice(&g[o * len * inner..(o + 1) * len * inner]);
                }
                give(*x, d);
            }
            Op::MeanOver { x, axes } => {
                let in_shape = self.shape(*x);
                let keep: Vec<usize> =
                    in_shape.iter().enumerate().map(|(i, &d)| if axes.contains(&i) { 1 } else { d }).collect();
                let count: usize = axes.iter().map(|&a| in_shape[a]).product();
                let inv = T::ONE / T::from_f64(count as f64);
                let mut d = vec![T::ZERO; numel(in_shape)];
                for_each_broadcast(in_shape, &strides(in_shape), &broadcast_strides(&keep, in_shape), |o, _, ik| {
                    d[o] = g[ik] * inv;
                });
                give(*x, d);
            }
            Op::Sum(x) => give(*x, vec![g[0]; self.value(*x).len()]),
            Op::Softmax(x) => {
                let cols = *out_shape.last().expect("rank >= 1");
                give(*x, kernels::softmax_last_backward(g, node.value.data(), cols));
            }
            Op::Cosine { x, norms, batch, n, d } => {
                let dx = kernels::cosine_rows_backward(
                    g,
                    self.value(*x).data(),
                    node.value.data(),
                    norms,
                    *batch,
                    *n,
                    *d,
                );
                give(*x, dx);
            }
            Op::Norm(x) => {
                let xv = self.value(*x);
                let d = *xv.shape().last().expect("rank >= 1");
                give(*x, kernels::norm_last_backward(g, xv.data(), node.value.data(), d));
            }
        }
    }

    /// Sums `g` (of `out_shape`) back down to the shape of `target`.
    fn unbroadcast(&self, g: &[T], out_shape: &[usize], target: Var) -> Vec<T> {
        let ts = self.shape(target);
        if ts == out_shape {
            return g.to_vec();
        }
        let mut d = vec![T::ZERO; numel(ts)];
        for_each_broadcast(out_shape, &strides(out_shape), &broadcast_strides(ts, out_shape), |o, _, it| {
            d[it] += g[o];
        });
        d
    }
}

#[inline]
pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::ZERO {
        T::ONE / (T::ONE + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::ONE + e)
    }
}
