//! Slice-level forward and backward kernels behind the tape operations.

use super::shape::{numel, strides};
use super::Scalar;

/// Row norms below this are treated as zero by [`cosine_rows`].
pub const COSINE_EPS: f64 = 1e-8;

/// Guard for the norm division in [`norm_last_backward`].
pub const NORM_EPS: f64 = 1e-12;

/// Batched `[batch, m, k] x [batch, k, p]`.
pub fn matmul<T: Scalar>(a: &[T], b: &[T], batch: usize, m: usize, k: usize, p: usize) -> Vec<T> {
    let mut out = vec![T::ZERO; batch * m * p];
    for bi in 0..batch {
        let a = &a[bi * m * k..(bi + 1) * m * k];
        let b = &b[bi * k * p..(bi + 1) * k * p];
        let c = &mut out[bi * m * p..(bi + 1) * m * p];
        for i in 0..m {
            let row = &mut c[i * p..(i + 1) * p];
            for kk in 0..k {
                let av = a[i * k + kk];
                if av == T::ZERO {
                    continue;
                }
                for (cv, &bv) in row.iter_mut().zip(&b[kk * p..(kk + 1) * p]) {
                    *cv += av * bv;
                }
            }
        }
    }
    out
}

/// Gradients of [`matmul`]: `dA = dC Bᵀ`, `dB = Aᵀ dC`.
pub fn matmul_backward<T: Scalar>(
    grad: &[T],
    a: &[T],
    b: &[T],
    batch: usize,
    m: usize,
    k: usize,
    p: usize,
) -> (Vec<T>, Vec<T>) {
    let mut da = vec![T::ZERO; batch * m * k];
    let mut db = vec![T::ZERO; batch * k * p];
    for bi in 0..batch {
        let g = &grad[bi * m * p..(bi + 1) * m * p];
        let a = &a[bi * m * k..(bi + 1) * m * k];
        let b = &b[bi * k * p..(bi + 1) * k * p];
        let da = &mut da[bi * m * k..(bi + 1) * m * k];
        let db = &mut db[bi * k * p..(bi + 1) * k * p];
        for i in 0..m {
            let grow = &g[i * p..(i + 1) * p];
            for kk in 0..k {
                let brow = &b[kk * p..(kk + 1) * p];
                let mut acc = T::ZERO;
                for (&gv, &bv) in grow.iter().zip(brow) {
                    acc += gv * bv;
                }
                da[i * k + kk] += acc;
                let av = a[i * k + kk];
                for (dv, &gv) in db[kk * p..(kk + 1) * p].iter_mut().zip(grow) {
                    *dv += av * gv;
                }
            }
        }
    }
    (da, db)
}

/// Geometry of a "same"-padded 2-D convolution over a channels-last
/// `[rows, cols, c_in]` map with a `[kh, kw, c_in, c_out]` kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub rows: usize,
    pub cols: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub kh: usize,
    pub kw: usize,
}

impl ConvGeom {
    /// Yields `(out_pos, in_pos, kernel_row, kernel_col)` for every in-bounds tap.
    fn taps(&self) -> impl Iterator<Item = (usize, usize, usize, usize)> + '_ {
        let (ph, pw) = (self.kh / 2, self.kw / 2);
        (0..self.rows).flat_map(move |r| {
            (0..self.cols).flat_map(move |c| {
                (0..self.kh).flat_map(move |i| {
                    (0..self.kw).filter_map(move |j| {
                        let rr = (r + i).checked_sub(ph)?;
                        let cc = (c + j).checked_sub(pw)?;
                        (rr < self.rows && cc < self.cols).then_some((r * self.cols + c, rr * self.cols + cc, i, j))
                    })
                })
            })
        })
    }
}

pub fn conv2d<T: Scalar>(x: &[T], w: &[T], bias: &[T], g: ConvGeom) -> Vec<T> {
    let (ci, co) = (g.c_in, g.c_out);
    let mut out = vec![T::ZERO; g.rows * g.cols * co];
    for pos in 0..g.rows * g.cols {
        out[pos * co..(pos + 1) * co].copy_from_slice(bias);
    }
    for (opos, ipos, i, j) in g.taps() {
        let xin = &x[ipos * ci..(ipos + 1) * ci];
        let wblk = &w[(i * g.kw + j) * ci * co..(i * g.kw + j + 1) * ci * co];
        let orow = &mut out[opos * co..(opos + 1) * co];
        for (cin, &xv) in xin.iter().enumerate() {
            if xv == T::ZERO {
                continue;
            }
            for (ov, &wv) in orow.iter_mut().zip(&wblk[cin * co..(cin + 1) * co]) {
                *ov += xv * wv;
            }
        }
    }
    out
}

/// Returns `(dx, dw, dbias)`.
pub fn conv2d_backward<T: Scalar>(grad: &[T], x: &[T], w: &[T], g: ConvGeom) -> (Vec<T>, Vec<T>, Vec<T>) {
    let (ci, co) = (g.c_in, g.c_out);
    let mut dx = vec![T::ZERO; x.len()];
    let mut dw = vec![T::ZERO; w.len()];
    let mut db = vec![T::ZERO; co];
    for pos in 0..g.rows * g.cols {
        for (d, &gv) in db.iter_mut().zip(&grad[pos * co..(pos + 1) * co]) {
            *d += gv;
        }
    }
    for (opos, ipos, i, j) in g.taps() {
        let grow = &grad[opos * co..(opos + 1) * co];
        let base = (i * g.kw + j) * ci * co;
        for cin in 0..ci {
            let wrow = &w[base + cin * co..base + (cin + 1) * co];
            let mut acc = T::ZERO;
            for (&gv, &wv) in grow.iter().zip(wrow) {
                acc += gv * wv;
            }
            dx[ipos * ci + cin] += acc;
            let xv = x[ipos * ci + cin];
            for (dv, &gv) in dw[base + cin * co..base + (cin + 1) * co].iter_mut().zip(grow) {
                *dv += xv * gv;
            }
        }
    }
    (dx, dw, db)
}

/// Permutes axes; `out.shape[i] = shape[perm[i]]`.
pub fn transpose<T: Scalar>(data: &[T], shape: &[usize], perm: &[usize]) -> (Vec<T>, Vec<usize>) {
    let out_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
    let in_strides = strides(shape);
    let src_strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
    let mut out = Vec::with_capacity(data.len());
    if let (&[a, b, c], &[sa, sb, sc]) = (out_shape.as_slice(), src_strides.as_slice()) {
        for i in 0..a {
            for j in 0..b {
                let base = i * sa + j * sb;
                out.extend((0..c).map(|k| data[base + k * sc]));
            }
        }
        return (out, out_shape);
    }
    let rank = shape.len();
    let mut idx = vec![0usize; rank];
    let mut src = 0usize;
    for _ in 0..data.len() {
        out.push(data[src]);
        for ax in (0..rank).rev() {
            idx[ax] += 1;
            src += src_strides[ax];
            if idx[ax] < out_shape[ax] {
                break;
            }
            src -= src_strides[ax] * out_shape[ax];
            idx[ax] = 0;
        }
    }
    (out, out_shape)
}

pub fn inverse_perm(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

/// Splits a shape around `axis` into (outer, axis, inner) extents.
pub fn split_at_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    (numel(&shape[..axis]), shape[axis], numel(&shape[axis + 1..]))
}

pub fn softmax_last<T: Scalar>(data: &[T], cols: usize) -> Vec<T> {
    let mut out = vec![T::ZERO; data.len()];
    for (row, orow) in data.chunks(cols).zip(out.chunks_mut(cols)) {
        let m = row.iter().copied().fold(row[0], T::max);
        let mut sum = T::ZERO;
        for (o, &v) in orow.iter_mut().zip(row) {
            *o = (v - m).exp();
            sum += *o;
        }
        for o in orow.iter_mut() {
            *o = *o / sum;
        }
    }
    out
}

pub fn softmax_last_backward<T: Scalar>(grad: &[T], y: &[T], cols: usize) -> Vec<T> {
    let mut dx = vec![T::ZERO; y.len()];
    for ((g, yr), d) in grad.chunks(cols).zip(y.chunks(cols)).zip(dx.chunks_mut(cols)) {
        let dot: T = g.iter().zip(yr).map(|(&a, &b)| a * b).sum();
        for ((dv, &gv), &yv) in d.iter_mut().zip(g).zip(yr) {
            *dv = yv * (gv - dot);
        }
    }
    dx
}

/// Cosine similarity between all row pairs of each `[n, d]` block.
///
/// Rows with norm below [`COSINE_EPS`] have similarity 0 with everything,
/// including themselves. Entries are clamped to `[-1, 1]` and the result is
/// exactly symmetric.
pub fn cosine_rows<T: Scalar>(x: &[T], batch: usize, n: usize, d: usize) -> (Vec<T>, Vec<T>) {
    let eps = T::from_f64(COSINE_EPS);
    let mut out = vec![T::ZERO; batch * n * n];
    let mut norms = vec![T::ZERO; batch * n];
    for b in 0..batch {
        let xb = &x[b * n * d..(b + 1) * n * d];
        let nb = &mut norms[b * n..(b + 1) * n];
        for (i, nv) in nb.iter_mut().enumerate() {
            *nv = xb[i * d..(i + 1) * d].iter().map(|&v| v * v).sum::<T>().sqrt();
        }
        let ob = &mut out[b * n * n..(b + 1) * n * n];
        for i in 0..n {
            if nb[i] < eps {
                continue;
            }
            ob[i * n + i] = T::ONE;
            for j in i + 1..n {
                if nb[j] < eps {
                    continue;
                }
                let dot: T = xb[i * d..(i + 1) * d].iter().zip(&xb[j * d..(j + 1) * d]).map(|(&a, &c)| a * c).sum();
                let mut c = dot / (nb[i] * nb[j]);
                if c > T::ONE {
                    c = T::ONE;
                } else if c < -T::ONE {
                    c = -T::ONE;
                }
                ob[i * n + j] = c;
                ob[j * n + i] = c;
            }
        }
    }
    (out, norms)
}

pub fn cosine_rows_backward<T: Scalar>(
    grad: &[T],
    x: &[T],
    sim: &[T],
    norms: &[T],
    batch: usize,
    n: usize,
    d: usize,
) -> Vec<T> {
    let eps = T::from_f64(COSINE_EPS);
    let mut dx = vec![T::ZERO; x.len()];
    for b in 0..batch {
        let xb = &x[b * n * d..(b + 1) * n * d];
        let gb = &grad[b * n * n..(b + 1) * n * n];
        let sb = &sim[b * n * n..(b + 1) * n * n];
        let nb = &norms[b * n..(b + 1) * n];
        let db = &mut dx[b * n * d..(b + 1) * n * d];
        for i in 0..n {
            if nb[i] < eps {
                continue;
            }
            // d c_ij / d a_i = (u_j - c_ij u_i) / |a_i|, with a_i in row i and column i.
            for j in 0..n {
                if j == i || nb[j] < eps {
                    continue;
                }
                let coeff = gb[i * n + j] + gb[j * n + i];
                if coeff == T::ZERO {
                    continue;
                }
                let c = sb[i * n + j];
                for k in 0..d {
                    let uj = xb[j * d + k] / nb[j];
                    let ui = xb[i * d + k] / nb[i];
                    db[i * d + k] += coeff * (uj - c * ui) / nb[i];
                }
            }
        }
    }
    dx
}

/// Euclidean norm over the last axis.
pub fn norm_last<T: Scalar>(x: &[T], d: usize) -> Vec<T> {
    x.chunks(d).map(|r| r.iter().map(|&v| v * v).sum::<T>().sqrt()).collect()
}

/// Zero-norm rows get a zero (sub)gradient.
pub fn norm_last_backward<T: Scalar>(grad: &[T], x: &[T], norms: &[T], d: usize) -> Vec<T> {
    let guard = T::from_f64(NORM_EPS);
    let mut dx = vec![T::ZERO; x.len()];
    for ((row, drow), (&g, &nv)) in x.chunks(d).zip(dx.chunks_mut(d)).zip(grad.iter().zip(norms)) {
        if nv == T::ZERO {
            continue;
        }
        let scale = g / nv.max(guard);
        for (dv, &xv) in drow.iter_mut().zip(row) {
            *dv = scale * xv;
        }
    }
    dx
}
