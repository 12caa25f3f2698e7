//! Straight-line loop implementations used as independent references.
//!
//! Everything here works on plain `f64` slices with explicit index
//! arithmetic and never calls into the library's kernels.

#![allow(dead_code)]

pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, p: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * p];
    for i in 0..m {
        for j in 0..p {
            let mut s = 0.0;
            for t in 0..k {
                s += a[i * k + t] * b[t * p + j];
            }
            out[i * p + j] = s;
        }
    }
    out
}

/// Zero-padded "same" convolution over `[rows, cols, ci]` with `[kh, kw, ci, co]` weights.
#[allow(clippy::too_many_arguments)]
pub fn conv(
    x: &[f64],
    w: &[f64],
    bias: &[f64],
    rows: usize,
    cols: usize,
    ci: usize,
    co: usize,
    kh: usize,
    kw: usize,
) -> Vec<f64> {
    let ph = (kh as isize - 1) / 2;
    let pw = (kw as isize - 1) / 2;
    let mut out = vec![0.0; rows * cols * co];
    for r in 0..rows as isize {
        for c in 0..cols as isize {
            for o in 0..co {
                let mut s = bias[o];
                for i in 0..kh as isize {
                    for j in 0..kw as isize {
                        let rr = r + i - ph;
                        let cc = c + j - pw;
                        if rr < 0 || cc < 0 || rr >= rows as isize || cc >= cols as isize {
                            continue;
                        }
                        for q in 0..ci {
                            let xv = x[(rr as usize * cols + cc as usize) * ci + q];
                            let wv = w[((i as usize * kw + j as usize) * ci + q) * co + o];
                            s += xv * wv;
                        }
                    }
                }
                out[(r as usize * cols + c as usize) * co + o] = s;
            }
        }
    }
    out
}

pub fn softmax_row(row: &[f64]) -> Vec<f64> {
    let exps: Vec<f64> = row.iter().map(|v| v.exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}

/// Cosine matrix of `n` rows of width `d`; rows with norm < 1e-8 give 0.
pub fn cosine(rows: &[f64], n: usize, d: usize) -> Vec<f64> {
    let norm = |i: usize| (0..d).map(|k| rows[i * d + k] * rows[i * d + k]).sum::<f64>().sqrt();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let (ni, nj) = (norm(i), norm(j));
            if ni < 1e-8 || nj < 1e-8 {
                continue;
            }
            let dot: f64 = (0..d).map(|k| rows[i * d + k] * rows[j * d + k]).sum();
            out[i * n + j] = (dot / (ni * nj)).clamp(-1.0, 1.0);
        }
    }
    out
}

/// Balance attractor of `x[N, D, T]`: `ba[t, d] = sum_n w[n] x[n, d, t] + b`.
pub fn balance_attractor(x: &[f64], w: &[f64], b: f64, n: usize, d: usize, t: usize) -> Vec<f64> {
    let mut ba = vec![0.0; t * d];
    for tt in 0..t {
        for dd in 0..d {
            let mut s = b;
            for j in 0..n {
                s += w[j] * x[(j * d + dd) * t + tt];
            }
            ba[tt * d + dd] = s;
        }
    }
    ba
}

/// Embedded-Gaussian attention over `p` positions of width `c`, without scaling.
///
/// `theta`, `phi`, `g` are `[c, h]` maps (bias vectors of length `h`), `w_out` is `[h, c_out]`.
#[allow(clippy::too_many_arguments)]
pub fn non_local(
    x: &[f64],
    p: usize,
    c: usize,
    h: usize,
    c_out: usize,
    theta: (&[f64], &[f64]),
    phi: (&[f64], &[f64]),
    g: (&[f64], &[f64]),
    w_out: (&[f64], &[f64]),
) -> Vec<f64> {
    let map = |wb: (&[f64], &[f64]), pos: usize| -> Vec<f64> {
        (0..h)
            .map(|o| wb.1[o] + (0..c).map(|q| x[pos * c + q] * wb.0[q * h + o]).sum::<f64>())
            .collect()
    };
    let th: Vec<Vec<f64>> = (0..p).map(|i| map(theta, i)).collect();
    let ph: Vec<Vec<f64>> = (0..p).map(|i| map(phi, i)).collect();
    let gg: Vec<Vec<f64>> = (0..p).map(|i| map(g, i)).collect();
    let mut out = vec![0.0; p * c_out];
    for i in 0..p {
        let logits: Vec<f64> = (0..p).map(|j| (0..h).map(|k| th[i][k] * ph[j][k]).sum()).collect();
        let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logits.iter().map(|l| (l - mx).exp()).collect();
        let z: f64 = e.iter().sum();
        let mut y = vec![0.0; h];
        for j in 0..p {
            for k in 0..h {
                y[k] += e[j] / z * gg[j][k];
            }
        }
        for o in 0..c_out {
            out[i * c_out + o] = w_out.1[o] + (0..h).map(|k| y[k] * w_out.0[k * c_out + o]).sum::<f64>();
        }
    }
    out
}

/// Mean Euclidean distance over `[N, T, 3]` pairs.
pub fn mpjpe(pred: &[f64], truth: &[f64]) -> f64 {
    let count = pred.len() / 3;
    let mut total = 0.0;
    for i in 0..count {
        let mut s = 0.0;
        for k in 0..3 {
            let d = pred[i * 3 + k] - truth[i * 3 + k];
            s += d * d;
        }
        total += s.sqrt();
    }
    total / count as f64
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Deterministic xorshift stream in `[-1, 1)`, independent of the library's RNG.
pub struct Stream(u64);

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1)
    }

    pub fn next(&mut self) -> f64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        (self.0 >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    pub fn vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.next()).collect()
    }

    pub fn below(&mut self, n: usize) -> usize {
        ((self.next() + 1.0) * 0.5 * n as f64) as usize % n
    }
}
