//! Seeded batches of random cases comparing library layers with loop oracles.
//! Each function returns the largest absolute difference seen.

use agn::layers::{self, GceParams, LieParams};
use agn::model::{mpjpe, mpjpe_loss};
use agn::tensor::{Tape, Tensor};

use super::oracles::{self, Stream};
use super::{layer, max_abs_diff, run, tensor, values};

/// Random `(n, d, t)` with `n ≤ 5`, `d ≤ 8`, `t ≤ 6`; `d` even when `even_d`.
fn dims(s: &mut Stream, even_d: bool) -> (usize, usize, usize) {
    let n = 1 + s.below(5);
    let d = if even_d { 2 * (1 + s.below(4)) } else { 1 + s.below(8) };
    let t = 1 + s.below(6);
    (n, d, t)
}

/// `emb[n, :, t] = x[n, :, t] W + b` for an `[N, D, T]` map.
fn mix_features(x: &[f64], w: &[f64], b: &[f64], n: usize, d: usize, t: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * d * t];
    for j in 0..n {
        for tt in 0..t {
            for o in 0..d {
                let mut acc = b[o];
                for q in 0..d {
                    acc += x[(j * d + q) * t + tt] * w[q * d + o];
                }
                out[(j * d + o) * t + tt] = acc;
            }
        }
    }
    out
}

/// `[T, N, N]` cosine graphs of an `[N, D, T]` embedding.
fn cosine_stack(emb: &[f64], n: usize, d: usize, t: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(t * n * n);
    for tt in 0..t {
        let rows: Vec<f64> = (0..n).flat_map(|j| (0..d).map(move |q| (j, q))).map(|(j, q)| emb[(j * d + q) * t + tt]).collect();
        out.extend(oracles::cosine(&rows, n, d));
    }
    out
}

fn x_new_oracle(x: &[f64], ba: &[f64], n: usize, d: usize, t: usize) -> Vec<f64> {
    let mut out = x.to_vec();
    for j in 0..n {
        for q in 0..d {
            for tt in 0..t {
                out[(j * d + q) * t + tt] -= ba[tt * d + q];
            }
        }
    }
    out
}

pub fn balance_attractor(cases: u64) -> f64 {
    (0..cases)
        .map(|seed| {
            let mut s = Stream::new(seed);
            let (n, d, t) = dims(&mut s, false);
            let (p, store) = layer(&mut s, |b| GceParams::new(b, n, d));
            let x = tensor(&mut s, &[n, d, t]);
            let conv = p.conv_ba.unwrap();
            let (w, bias) = (values(&store, conv.weight), values(&store, conv.bias)[0]);
            let ba_ref = oracles::balance_attractor(x.data(), &w, bias, n, d, t);
            let xn_ref = x_new_oracle(x.data(), &ba_ref, n, d, t);
            let ba = run(&store, &x, |tape, pv, v| Ok(layers::balance_attractor(tape, pv, &p, v)?.0));
            let xn = run(&store, &x, |tape, pv, v| Ok(layers::balance_attractor(tape, pv, &p, v)?.1));
            assert_eq!(ba.shape(), &[t, d, 1]);
            max_abs_diff(ba.data(), &ba_ref).max(max_abs_diff(xn.data(), &xn_ref))
        })
        .fold(0.0, f64::max)
}

pub fn cosine_correlation(cases: u64) -> f64 {
    (0..cases)
        .map(|seed| {
            let mut s = Stream::new(1000 + seed);
            let (n, d, t) = dims(&mut s, false);
            let (p, store) = layer(&mut s, |b| GceParams::new(b, n, d));
            let x = tensor(&mut s, &[n, d, t]);
            let emb = mix_features(x.data(), &values(&store, p.conv_emb.weight), &values(&store, p.conv_emb.bias), n, d, t);
            let expected = cosine_stack(&emb, n, d, t);
            let got = run(&store, &x, |tape, pv, v| Ok(layers::cosine_similarity_unit(tape, pv, &p, v)?.var()));
            assert_eq!(got.shape(), &[t, n, n]);
            max_abs_diff(got.data(), &expected)
        })
        .fold(0.0, f64::max)
}

/// Balance attractor, cosine graphs and graph-guided aggregation composed by hand.
pub fn gce_aggregation(cases: u64) -> f64 {
    (0..cases)
        .map(|seed| {
            let mut s = Stream::new(2000 + seed);
            let (n, d, t) = dims(&mut s, false);
            let (p, store) = layer(&mut s, |b| GceParams::new(b, n, d));
            let x = tensor(&mut s, &[n, d, t]);
            let conv_ba = p.conv_ba.unwrap();
            let ba = oracles::balance_attractor(x.data(), &values(&store, conv_ba.weight), values(&store, conv_ba.bias)[0], n, d, t);
            let x_new = x_new_oracle(x.data(), &ba, n, d, t);
            let emb = mix_features(&x_new, &values(&store, p.conv_emb.weight), &values(&store, p.conv_emb.bias), n, d, t);
            let graphs = cosine_stack(&emb, n, d, t);
            // conv_intra over the [N, T, D] sequence: width 3 along time only.
            let mut seq = vec![0.0; n * t * d];
            for j in 0..n {
                for q in 0..d {
                    for tt in 0..t {
                        seq[(j * t + tt) * d + q] = x.data()[(j * d + q) * t + tt];
                    }
                }
            }
            let intra = oracles::conv(&seq, &values(&store, p.conv_intra.weight), &values(&store, p.conv_intra.bias), n, t, d, d, 1, 3);
            let mut expected = vec![0.0; n * d * t];
            for tt in 0..t {
                for i in 0..n {
                    for q in 0..d {
                        let mut acc = 0.0;
                        for j in 0..n {
                            acc += graphs[(tt * n + i) * n + j] * intra[(j * t + tt) * d + q];
                        }
                        expected[(i * d + q) * t + tt] = acc;
                    }
                }
            }
            let got = run(&store, &x, |tape, pv, v| layers::gce_forward(tape, pv, &p, v));
            max_abs_diff(got.data(), &expected)
        })
        .fold(0.0, f64::max)
}

/// Temporal (`1×k`), spatial-temporal (`3×3`) and pointwise convolutions.
pub fn convolutions(cases: u64) -> f64 {
    (0..cases)
        .map(|seed| {
            let mut s = Stream::new(3000 + seed);
            let (rows, ci, cols) = dims(&mut s, false);
            let co = 1 + s.below(8);
            let k = [1, 3, 5, 7][s.below(4)];
            let x = tensor(&mut s, &[rows, cols, ci]);
            let wt = tensor(&mut s, &[k, ci, co]);
            let ws = tensor(&mut s, &[3, 3, ci, co]);
            let wp = tensor(&mut s, &[ci, co]);
            let b = tensor(&mut s, &[co]);
            let mut tape = Tape::new();
            let (xv, btv) = (tape.constant(x.clone()), tape.constant(b.clone()));
            let (wtv, wsv, wpv) = (tape.constant(wt.clone()), tape.constant(ws.clone()), tape.constant(wp.clone()));
            let yt = tape.conv_temporal(xv, wtv, btv).unwrap();
            let ys = tape.conv_spatial_temporal(xv, wsv, btv).unwrap();
            let yp = tape.conv_1x1(xv, wpv, btv).unwrap();
            let et = oracles::conv(x.data(), wt.data(), b.data(), rows, cols, ci, co, 1, k);
            let es = oracles::conv(x.data(), ws.data(), b.data(), rows, cols, ci, co, 3, 3);
            let ep = oracles::conv(x.data(), wp.data(), b.data(), rows, cols, ci, co, 1, 1);
            max_abs_diff(tape.value(yt).data(), &et)
                .max(max_abs_diff(tape.value(ys).data(), &es))
                .max(max_abs_diff(tape.value(yp).data(), &ep))
        })
        .fold(0.0, f64::max)
}

/// The distant path of the local interaction extractor.
pub fn non_local(cases: u64) -> f64 {
    (0..cases)
        .map(|seed| {
            let mut s = Stream::new(4000 + seed);
            let (n, d, t) = dims(&mut s, true);
            let (p, store) = layer(&mut s, |b| LieParams::new(b, d));
            let x = tensor(&mut s, &[n, d, t]);
            // Positions in (joint, time) order, channels last.
            let mut seq = vec![0.0; n * t * d];
            for j in 0..n {
                for q in 0..d {
                    for tt in 0..t {
                        seq[(j * t + tt) * d + q] = x.data()[(j * d + q) * t + tt];
                    }
                }
            }
            let wb = |c: agn::layers::Conv| (values(&store, c.weight), values(&store, c.bias));
            let (th, ph, g, w) = (wb(p.theta), wb(p.phi), wb(p.g), wb(p.out));
            let h = d / 2;
            let y = oracles::non_local(&seq, n * t, d, h, d, (&th.0, &th.1), (&ph.0, &ph.1), (&g.0, &g.1), (&w.0, &w.1));
            let mut expected = vec![0.0; n * d * t];
            for j in 0..n {
                for q in 0..d {
                    for tt in 0..t {
                        expected[(j * d + q) * t + tt] = y[(j * t + tt) * d + q];
                    }
                }
            }
            let got = run(&store, &x, |tape, pv, v| Ok(layers::lie_forward(tape, pv, &p, v)?.1));
            max_abs_diff(got.data(), &expected)
        })
        .fold(0.0, f64::max)
}

/// Loss value and its taped counterpart against the per-joint loop.
pub fn mpjpe_loss_cases(cases: u64) -> f64 {
    (0..cases)
        .map(|seed| {
            let mut s = Stream::new(5000 + seed);
            let (n, _, t) = dims(&mut s, false);
            let pred: Tensor<f64> = tensor(&mut s, &[n, t, 3]);
            let truth = tensor(&mut s, &[n, t, 3]);
            let expected = oracles::mpjpe(pred.data(), truth.data());
            let plain = mpjpe(&pred, &truth).unwrap();
            let mut tape = Tape::new();
            let (a, b) = (tape.constant(pred), tape.constant(truth));
            let l = mpjpe_loss(&mut tape, a, b).unwrap();
            (plain - expected).abs().max((tape.value(l).data()[0] - expected).abs())
        })
        .fold(0.0, f64::max)
}
