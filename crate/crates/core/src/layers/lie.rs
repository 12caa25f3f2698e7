//! Local interaction extractor: a 3×3 convolution for adjacent joints and a
//! non-local (embedded Gaussian) attention block for distant joints.

use super::Conv;
use crate::error::{Error, Result};
use crate::model::params::{ParamBuilder, ParamVars};
use crate::tensor::{Scalar, Tape, Var};

#[derive(Clone, Debug, PartialEq)]
pub struct LieParams {
    pub adjacent: Conv,
    pub theta: Conv,
    pub phi: Conv,
    pub g: Conv,
    pub out: Conv,
}

impl LieParams {
    pub fn new<T: Scalar>(b: &mut ParamBuilder<'_, T>, d_c: usize) -> Result<Self> {
        if !d_c.is_multiple_of(2) {
            return Err(Error::Config(format!("non-local block needs an even channel count, got {d_c}")));
        }
        let half = d_c / 2;
        let adjacent = Conv::spatial(b, "conv_adjacent", d_c, d_c)?;
        let mut nl = b.scope("non_local");
        Ok(Self {
            adjacent,
            theta: Conv::pointwise(&mut nl, "theta", d_c, half)?,
            phi: Conv::pointwise(&mut nl, "phi", d_c, half)?,
            g: Conv::pointwise(&mut nl, "g", d_c, half)?,
            out: Conv::pointwise(&mut nl, "w", half, d_c)?,
        })
    }
}

fn ndt<T: Scalar>(tape: &Tape<T>, x: Var) -> Result<[usize; 3]> {
    match *tape.shape(x) {
        [n, d, t] => Ok([n, d, t]),
        ref s => Err(Error::shape("lie_forward", format!("expected [N, D_c, T_c], got {s:?}"))),
    }
}

/// Flattened `[P, h]` embedding of an `[N, T, D]` map through a 1×1 map.
fn embed<T: Scalar>(tape: &mut Tape<T>, p: &ParamVars, conv: &Conv, seq: Var, positions: usize) -> Result<Var> {
    let e = conv.pointwise_apply(tape, p, seq)?;
    let width = tape.shape(e)[2];
    tape.reshape(e, &[positions, width])
}

/// Row-stochastic `[N·T_c, N·T_c]` attention over all (joint, time) positions.
pub fn non_local_attention<T: Scalar>(tape: &mut Tape<T>, p: &ParamVars, params: &LieParams, x: Var) -> Result<Var> {
    let [n, _, t] = ndt(tape, x)?;
    let seq = tape.transpose(x, &[0, 2, 1])?;
    attention(tape, p, params, seq, n * t)
}

fn attention<T: Scalar>(tape: &mut Tape<T>, p: &ParamVars, params: &LieParams, seq: Var, positions: usize) -> Result<Var> {
    let theta = embed(tape, p, &params.theta, seq, positions)?;
    let phi = embed(tape, p, &params.phi, seq, positions)?;
    let phi_t = tape.transpose(phi, &[1, 0])?;
    let logits = tape.matmul(theta, phi_t)?;
    Ok(tape.softmax_rows(logits))
}

/// Returns `(f_adjacent, f_distant)`, both `[N, D_c, T_c]`. No residual is added.
pub fn lie_forward<T: Scalar>(tape: &mut Tape<T>, p: &ParamVars, params: &LieParams, x: Var) -> Result<(Var, Var)> {
    let [n, d, t] = ndt(tape, x)?;
    if d % 2 != 0 {
        return Err(Error::Config(format!("non-local block needs an even channel count, got {d}")));
    }
    let seq = tape.transpose(x, &[0, 2, 1])?;

    let adj = params.adjacent.spatial_apply(tape, p, seq)?;
    let f_adjacent = tape.transpose(adj, &[0, 2, 1])?;

    let positions = n * t;
    let attn = attention(tape, p, params, seq, positions)?;
    let g = embed(tape, p, &params.g, seq, positions)?;
    let y = tape.matmul(attn, g)?;
    let half = tape.shape(y)[1];
    let y = tape.reshape(y, &[n, t, half])?;
    let out = params.out.pointwise_apply(tape, p, y)?;
    let f_distant = tape.transpose(out, &[0, 2, 1])?;
    Ok((f_adjacent, f_distant))
}
