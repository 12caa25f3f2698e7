//! Global coordination extractor.
//!
//! The balance attractor is a learned weighted aggregate of all joints at
//! every (temporal channel, feature) location. Subtracting it from each joint
//! expresses every joint relative to the same medium; a 1×1 embedding of
//! that relative representation then yields one cosine correlation graph per
//! temporal channel, which aggregates the intra-joint features produced by a
//! 1×3 temporal convolution of the raw input.

use super::Conv;
use crate::error::{Error, Result};
use crate::model::params::{ParamBuilder, ParamVars};
use crate::tensor::{Scalar, Tape, Var};

/// How the per-channel joint relation graph is formed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Similarity {
    #[default]
    Cosine,
    /// Row softmax of embedding dot products, as in self-attention.
    Softmax,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GceParams {
    /// `[N, 1]` joint weights and a scalar bias; `None` disables the attractor.
    pub conv_ba: Option<Conv>,
    pub conv_emb: Conv,
    pub conv_intra: Conv,
    pub similarity: Similarity,
}

impl GceParams {
    pub fn new<T: Scalar>(b: &mut ParamBuilder<'_, T>, n_joints: usize, d_c: usize) -> Result<Self> {
        Self::with_options(b, n_joints, d_c, true, Similarity::Cosine)
    }

    pub fn with_options<T: Scalar>(
        b: &mut ParamBuilder<'_, T>,
        n_joints: usize,
        d_c: usize,
        use_attractor: bool,
        similarity: Similarity,
    ) -> Result<Self> {
        let conv_ba = if use_attractor { Some(Conv::pointwise(b, "conv_ba", n_joints, 1)?) } else { None };
        Ok(Self {
            conv_ba,
            conv_emb: Conv::pointwise(b, "conv_emb", d_c, d_c)?,
            conv_intra: Conv::temporal(b, "conv_intra", 3, d_c, d_c)?,
            similarity,
        })
    }
}

/// One `N×N` relation matrix per temporal channel, stored channel-major as `[T_c, N, N]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CorrelationStack(pub Var);

impl CorrelationStack {
    pub fn var(self) -> Var {
        self.0
    }
}

fn check_ndt<T: Scalar>(tape: &Tape<T>, op: &'static str, x: Var) -> Result<[usize; 3]> {
    match *tape.shape(x) {
        [n, d, t] => Ok([n, d, t]),
        ref s => Err(Error::shape(op, format!("expected [N, D_c, T_c], got {s:?}"))),
    }
}

/// Returns `(ba [T_c, D_c, 1], x_new [N, D_c, T_c])`.
pub fn balance_attractor<T: Scalar>(tape: &mut Tape<T>, p: &ParamVars, params: &GceParams, x: Var) -> Result<(Var, Var)> {
    check_ndt(tape, "balance_attractor", x)?;
    let conv_ba = params
        .conv_ba
        .as_ref()
        .ok_or_else(|| Error::Config("balance attractor disabled for this layer".into()))?;
    let xt = tape.transpose(x, &[2, 1, 0])?;
    let ba = conv_ba.pointwise_apply(tape, p, xt)?;
    let rel = tape.sub(xt, ba)?;
    let x_new = tape.transpose(rel, &[2, 1, 0])?;
    Ok((ba, x_new))
}

/// Embeds `x_new` and builds the per-channel relation graphs.
pub fn cosine_similarity_unit<T: Scalar>(
    tape: &mut Tape<T>,
    p: &ParamVars,
    params: &GceParams,
    x_new: Var,
) -> Result<CorrelationStack> {
    check_ndt(tape, "cosine_similarity_unit", x_new)?;
    let emb = params.conv_emb.mix_features(tape, p, x_new)?;
    // [N, D, T] -> [T, N, D]: one row per joint in every temporal channel.
    let rows = tape.transpose(emb, &[2, 0, 1])?;
    let graph = match params.similarity {
        Similarity::Cosine => tape.cosine_rows(rows)?,
        Similarity::Softmax => {
            let cols = tape.transpose(rows, &[0, 2, 1])?;
            let logits = tape.matmul(rows, cols)?;
            tape.softmax_rows(logits)
        }
    };
    Ok(CorrelationStack(graph))
}

/// `[N, D_c, T_c] -> [N, D_c, T_c]`: graph-guided aggregation `C_t · F_t` per temporal channel.
pub fn gce_forward<T: Scalar>(tape: &mut Tape<T>, p: &ParamVars, params: &GceParams, x: Var) -> Result<Var> {
    check_ndt(tape, "gce_forward", x)?;
    let x_new = match params.conv_ba {
        Some(_) => balance_attractor(tape, p, params, x)?.1,
        None => x,
    };
    let graphs = cosine_similarity_unit(tape, p, params, x_new)?;
    let seq = tape.transpose(x, &[0, 2, 1])?;
    let intra = params.conv_intra.temporal_apply(tape, p, seq)?;
    let per_channel = tape.transpose(intra, &[1, 0, 2])?;
    let aggregated = tape.matmul(graphs.var(), per_channel)?;
    tape.transpose(aggregated, &[1, 2, 0])
}
