//! Multi-timescale dynamics extractor.
//!
//! Position and velocity streams each run parallel temporal convolutions at
//! several kernel widths, concatenate the results along channels and reduce
//! them back to `D_p` with a 1×1 convolution. The two streams are then joined
//! along time, giving `2T - 1` frames.

use super::Conv;
use crate::error::{Error, Result};
use crate::model::params::{ParamBuilder, ParamVars};
use crate::tensor::{Scalar, Tape, Var};

/// One stream: a temporal convolution per timescale plus the channel reduction.
#[derive(Clone, Debug, PartialEq)]
pub struct StreamParams {
    pub branches: Vec<Conv>,
    /// Absent when only one branch exists.
    pub reduce: Option<Conv>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MtdeParams {
    pub position: StreamParams,
    pub velocity: StreamParams,
    pub d_p: usize,
}

impl MtdeParams {
    /// Multi-timescale extractor with odd ascending `timescales`.
    pub fn new<T: Scalar>(b: &mut ParamBuilder<'_, T>, coord_dim: usize, d_p: usize, timescales: &[usize]) -> Result<Self> {
        validate_timescales(timescales)?;
        let mut build = |name: &str| -> Result<StreamParams> {
            let mut s = b.scope(name);
            let branches = timescales
                .iter()
                .map(|&k| Conv::temporal(&mut s, &format!("conv_k{k}"), k, coord_dim, d_p))
                .collect::<Result<Vec<_>>>()?;
            let reduce = Some(Conv::pointwise(&mut s, "conv_red", timescales.len() * d_p, d_p)?);
            Ok(StreamParams { branches, reduce })
        };
        let position = build("position")?;
        let velocity = build("velocity")?;
        Ok(Self { position, velocity, d_p })
    }

    /// Ablated variant: a single width-1 convolution lifts each stream to `d_p`.
    pub fn single_scale<T: Scalar>(b: &mut ParamBuilder<'_, T>, coord_dim: usize, d_p: usize) -> Result<Self> {
        let mut build = |name: &str| -> Result<StreamParams> {
            let mut s = b.scope(name);
            Ok(StreamParams { branches: vec![Conv::temporal(&mut s, "lift", 1, coord_dim, d_p)?], reduce: None })
        };
        let position = build("position")?;
        let velocity = build("velocity")?;
        Ok(Self { position, velocity, d_p })
    }
}

pub(crate) fn validate_timescales(timescales: &[usize]) -> Result<()> {
    if timescales.is_empty() {
        return Err(Error::Config("at least one timescale is required".into()));
    }
    if timescales.iter().any(|k| k % 2 == 0) {
        return Err(Error::Config(format!("timescales must be odd, got {timescales:?}")));
    }
    if timescales.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!("timescales must be strictly ascending, got {timescales:?}")));
    }
    Ok(())
}

/// Frame differences `x[:, t+1, :] - x[:, t, :]` of an `[N, T, D]` sequence.
pub fn velocity<T: Scalar>(tape: &mut Tape<T>, x: Var) -> Result<Var> {
    let shape = tape.shape(x).to_vec();
    if shape.len() != 3 {
        return Err(Error::shape("velocity", format!("expected [N, T, D], got {shape:?}")));
    }
    let frames = shape[1];
    if frames < 2 {
        return Err(Error::Input(format!("velocity needs at least 2 frames, got {frames}")));
    }
    let later = tape.slice(x, 1, 1, frames - 1)?;
    let earlier = tape.slice(x, 1, 0, frames - 1)?;
    tape.sub(later, earlier)
}

fn stream<T: Scalar>(tape: &mut Tape<T>, p: &ParamVars, params: &StreamParams, x: Var) -> Result<Var> {
    let outs = params.branches.iter().map(|c| c.temporal_apply(tape, p, x)).collect::<Result<Vec<_>>>()?;
    match &params.reduce {
        Some(reduce) => {
            let cat = tape.concat(&outs, 2)?;
            reduce.pointwise_apply(tape, p, cat)
        }
        None => Ok(outs[0]),
    }
}

/// `[N, T, D] -> [N, 2T - 1, D_p]`.
pub fn mtde_forward<T: Scalar>(tape: &mut Tape<T>, p: &ParamVars, params: &MtdeParams, x: Var) -> Result<Var> {
    let v = velocity(tape, x)?;
    let pos = stream(tape, p, &params.position, x)?;
    let vel = stream(tape, p, &params.velocity, v)?;
    tape.concat(&[pos, vel], 1)
}
