//! Differentiable building blocks of the attractor-guided network.
//!
//! Joint-relation layers ([`gce`], [`lie`], [`affm`]) take feature maps laid
//! out as `[N, D_c, T_c]` (joints, feature channels, temporal channels). The
//! dynamics extractor ([`mtde`]) works on `[N, T, D]` sequences.

pub mod affm;
pub mod gce;
pub mod lie;
pub mod mtde;

pub use affm::{affm_forward, AffmParams};
pub use gce::{balance_attractor, cosine_similarity_unit, gce_forward, CorrelationStack, GceParams, Similarity};
pub use lie::{lie_forward, non_local_attention, LieParams};
pub use mtde::{mtde_forward, velocity, MtdeParams};

use crate::error::Result;
use crate::model::params::{ParamBuilder, ParamId, ParamVars};
use crate::tensor::{Scalar, Tape, Var};

/// Weight and bias of one convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Conv {
    /// `[k, c_in, c_out]` kernel sliding along time.
    pub fn temporal<T: Scalar>(b: &mut ParamBuilder<'_, T>, name: &str, k: usize, c_in: usize, c_out: usize) -> Result<Self> {
        let mut s = b.scope(name);
        Ok(Self { weight: s.weight("weight", &[k, c_in, c_out], k * c_in)?, bias: s.zeros("bias", &[c_out])? })
    }

    /// `[3, 3, c_in, c_out]` kernel over (joint, time).
    pub fn spatial<T: Scalar>(b: &mut ParamBuilder<'_, T>, name: &str, c_in: usize, c_out: usize) -> Result<Self> {
        let mut s = b.scope(name);
        Ok(Self { weight: s.weight("weight", &[3, 3, c_in, c_out], 9 * c_in)?, bias: s.zeros("bias", &[c_out])? })
    }

    /// `[c_in, c_out]` channel mix.
    pub fn pointwise<T: Scalar>(b: &mut ParamBuilder<'_, T>, name: &str, c_in: usize, c_out: usize) -> Result<Self> {
        let mut s = b.scope(name);
        Ok(Self { weight: s.weight("weight", &[c_in, c_out], c_in)?, bias: s.zeros("bias", &[c_out])? })
    }

    pub fn temporal_apply<T: Scalar>(&self, tape: &mut Tape<T>, p: &ParamVars, x: Var) -> Result<Var> {
        tape.conv_temporal(x, p[self.weight], p[self.bias])
    }

    pub fn spatial_apply<T: Scalar>(&self, tape: &mut Tape<T>, p: &ParamVars, x: Var) -> Result<Var> {
        tape.conv_spatial_temporal(x, p[self.weight], p[self.bias])
    }

    /// Channel mix of a channels-last `[A, B, C]` map.
    pub fn pointwise_apply<T: Scalar>(&self, tape: &mut Tape<T>, p: &ParamVars, x: Var) -> Result<Var> {
        tape.conv_1x1(x, p[self.weight], p[self.bias])
    }

    /// Channel mix of an `[N, D, T]` map along its middle axis.
    pub fn mix_features<T: Scalar>(&self, tape: &mut Tape<T>, p: &ParamVars, x: Var) -> Result<Var> {
        let last = tape.transpose(x, &[0, 2, 1])?;
        let mixed = tape.conv_1x1(last, p[self.weight], p[self.bias])?;
        tape.transpose(mixed, &[0, 2, 1])
    }
}

/// Affine map on row vectors: `x[R, in] W[in, out] + b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    pub fn new<T: Scalar>(b: &mut ParamBuilder<'_, T>, name: &str, d_in: usize, d_out: usize) -> Result<Self> {
        let mut s = b.scope(name);
        Ok(Self { weight: s.weight("weight", &[d_in, d_out], d_in)?, bias: s.zeros("bias", &[d_out])? })
    }

    pub fn apply<T: Scalar>(&self, tape: &mut Tape<T>, p: &ParamVars, x: Var) -> Result<Var> {
        let y = tape.matmul(x, p[self.weight])?;
        let width = tape.shape(p[self.bias])[0];
        let bias = tape.reshape(p[self.bias], &[1, width])?;
        tape.add(y, bias)
    }
}
