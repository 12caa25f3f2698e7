//! Adaptive feature fusion with a squeeze–excite channel gate.
//!
//! Input maps are concatenated along the feature axis and reduced back to
//! `D_c` channels. Global average pooling over joints and time squeezes the
//! reduced map to one value per channel; two affine maps with a rectifier in
//! between and a sigmoid on top produce per-channel ratios that rescale it.

use super::{Conv, Linear};
use crate::error::{Error, Result};
use crate::model::params::{ParamBuilder, ParamVars};
use crate::tensor::{Scalar, Tape, Var};

#[derive(Clone, Debug, PartialEq)]
pub struct AffmParams {
    pub inputs: usize,
    pub reduce: Conv,
    /// `None` fuses without the channel gate.
    pub excite: Option<(Linear, Linear)>,
}

impl AffmParams {
    pub fn new<T: Scalar>(b: &mut ParamBuilder<'_, T>, inputs: usize, d_c: usize, ratio: usize, gated: bool) -> Result<Self> {
        if inputs == 0 {
            return Err(Error::Config("fusion needs at least one input".into()));
        }
        if ratio == 0 || !d_c.is_multiple_of(ratio) {
            return Err(Error::Config(format!("channel count {d_c} not divisible by reduction ratio {ratio}")));
        }
        let reduce = Conv::pointwise(b, "conv_fuse", inputs * d_c, d_c)?;
        let excite = if gated {
            let hidden = d_c / ratio;
            Some((Linear::new(b, "squeeze", d_c, hidden)?, Linear::new(b, "excite", hidden, d_c)?))
        } else {
            None
        };
        Ok(Self { inputs, reduce, excite })
    }
}

/// Channel-wise ratios in `(0, 1)` for an `[N, T, C]` map, shaped `[1, 1, C]`.
pub fn channel_gate<T: Scalar>(tape: &mut Tape<T>, p: &ParamVars, squeeze: &Linear, excite: &Linear, z: Var) -> Result<Var> {
    let c = tape.shape(z)[2];
    let pooled = tape.mean_over(z, &[0, 1])?;
    let pooled = tape.reshape(pooled, &[1, c])?;
    let hidden = squeeze.apply(tape, p, pooled)?;
    let hidden = tape.relu(hidden);
    let logits = excite.apply(tape, p, hidden)?;
    let gate = tape.sigmoid(logits);
    tape.reshape(gate, &[1, 1, c])
}

/// Fuses equally shaped `[N, D_c, T_c]` maps into one.
pub fn affm_forward<T: Scalar>(tape: &mut Tape<T>, p: &ParamVars, params: &AffmParams, features: &[Var]) -> Result<Var> {
    let first = *features.first().ok_or_else(|| Error::Input("fusion got no inputs".into()))?;
    let shape = tape.shape(first).to_vec();
    if shape.len() != 3 {
        return Err(Error::shape("affm_forward", format!("expected [N, D_c, T_c], got {shape:?}")));
    }
    if features.len() != params.inputs {
        return Err(Error::Input(format!("fusion built for {} inputs, got {}", params.inputs, features.len())));
    }
    for &f in &features[1..] {
        if tape.shape(f) != shape.as_slice() {
            return Err(Error::shapes("affm_forward", &shape, tape.shape(f)));
        }
    }
    let cat = tape.concat(features, 1)?;
    let seq = tape.transpose(cat, &[0, 2, 1])?;
    let z = params.reduce.pointwise_apply(tape, p, seq)?;
    let fused = match &params.excite {
        Some((squeeze, excite)) => {
            let gate = channel_gate(tape, p, squeeze, excite, z)?;
            tape.mul(z, gate)?
        }
        None => z,
    };
    tape.transpose(fused, &[0, 2, 1])
}
