use super::motion::MotionSequence;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Observed frames and the frames that immediately follow them.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowPair {
    /// First observed frame in the source sequence.
    pub start: usize,
    /// `[N, t_in, 3]`.
    pub input: Tensor<f32>,
    /// `[N, t_out, 3]`, beginning at frame `start + t_in`.
    pub target: Tensor<f32>,
}

/// Number of windows [`windows`] yields.
pub fn window_count(n_frames: usize, t_in: usize, t_out: usize, stride: usize) -> usize {
    match n_frames.checked_sub(t_in + t_out) {
        Some(slack) if stride > 0 => slack / stride + 1,
        _ => 0,
    }
}

/// Slides a `t_in + t_out` window over the sequence; short sequences give no windows.
pub fn windows(seq: &MotionSequence, t_in: usize, t_out: usize, stride: usize) -> Result<Vec<WindowPair>> {
    if stride == 0 {
        return Err(Error::Input("window stride must be at least 1".into()));
    }
    if t_in == 0 || t_out == 0 {
        return Err(Error::Input("window lengths must be positive".into()));
    }
    (0..window_count(seq.n_frames(), t_in, t_out, stride))
        .map(|k| {
            let start = k * stride;
            Ok(WindowPair { start, input: seq.clip(start, t_in)?, target: seq.clip(start + t_in, t_out)? })
        })
        .collect()
}
