use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tape, Tensor, Var};

/// Mean per-joint position error: the average Euclidean distance between
/// predicted and true joints over all frames of `[N, t_out, D]` maps.
pub fn mpjpe_loss<T: Scalar>(tape: &mut Tape<T>, pred: Var, truth: Var) -> Result<Var> {
    if tape.shape(pred) != tape.shape(truth) {
        return Err(Error::shapes("mpjpe_loss", tape.shape(pred), tape.shape(truth)));
    }
    let diff = tape.sub(pred, truth)?;
    let dist = tape.norm_last(diff);
    Ok(tape.mean(dist))
}

/// Value-only MPJPE, accumulated in `f64`.
pub fn mpjpe<T: Scalar>(pred: &Tensor<T>, truth: &Tensor<T>) -> Result<f64> {
    if pred.shape() != truth.shape() {
        return Err(Error::shapes("mpjpe", pred.shape(), truth.shape()));
    }
    let d = *pred.shape().last().expect("rank >= 1");
    let rows = pred.len() / d;
    let total: f64 = pred
        .data()
        .chunks(d)
        .zip(truth.data().chunks(d))
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x.to_f64() - y.to_f64()).powi(2)).sum::<f64>().sqrt())
        .sum();
    Ok(total / rows as f64)
}
