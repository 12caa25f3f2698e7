use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};

const PROJECTION_SEED: u64 = 0x6a7d_5eed;

/// Outcome of [`grad_check_many`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// `(input, flat index)` of the worst coordinate.
    pub worst: (usize, usize),
    pub coordinates: usize,
}

/// `|analytic - numeric| / max(1, |analytic|, |numeric|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / 1f64.max(analytic.abs()).max(numeric.abs())
}

/// Compares reverse-mode gradients of `f` at `x` with central differences.
///
/// Non-scalar outputs are contracted with fixed pseudo-random weights so one
/// backward pass covers every output coordinate.
pub fn grad_check<F>(f: F, x: &Tensor<f64>, eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape<f64>, Var) -> Result<Var> + Sync,
{
    grad_check_many(|tape, vars| f(tape, vars[0]), std::slice::from_ref(x), eps).map(|r| r.max_relative_error)
}

/// Multi-input variant of [`grad_check`]; every input is perturbed coordinate-wise.
pub fn grad_check_many<F>(f: F, inputs: &[Tensor<f64>], eps: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var> + Sync,
{
    if !(eps > 0.0) {
        return Err(Error::Config(format!("grad_check eps must be positive, got {eps}")));
    }
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone().with_grad())).collect();
    let out = f(&mut tape, &vars)?;
    let weights = projection(tape.value(out).len());
    let w = tape.constant(Tensor::new(tape.shape(out), weights.clone())?);
    let prod = tape.mul(out, w)?;
    let loss = tape.sum(prod);
    let grads = tape.backward(loss)?;

    let objective = |perturbed: &[Tensor<f64>]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = perturbed.iter().map(|t| tape.constant(t.clone())).collect();
        let out = f(&mut tape, &vars)?;
        Ok(tape.value(out).data().iter().zip(&weights).map(|(a, b)| a * b).sum())
    };

    let mut report = GradCheckReport { max_relative_error: 0.0, worst: (0, 0), coordinates: 0 };
    for (k, input) in inputs.iter().enumerate() {
        let analytic = grads.get_or_zeros(vars[k], input.len());
        let errors: Vec<f64> = (0..input.len())
            .into_par_iter()
            .map(|j| -> Result<f64> {
                let mut shifted = inputs.to_vec();
                shifted[k].data_mut()[j] = input.data()[j] + eps;
                let plus = objective(&shifted)?;
                shifted[k].data_mut()[j] = input.data()[j] - eps;
                let minus = objective(&shifted)?;
                Ok(relative_error(analytic[j], (plus - minus) / (2.0 * eps)))
            })
            .collect::<Result<_>>()?;
        for (j, e) in errors.into_iter().enumerate() {
            if e > report.max_relative_error || e.is_nan() {
                report.max_relative_error = e;
                report.worst = (k, j);
            }
        }
        report.coordinates += input.len();
    }
    Ok(report)
}

fn projection(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(PROJECTION_SEED);
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}
