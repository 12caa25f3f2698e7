use std::fmt;

use rayon::prelude::*;

use crate::data::WindowPair;
use crate::error::{Error, Result};
use crate::model::{Model, ParamStore};
use crate::tensor::Tensor;

/// Horizons reported at 25 fps: 80, 160, 320 and 400 ms.
pub const DEFAULT_HORIZONS: [usize; 4] = [2, 4, 8, 10];

/// Anything that maps an `[N, t_in, 3]` window to `[N, t_out, 3]`.
pub trait Predictor: Sync {
    fn predict(&self, input: &Tensor<f32>) -> Result<Tensor<f32>>;
}

/// Repeats the last observed frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ZeroVelocity {
    pub t_out: usize,
}

impl Predictor for ZeroVelocity {
    fn predict(&self, input: &Tensor<f32>) -> Result<Tensor<f32>> {
        let &[n, t_in, d] = input.shape() else {
            return Err(Error::shape("zero_velocity", format!("expected [N, T, D], got {:?}", input.shape())));
        };
        if t_in == 0 {
            return Err(Error::Input("no observed frames".into()));
        }
        let mut out = Vec::with_capacity(n * self.t_out * d);
        for j in 0..n {
            let last = &input.data()[(j * t_in + t_in - 1) * d..(j * t_in + t_in) * d];
            for _ in 0..self.t_out {
                out.extend_from_slice(last);
            }
        }
        Tensor::new(&[n, self.t_out, d], out)
    }
}

/// A model paired with its parameters.
pub struct Trained<'a> {
    pub model: &'a Model,
    pub params: &'a ParamStore<f32>,
}

impl Predictor for Trained<'_> {
    fn predict(&self, input: &Tensor<f32>) -> Result<Tensor<f32>> {
        self.model.predict(self.params, input)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    /// Frame offsets, ascending and 1-based.
    pub horizons: Vec<usize>,
    pub model: Vec<f64>,
    pub baseline: Vec<f64>,
    pub samples: usize,
}

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("horizon,model_mpjpe,baseline_mpjpe\n");
        for ((h, m), b) in self.horizons.iter().zip(&self.model).zip(&self.baseline) {
            out.push_str(&format!("{h},{m},{b}\n"));
        }
        out
    }

    /// True when the model is strictly better than the baseline at every horizon.
    pub fn beats_baseline(&self) -> bool {
        self.model.iter().zip(&self.baseline).all(|(m, b)| m < b)
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>8} {:>14} {:>14}", "frames", "model (mm)", "zero-vel (mm)")?;
        for ((h, m), b) in self.horizons.iter().zip(&self.model).zip(&self.baseline) {
            writeln!(f, "{h:>8} {m:>14.3} {b:>14.3}")?;
        }
        write!(f, "{} windows", self.samples)
    }
}

/// Mean joint error at each horizon frame.
fn horizon_errors(pred: &Tensor<f32>, truth: &Tensor<f32>, horizons: &[usize]) -> Result<Vec<f64>> {
    if pred.shape() != truth.shape() {
        return Err(Error::shapes("evaluate", pred.shape(), truth.shape()));
    }
    let &[n, t, d] = truth.shape() else {
        return Err(Error::shape("evaluate", format!("expected [N, T, D], got {:?}", truth.shape())));
    };
    horizons
        .iter()
        .map(|&h| {
            if h == 0 || h > t {
                return Err(Error::Input(format!("horizon {h} outside 1..={t}")));
            }
            let total: f64 = (0..n)
                .map(|j| {
                    let i = (j * t + h - 1) * d;
                    (0..d).map(|c| (pred.data()[i + c] as f64 - truth.data()[i + c] as f64).powi(2)).sum::<f64>().sqrt()
                })
                .sum();
            Ok(total / n as f64)
        })
        .collect()
}

/// Order-independent mean: the same multiset of values always gives the same bits.
fn stable_mean(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

/// Per-horizon MPJPE of `predictor` and the zero-velocity baseline over `data`.
pub fn evaluate(predictor: &dyn Predictor, data: &[WindowPair], horizons: &[usize]) -> Result<EvalReport> {
    if data.is_empty() {
        return Err(Error::Input("no windows to evaluate".into()));
    }
    let mut horizons = horizons.to_vec();
    horizons.sort_unstable();
    horizons.dedup();
    if horizons.is_empty() {
        return Err(Error::Input("no horizons requested".into()));
    }
    let t_out = data[0].target.shape().get(1).copied().unwrap_or(0);
    if let Some(&h) = horizons.iter().find(|&&h| h == 0 || h > t_out) {
        return Err(Error::Input(format!("horizon {h} outside 1..={t_out}")));
    }
    let baseline = ZeroVelocity { t_out };
    let rows = data
        .par_iter()
        .map(|pair| {
            let m = horizon_errors(&predictor.predict(&pair.input)?, &pair.target, &horizons)?;
            let b = horizon_errors(&baseline.predict(&pair.input)?, &pair.target, &horizons)?;
            Ok((m, b))
        })
        .collect::<Result<Vec<_>>>()?;
    let column = |k: usize, pick: fn(&(Vec<f64>, Vec<f64>)) -> &Vec<f64>| stable_mean(rows.iter().map(|r| pick(r)[k]).collect());
    let model = (0..horizons.len()).map(|k| column(k, |r| &r.0)).collect();
    let baseline = (0..horizons.len()).map(|k| column(k, |r| &r.1)).collect();
    Ok(EvalReport { horizons, model, baseline, samples: data.len() })
}
