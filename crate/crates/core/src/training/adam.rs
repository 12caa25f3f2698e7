use crate::error::{Error, Result};
use crate::model::ParamStore;
use crate::tensor::Scalar;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moments per parameter, kept in `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl OptimState {
    pub fn new<T: Scalar>(params: &ParamStore<T>) -> Self {
        let zeros = || params.iter().map(|(_, t)| vec![0.0; t.len()]).collect::<Vec<_>>();
        Self { m: zeros(), v: zeros(), step: 0, beta1: BETA1, beta2: BETA2, eps: EPSILON }
    }
}

/// One bias-corrected Adam update from the accumulated gradients, which are
/// zeroed afterwards.
pub fn adam_step<T: Scalar>(params: &mut ParamStore<T>, state: &mut OptimState, lr: f64) -> Result<()> {
    if state.m.len() != params.len() {
        return Err(Error::Contract(format!(
            "optimizer tracks {} tensors, store has {}",
            state.m.len(),
            params.len()
        )));
    }
    if let Some((name, _)) = params.iter().find(|(_, t)| t.grad().is_none()) {
        return Err(Error::Contract(format!("missing gradient for parameter {name}")));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for (i, (_, tensor)) in params.iter_mut().enumerate() {
        let grad: Vec<f64> = tensor.grad().expect("checked above").iter().map(|g| g.to_f64()).collect();
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for (j, value) in tensor.data_mut().iter_mut().enumerate() {
            let g = grad[j];
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            *value = T::from_f64(value.to_f64() - lr * m_hat / (v_hat.sqrt() + state.eps));
        }
        tensor.zero_grad();
    }
    Ok(())
}
