#![allow(dead_code)]

pub mod cases;
pub mod oracles;

use agn::model::{seeded_rng, ParamBuilder, ParamId, ParamStore, ParamVars};
use agn::tensor::{Tape, Tensor, Var};
use oracles::Stream;

/// Builds layer parameters and overwrites every value (biases included) from `s`.
pub fn layer<P>(s: &mut Stream, f: impl FnOnce(&mut ParamBuilder<'_, f64>) -> agn::Result<P>) -> (P, ParamStore<f64>) {
    let mut store = ParamStore::new();
    let mut rng = seeded_rng(0);
    let params = f(&mut ParamBuilder::new(&mut store, &mut rng)).unwrap();
    for (_, t) in store.iter_mut() {
        for v in t.data_mut() {
            *v = s.next();
        }
    }
    (params, store)
}

pub fn values(store: &ParamStore<f64>, id: ParamId) -> Vec<f64> {
    store.get(id).data().to_vec()
}

pub fn set(store: &mut ParamStore<f64>, id: ParamId, data: &[f64]) {
    store.get_mut(id).data_mut().copy_from_slice(data);
}

pub fn tensor(s: &mut Stream, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_f64(shape, &s.vec(shape.iter().product())).unwrap()
}

/// Evaluates `f` on a fresh tape with frozen parameters and `x` as a constant.
pub fn run(
    store: &ParamStore<f64>,
    x: &Tensor<f64>,
    f: impl FnOnce(&mut Tape<f64>, &ParamVars, Var) -> agn::Result<Var>,
) -> Tensor<f64> {
    let mut tape = Tape::new();
    let p = store.bind_frozen(&mut tape);
    let v = tape.constant(x.clone());
    let out = f(&mut tape, &p, v).unwrap();
    tape.value(out).clone()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
