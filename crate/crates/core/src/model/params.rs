use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{Gradients, Scalar, Tape, Tensor, Var};

/// Index of a parameter inside its [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

/// Named learnable tensors in insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore<T> {
    entries: IndexMap<String, Tensor<T>>,
}

/// The tape variables bound to every parameter for one forward pass.
#[derive(Clone, Debug)]
pub struct ParamVars(Vec<Var>);

impl ParamVars {
    pub fn get(&self, id: ParamId) -> Var {
        self.0[id.0]
    }

    /// Variables in store order.
    pub fn iter(&self) -> impl Iterator<Item = Var> + '_ {
        self.0.iter().copied()
    }
}

impl From<Vec<Var>> for ParamVars {
    /// Variables in store order, e.g. leaves recorded by a custom harness.
    fn from(vars: Vec<Var>) -> Self {
        ParamVars(vars)
    }
}

impl std::ops::Index<ParamId> for ParamVars {
    type Output = Var;
    fn index(&self, id: ParamId) -> &Var {
        &self.0[id.0]
    }
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self { entries: IndexMap::new() }
    }

    pub fn insert(&mut self, name: impl Into<String>, mut tensor: Tensor<T>) -> Result<ParamId> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(Error::Config(format!("duplicate parameter name {name}")));
        }
        tensor.set_requires_grad(true);
        let (idx, _) = self.entries.insert_full(name, tensor);
        Ok(ParamId(idx))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalars across all parameters.
    pub fn num_scalars(&self) -> usize {
        self.entries.values().map(Tensor::len).sum()
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.entries[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.entries[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.entries.get_index_of(name).map(ParamId)
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor<T>> {
        self.entries.get(name)
    }

    pub fn by_name_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.entries.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<T>)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    /// Records every parameter as a differentiable leaf.
    pub fn bind(&self, tape: &mut Tape<T>) -> ParamVars {
        ParamVars(self.entries.values().map(|t| tape.leaf(t.clone())).collect())
    }

    /// Records every parameter as a constant (inference only).
    pub fn bind_frozen(&self, tape: &mut Tape<T>) -> ParamVars {
        ParamVars(self.entries.values().map(|t| tape.constant(t.clone())).collect())
    }

    /// Adds the gradients of one backward pass into each parameter's grad buffer.
    pub fn accumulate(&mut self, vars: &ParamVars, grads: &Gradients<T>) -> Result<()> {
        for (tensor, &var) in self.entries.values_mut().zip(&vars.0) {
            let g = grads.get_or_zeros(var, tensor.len());
            tensor.accumulate_grad(&g)?;
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.entries.values_mut().for_each(Tensor::zero_grad);
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore { entries: self.entries.iter().map(|(k, v)| (k.clone(), v.cast())).collect() }
    }

    /// Name and shape of every parameter, in order.
    pub fn layout(&self) -> Vec<(String, Vec<usize>)> {
        self.entries.iter().map(|(k, v)| (k.clone(), v.shape().to_vec())).collect()
    }
}

/// Creates parameters under a dotted name prefix with seeded fan-in initialization.
pub struct ParamBuilder<'a, T> {
    store: &'a mut ParamStore<T>,
    rng: &'a mut ChaCha8Rng,
    prefix: String,
}

impl<'a, T: Scalar> ParamBuilder<'a, T> {
    pub fn new(store: &'a mut ParamStore<T>, rng: &'a mut ChaCha8Rng) -> Self {
        Self { store, rng, prefix: String::new() }
    }

    pub fn scope(&mut self, name: impl AsRef<str>) -> ParamBuilder<'_, T> {
        let prefix = if self.prefix.is_empty() {
            name.as_ref().to_string()
        } else {
            format!("{}.{}", self.prefix, name.as_ref())
        };
        ParamBuilder { store: self.store, rng: self.rng, prefix }
    }

    fn full_name(&self, name: &str) -> String {
        if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{}", self.prefix, name)
        }
    }

    /// Uniform in `±1/sqrt(fan_in)`.
    pub fn weight(&mut self, name: &str, shape: &[usize], fan_in: usize) -> Result<ParamId> {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| T::from_f64(self.rng.random_range(-bound..bound))).collect();
        let name = self.full_name(name);
        self.store.insert(name, Tensor::new(shape, data)?)
    }

    pub fn zeros(&mut self, name: &str, shape: &[usize]) -> Result<ParamId> {
        let name = self.full_name(name);
        self.store.insert(name, Tensor::zeros(shape))
    }
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_scoped_and_unique() {
        let mut store = ParamStore::<f32>::new();
        let mut rng = seeded_rng(1);
        let mut b = ParamBuilder::new(&mut store, &mut rng);
        let mut enc = b.scope("encoder");
        let mut blk = enc.scope("3");
        blk.weight("w", &[2, 2], 2).unwrap();
        assert!(blk.zeros("w", &[1]).is_err());
        assert!(store.by_name("encoder.3.w").is_some());
        assert_eq!(store.num_scalars(), 4);
    }

    #[test]
    fn fan_in_bounds_hold() {
        let mut store = ParamStore::<f64>::new();
        let mut rng = seeded_rng(2);
        let id = ParamBuilder::new(&mut store, &mut rng).weight("w", &[16, 8], 16).unwrap();
        assert!(store.get(id).data().iter().all(|v| v.abs() < 0.25));
    }
}
