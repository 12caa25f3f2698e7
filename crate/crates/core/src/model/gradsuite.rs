//! Central-difference checks of every layer and a tiny full model.

use rand::Rng;

use super::config::ModelConfig;
use super::loss::mpjpe_loss;
use super::network::Model;
use super::params::{seeded_rng, ParamBuilder, ParamStore, ParamVars};
use crate::error::Result;
use crate::layers::{self, AffmParams, GceParams, LieParams, MtdeParams};
use crate::tensor::{grad_check_many, GradCheckReport, Tape, Tensor, Var};

pub const DEFAULT_EPS: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteRow {
    pub name: &'static str,
    pub report: GradCheckReport,
}

/// Names of the items [`gradient_suite`] checks, in order.
pub const SUITE_ITEMS: [&str; 8] =
    ["mtde", "bau+csu", "gce", "lie.adjacent", "lie.non_local", "affm", "model.tiny", "loss.mpjpe"];

/// The configuration used for the full-model row.
pub fn tiny_config(seed: u64) -> ModelConfig {
    ModelConfig {
        n_joints: 4,
        t_in: 4,
        t_out: 2,
        d_p: 8,
        temporal_dim: 8,
        encoder_layers: 2,
        decoder_layers: 1,
        affm_ratio: 2,
        seed,
        ..ModelConfig::default()
    }
}

struct Fixture {
    store: ParamStore<f64>,
    rng: rand_chacha::ChaCha8Rng,
}

impl Fixture {
    fn new(seed: u64) -> Self {
        Self { store: ParamStore::new(), rng: seeded_rng(seed) }
    }

    fn build<P>(&mut self, f: impl FnOnce(&mut ParamBuilder<'_, f64>) -> Result<P>) -> Result<P> {
        let mut b = ParamBuilder::new(&mut self.store, &mut self.rng);
        let params = f(&mut b)?;
        // Nonzero biases so every term of the forward pass is exercised.
        for (_, t) in self.store.iter_mut() {
            for v in t.data_mut() {
                *v += self.rng.random_range(-0.25..0.25);
            }
        }
        Ok(params)
    }

    fn input(&mut self, shape: &[usize]) -> Result<Tensor<f64>> {
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| self.rng.random_range(-1.0..1.0)).collect())
    }

    /// Checks `f(input, params)` with respect to the input and every parameter.
    fn check(
        &self,
        input: Tensor<f64>,
        eps: f64,
        f: impl Fn(&mut Tape<f64>, &ParamVars, Var) -> Result<Var> + Sync,
    ) -> Result<GradCheckReport> {
        let mut inputs = vec![input];
        inputs.extend(self.store.iter().map(|(_, t)| t.clone()));
        grad_check_many(|tape, vars| f(tape, &ParamVars::from(vars[1..].to_vec()), vars[0]), &inputs, eps)
    }
}

/// Runs one named item; unknown names yield `None`.
pub fn check_item(name: &str, seed: u64, eps: f64) -> Result<Option<GradCheckReport>> {
    let mut fx = Fixture::new(seed);
    let (n, d, t) = (4, 6, 5);
    let report = match name {
        "mtde" => {
            let params = fx.build(|b| MtdeParams::new(b, 3, 4, &[3, 5, 7]))?;
            let x = fx.input(&[3, 5, 3])?;
            fx.check(x, eps, |tape, p, x| layers::mtde_forward(tape, p, &params, x))?
        }
        "bau+csu" => {
            let params = fx.build(|b| GceParams::new(b, n, d))?;
            let x = fx.input(&[n, d, t])?;
            fx.check(x, eps, |tape, p, x| {
                let (_, x_new) = layers::balance_attractor(tape, p, &params, x)?;
                Ok(layers::cosine_similarity_unit(tape, p, &params, x_new)?.var())
            })?
        }
        "gce" => {
            let params = fx.build(|b| GceParams::new(b, n, d))?;
            let x = fx.input(&[n, d, t])?;
            fx.check(x, eps, |tape, p, x| layers::gce_forward(tape, p, &params, x))?
        }
        "lie.adjacent" | "lie.non_local" => {
            let params = fx.build(|b| LieParams::new(b, d))?;
            let x = fx.input(&[n, d, t])?;
            let distant = name == "lie.non_local";
            fx.check(x, eps, |tape, p, x| {
                let (adjacent, far) = layers::lie_forward(tape, p, &params, x)?;
                Ok(if distant { far } else { adjacent })
            })?
        }
        "affm" => {
            let params = fx.build(|b| AffmParams::new(b, 3, d, 2, true))?;
            let x = fx.input(&[3 * n, d, t])?;
            fx.check(x, eps, |tape, p, x| {
                let parts = (0..3).map(|i| tape.slice(x, 0, i * n, n)).collect::<Result<Vec<_>>>()?;
                layers::affm_forward(tape, p, &params, &parts)
            })?
        }
        "model.tiny" => {
            let cfg = tiny_config(seed);
            let (model, store) = Model::build::<f64>(&cfg)?;
            fx.store = store;
            fx.build(|_| Ok(()))?;
            let x = fx.input(&[cfg.n_joints, cfg.t_in, cfg.coord_dim])?;
            fx.check(x, eps, |tape, p, x| model.forward(tape, p, x))?
        }
        "loss.mpjpe" => {
            let pred = fx.input(&[3, 2, 3])?;
            let truth = fx.input(&[3, 2, 3])?;
            fx.check(pred, eps, |tape, _, x| {
                let y = tape.constant(truth.clone());
                mpjpe_loss(tape, x, y)
            })?
        }
        _ => return Ok(None),
    };
    Ok(Some(report))
}

/// Every item of [`SUITE_ITEMS`], in order.
pub fn gradient_suite(seed: u64, eps: f64) -> Result<Vec<SuiteRow>> {
    SUITE_ITEMS
        .iter()
        .map(|&name| {
            let report = check_item(name, seed, eps)?.expect("known item");
            Ok(SuiteRow { name, report })
        })
        .collect()
}
