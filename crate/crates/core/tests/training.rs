mod common;

use agn::data::{synthesize, windows, SynthSpec, WindowPair};
use agn::model::{load_checkpoint, Model, ModelConfig, ParamStore};
use agn::tensor::Tensor;
use agn::training::{
    adam_step, evaluate, lr_at_epoch, mean_loss, train, LrSchedule, OptimState, Predictor, TrainConfig, Trained,
    ZeroVelocity,
};
use agn::Error;
use common::oracles::{self, Stream};
use proptest::prelude::*;

fn small_config(seed: u64) -> ModelConfig {
    ModelConfig {
        n_joints: 4,
        d_p: 8,
        temporal_dim: 8,
        encoder_layers: 1,
        decoder_layers: 1,
        affm_ratio: 2,
        seed,
        ..ModelConfig::default()
    }
}

fn dataset(seed: u64, frames: usize, stride: usize) -> Vec<WindowPair> {
    windows(&synthesize(&SynthSpec::chain(3, frames, 25.0, seed)).unwrap(), 10, 10, stride).unwrap()
}

#[test]
fn two_adam_steps_on_a_quadratic_match_hand_computation() {
    // f(w) = (w - 3)^2, w0 = 1, lr = 0.1.
    let mut store = ParamStore::<f64>::new();
    store.insert("w", Tensor::scalar(1.0)).unwrap();
    let mut state = OptimState::new(&store);
    let (b1, b2, eps, lr) = (0.9f64, 0.999f64, 1e-8, 0.1);
    let (mut w, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
    for step in 1..=2 {
        let g = 2.0 * (w - 3.0);
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let mh = m / (1.0 - b1.powi(step));
        let vh = v / (1.0 - b2.powi(step));
        w -= lr * mh / (vh.sqrt() + eps);

        let current = store.by_name("w").unwrap().data()[0];
        store.by_name_mut("w").unwrap().accumulate_grad(&[2.0 * (current - 3.0)]).unwrap();
        adam_step(&mut store, &mut state, lr).unwrap();
        assert!((store.by_name("w").unwrap().data()[0] - w).abs() < 1e-12);
    }
    assert_eq!(state.step, 2);
    assert!((w - 1.19983).abs() < 1e-5, "{w}");
}

#[test]
fn schedule_values() {
    assert_eq!(lr_at_epoch(0), 5e-4);
    assert!((lr_at_epoch(1) - 4.8e-4).abs() < 1e-12);
    assert!((lr_at_epoch(10) - 5e-4 * 0.96f64.powi(10)).abs() < 1e-15);
    assert_eq!(lr_at_epoch(40), 1e-4);
    assert_eq!(LrSchedule::Constant(0.3).at(99), 0.3);
}

proptest! {
    #[test]
    fn adam_steps_are_bounded_by_lr(grads in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 6), 1..8), lr in 1e-5f64..1.0) {
        let mut store = ParamStore::<f64>::new();
        store.insert("p", Tensor::zeros(&[6])).unwrap();
        let mut state = OptimState::new(&store);
        for g in grads {
            let before = store.by_name("p").unwrap().data().to_vec();
            store.by_name_mut("p").unwrap().accumulate_grad(&g).unwrap();
            adam_step(&mut store, &mut state, lr).unwrap();
            for (a, b) in before.iter().zip(store.by_name("p").unwrap().data()) {
                // |m̂| / sqrt(v̂) ≤ (1 - β₁) / sqrt(1 - β₂) in the worst case; per-step moves stay near lr.
                prop_assert!((a - b).abs() <= lr * (1.0 - 0.9) / (1.0f64 - 0.999).sqrt() * 1.0001);
            }
        }
    }
}

#[test]
fn training_is_deterministic_per_seed() {
    let data = dataset(1, 60, 3);
    let run = |seed| {
        let (model, mut params) = Model::build::<f32>(&small_config(0)).unwrap();
        let cfg = TrainConfig { epochs: 2, batch_size: 4, seed, ..TrainConfig::default() };
        let h = train(&model, &mut params, &data, &cfg).unwrap();
        (h.losses(), params)
    };
    let (a, pa) = run(5);
    let (b, pb) = run(5);
    assert_eq!(a, b);
    assert_eq!(pa, pb);
    let (c, _) = run(6);
    assert_ne!(a, c);
}

#[test]
fn zero_learning_rate_keeps_loss_constant() {
    let data = dataset(2, 40, 20);
    assert_eq!(data.len(), 2);
    let (model, mut params) = Model::build::<f32>(&small_config(1)).unwrap();
    let before = params.clone();
    let cfg = TrainConfig { epochs: 4, batch_size: 2, schedule: LrSchedule::Constant(0.0), ..TrainConfig::default() };
    let h = train(&model, &mut params, &data, &cfg).unwrap();
    let l = h.losses();
    assert_eq!(l.len(), 4);
    assert!(l.iter().all(|&v| v == l[0]));
    let values = |s: &ParamStore<f32>| s.iter().flat_map(|(_, t)| t.data().to_vec()).collect::<Vec<_>>();
    assert_eq!(values(&params), values(&before));
}

#[test]
fn empty_dataset_is_an_input_error() {
    let (model, mut params) = Model::build::<f32>(&small_config(0)).unwrap();
    assert!(matches!(train(&model, &mut params, &[], &TrainConfig::default()), Err(Error::Input(_))));
}

#[test]
fn checkpoints_and_loss_csv_per_epoch() {
    let data = dataset(3, 50, 10);
    let dir = tempfile::tempdir().unwrap();
    let (model, mut params) = Model::build::<f32>(&small_config(2)).unwrap();
    let cfg = TrainConfig { epochs: 3, batch_size: 2, checkpoint_dir: Some(dir.path().join("ckpt")), ..TrainConfig::default() };
    let h = train(&model, &mut params, &data, &cfg).unwrap();
    assert_eq!(h.checkpoints.len(), 3);
    assert_eq!(load_checkpoint::<f32>(h.checkpoints.last().unwrap()).unwrap(), {
        let mut p = params.clone();
        p.iter_mut().for_each(|(_, t)| t.clear_grad());
        p
    });
    let csv = h.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("epoch,iteration,loss,lr"));
    assert_eq!(lines.count(), h.records.len());
    assert_eq!(h.records.len(), 3 * data.len().div_ceil(2));
    assert_eq!(h.records[data.len().div_ceil(2)].lr, lr_at_epoch(1));
}

#[test]
fn smoothed_loss_falls_over_200_iterations() {
    let mut falling = 0;
    for seed in 0..10 {
        let data = dataset(seed, 300, 2);
        let (model, mut params) = Model::build::<f32>(&small_config(seed)).unwrap();
        let cfg = TrainConfig { epochs: 100, batch_size: 4, seed, max_iterations: Some(200), ..TrainConfig::default() };
        let l = train(&model, &mut params, &data, &cfg).unwrap().losses();
        assert_eq!(l.len(), 200);
        let smooth = |c: &[f64]| c.iter().sum::<f64>() / c.len() as f64;
        if smooth(&l[190..]) < smooth(&l[..10]) {
            falling += 1;
        }
    }
    assert!(falling >= 9, "{falling}/10");
}

/// Returns the true future for a fixed window set, looked up by the first input value.
struct Oracle(Vec<WindowPair>);

impl Predictor for Oracle {
    fn predict(&self, input: &Tensor<f32>) -> agn::Result<Tensor<f32>> {
        Ok(self.0.iter().find(|w| &w.input == input).unwrap().target.clone())
    }
}

/// Deterministic pseudo-random output derived from the input.
struct Noise;

impl Predictor for Noise {
    fn predict(&self, input: &Tensor<f32>) -> agn::Result<Tensor<f32>> {
        let mut s = Stream::new(input.data()[3].to_bits() as u64);
        let n = input.shape()[0];
        Tensor::new(&[n, 10, 3], (0..n * 30).map(|_| (s.next() * 500.0) as f32).collect())
    }
}

#[test]
fn evaluate_stub_predictors() {
    let data = dataset(4, 80, 7);
    let horizons = [10, 2, 4, 8];

    let r = evaluate(&ZeroVelocity { t_out: 10 }, &data, &horizons).unwrap();
    assert_eq!(r.horizons, vec![2, 4, 8, 10]);
    assert_eq!(r.model, r.baseline);
    assert_eq!(r.samples, data.len());

    let r = evaluate(&Oracle(data.clone()), &data, &horizons).unwrap();
    assert!(r.model.iter().all(|&v| v == 0.0));
    assert!(r.baseline.iter().all(|&v| v > 0.0));

    let r = evaluate(&Noise, &data, &horizons).unwrap();
    for (k, &h) in r.horizons.iter().enumerate() {
        let mut total = 0.0;
        for w in &data {
            let pred = Noise.predict(&w.input).unwrap();
            let pick = |t: &Tensor<f32>| -> Vec<f64> {
                (0..4).flat_map(|j| (0..3).map(move |c| (j, c))).map(|(j, c)| t.data()[(j * 10 + h - 1) * 3 + c] as f64).collect()
            };
            total += oracles::mpjpe(&pick(&pred), &pick(&w.target));
        }
        assert!((r.model[k] - total / data.len() as f64).abs() < 1e-6);
    }

    assert!(matches!(evaluate(&Noise, &data, &[11]), Err(Error::Input(_))));
    assert!(matches!(evaluate(&Noise, &data, &[0]), Err(Error::Input(_))));
}

#[test]
fn evaluate_ignores_dataset_order() {
    let data = dataset(5, 120, 3);
    let (model, params) = Model::build::<f32>(&small_config(3)).unwrap();
    let trained = Trained { model: &model, params: &params };
    let a = evaluate(&trained, &data, &[2, 4, 8, 10]).unwrap();
    let mut shuffled = data.clone();
    shuffled.reverse();
    shuffled.swap(0, 5);
    let b = evaluate(&trained, &shuffled, &[2, 4, 8, 10]).unwrap();
    assert_eq!(a, b);
    assert!(mean_loss(&model, &params, &data).unwrap() > 0.0);
}
