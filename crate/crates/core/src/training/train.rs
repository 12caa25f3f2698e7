use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::adam::{adam_step, OptimState};
use super::schedule::LrSchedule;
use crate::data::WindowPair;
use crate::error::{Error, Result};
use crate::model::{mpjpe_loss, save_checkpoint, seeded_rng, Model, ParamStore};
use crate::tensor::{Tape, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
    pub schedule: LrSchedule,
    /// Stops after this many optimizer steps even mid-epoch.
    pub max_iterations: Option<usize>,
    /// Receives `epoch_NNN.agnc` after every epoch when set.
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 16,
            seed: 0,
            schedule: LrSchedule::default(),
            max_iterations: None,
            checkpoint_dir: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossRecord {
    pub epoch: usize,
    pub iteration: usize,
    /// Mean MPJPE of the batch before the update.
    pub loss: f64,
    pub lr: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<LossRecord>,
    pub checkpoints: Vec<PathBuf>,
}

impl TrainHistory {
    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,iteration,loss,lr\n");
        for r in &self.records {
            writeln!(out, "{},{},{},{}", r.epoch, r.iteration, r.loss, r.lr).expect("String write");
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}

pub fn checkpoint_path(dir: &Path, epoch: usize) -> PathBuf {
    dir.join(format!("epoch_{epoch:03}.agnc"))
}

/// Loss and parameter gradients for one window, in store order.
pub fn sample_gradient(
    model: &Model,
    params: &ParamStore<f32>,
    pair: &WindowPair,
    weight: f64,
) -> Result<(f64, Vec<Vec<f32>>)> {
    let mut tape = Tape::new();
    let p = params.bind(&mut tape);
    let x = tape.constant(pair.input.clone());
    let y = tape.constant(pair.target.clone());
    let pred = model.forward(&mut tape, &p, x)?;
    let loss = mpjpe_loss(&mut tape, pred, y)?;
    let value = tape.value(loss).data()[0] as f64;
    let scaled = tape.scale(loss, weight);
    let grads = tape.backward(scaled)?;
    let per_param = params.iter().zip(p.iter()).map(|((_, t), var)| grads.get_or_zeros(var, t.len())).collect();
    Ok((value, per_param))
}

/// Mini-batch Adam on mean MPJPE. Per-window gradients are computed in
/// parallel and summed in batch order, so results depend only on `config.seed`.
pub fn train(model: &Model, params: &mut ParamStore<f32>, data: &[WindowPair], config: &TrainConfig) -> Result<TrainHistory> {
    if data.is_empty() {
        return Err(Error::Input("training set is empty".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    if let Some(dir) = &config.checkpoint_dir {
        fs::create_dir_all(dir)?;
    }
    let mut state = OptimState::new(params);
    let mut rng = seeded_rng(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = TrainHistory::default();
    let mut iteration = 0;
    let mut first_loss = None;

    'epochs: for epoch in 0..config.epochs {
        let lr = config.schedule.at(epoch);
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            if config.max_iterations.is_some_and(|max| iteration >= max) {
                break 'epochs;
            }
            let weight = 1.0 / batch.len() as f64;
            let results = batch
                .par_iter()
                .map(|&i| sample_gradient(model, params, &data[i], weight))
                .collect::<Result<Vec<_>>>()?;
            let loss = results.iter().map(|(l, _)| l).sum::<f64>() * weight;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("loss became non-finite at iteration {iteration}")));
            }
            let initial = *first_loss.get_or_insert(loss);
            if loss > 10.0 * initial {
                log::warn!("loss {loss:.4} at iteration {iteration} exceeds ten times the initial {initial:.4}");
            }
            for (_, grads) in &results {
                for ((_, tensor), g) in params.iter_mut().zip(grads) {
                    tensor.accumulate_grad(g)?;
                }
            }
            adam_step(params, &mut state, lr)?;
            history.records.push(LossRecord { epoch, iteration, loss, lr });
            iteration += 1;
        }
        log::info!(
            "epoch {epoch}: loss {:.4}",
            history.records.last().map_or(f64::NAN, |r| r.loss)
        );
        if let Some(dir) = &config.checkpoint_dir {
            let path = checkpoint_path(dir, epoch);
            save_checkpoint(params, &path)?;
            history.checkpoints.push(path);
        }
    }
    Ok(history)
}

/// Mean MPJPE of the model over a window set, without updating anything.
pub fn mean_loss(model: &Model, params: &ParamStore<f32>, data: &[WindowPair]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Input("no windows to score".into()));
    }
    let losses = data
        .par_iter()
        .map(|pair| {
            let pred: Tensor<f32> = model.predict(params, &pair.input)?;
            crate::model::mpjpe(&pred, &pair.target)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}
