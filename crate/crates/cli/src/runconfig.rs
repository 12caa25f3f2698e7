//! `key=value` run configuration shared by every subcommand.

use std::fmt::Write as _;

use agn::layers::Similarity;
use agn::training::{LrSchedule, TrainConfig};
use agn::ModelConfig;

use crate::error::CliError;

/// Model hyperparameters plus training settings, written next to checkpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub lr_floor: f64,
    pub stride: usize,
    pub max_iterations: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let LrSchedule::Decay { initial, factor, floor } = LrSchedule::default() else { unreachable!() };
        let train = TrainConfig::default();
        Self {
            model: ModelConfig::default(),
            epochs: train.epochs,
            batch_size: train.batch_size,
            lr: initial,
            lr_decay: factor,
            lr_floor: floor,
            stride: 1,
            max_iterations: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("invalid value {value:?} for {key}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, String> {
    match value {
        "true" | "1" | "on" | "yes" => Ok(true),
        "false" | "0" | "off" | "no" => Ok(false),
        _ => Err(format!("invalid boolean {value:?} for {key}")),
    }
}

impl RunConfig {
    /// Sets one key; unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let m = &mut self.model;
        match key {
            "n_joints" => m.n_joints = parse(key, value)?,
            "coord_dim" => m.coord_dim = parse(key, value)?,
            "t_in" => m.t_in = parse(key, value)?,
            "t_out" => m.t_out = parse(key, value)?,
            "d_p" => m.d_p = parse(key, value)?,
            "timescales" => {
                m.timescales = value.split(',').map(|v| parse(key, v.trim())).collect::<Result<_, _>>()?;
            }
            "temporal_dim" => m.temporal_dim = parse(key, value)?,
            "encoder_layers" => m.encoder_layers = parse(key, value)?,
            "decoder_layers" => m.decoder_layers = parse(key, value)?,
            "affm_ratio" => m.affm_ratio = parse(key, value)?,
            "seed" => m.seed = parse(key, value)?,
            "use_mtde" => m.use_mtde = parse_bool(key, value)?,
            "use_gce" => m.use_gce = parse_bool(key, value)?,
            "use_lie" => m.use_lie = parse_bool(key, value)?,
            "use_affm" => m.use_affm = parse_bool(key, value)?,
            "use_bau" => m.use_bau = parse_bool(key, value)?,
            "similarity" => {
                m.similarity = match value {
                    "cosine" => Similarity::Cosine,
                    "softmax" => Similarity::Softmax,
                    _ => return Err(format!("similarity must be cosine or softmax, got {value:?}")),
                }
            }
            "epochs" => self.epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "lr_decay" => self.lr_decay = parse(key, value)?,
            "lr_floor" => self.lr_floor = parse(key, value)?,
            "stride" => self.stride = parse(key, value)?,
            "max_iterations" => {
                self.max_iterations = if value == "none" { None } else { Some(parse(key, value)?) };
            }
            _ => return Err(format!("unknown config key {key:?}")),
        }
        Ok(())
    }

    /// Applies `key=value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("{origin}:{}: expected key=value, got {line:?}", i + 1)))?;
            self.set(k.trim(), v.trim()).map_err(|e| CliError::usage(format!("{origin}:{}: {e}", i + 1)))?;
        }
        Ok(())
    }

    /// Every key, in a form [`apply_text`](Self::apply_text) reads back.
    pub fn to_text(&self) -> String {
        let m = &self.model;
        let timescales: Vec<String> = m.timescales.iter().map(ToString::to_string).collect();
        let similarity = match m.similarity {
            Similarity::Cosine => "cosine",
            Similarity::Softmax => "softmax",
        };
        let mut out = String::new();
        let mut kv = |k: &str, v: String| writeln!(out, "{k}={v}").expect("String write");
        kv("n_joints", m.n_joints.to_string());
        kv("coord_dim", m.coord_dim.to_string());
        kv("t_in", m.t_in.to_string());
        kv("t_out", m.t_out.to_string());
        kv("d_p", m.d_p.to_string());
        kv("timescales", timescales.join(","));
        kv("temporal_dim", m.temporal_dim.to_string());
        kv("encoder_layers", m.encoder_layers.to_string());
        kv("decoder_layers", m.decoder_layers.to_string());
        kv("affm_ratio", m.affm_ratio.to_string());
        kv("seed", m.seed.to_string());
        kv("use_mtde", m.use_mtde.to_string());
        kv("use_gce", m.use_gce.to_string());
        kv("use_lie", m.use_lie.to_string());
        kv("use_affm", m.use_affm.to_string());
        kv("use_bau", m.use_bau.to_string());
        kv("similarity", similarity.to_string());
        kv("epochs", self.epochs.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("lr", self.lr.to_string());
        kv("lr_decay", self.lr_decay.to_string());
        kv("lr_floor", self.lr_floor.to_string());
        kv("stride", self.stride.to_string());
        kv("max_iterations", self.max_iterations.map_or("none".into(), |v| v.to_string()));
        out
    }

    pub fn schedule(&self) -> LrSchedule {
        LrSchedule::Decay { initial: self.lr, factor: self.lr_decay, floor: self.lr_floor }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.batch_size == 0 || self.stride == 0 {
            return Err(CliError::usage("batch_size and stride must be positive"));
        }
        if !(self.lr >= 0.0 && self.lr_decay > 0.0 && self.lr_floor >= 0.0) {
            return Err(CliError::usage("lr and lr_floor must be non-negative and lr_decay positive"));
        }
        self.model.validate().map_err(|e| CliError::usage(e.to_string()))
    }
}
