use super::config::ModelConfig;
use super::params::{seeded_rng, ParamBuilder, ParamStore, ParamVars};
use crate::error::{Error, Result};
use crate::layers::{self, AffmParams, Conv, GceParams, LieParams, MtdeParams};
use crate::tensor::{Scalar, Tape, Tensor, Var};

/// Bottleneck residual block: reduce, relate joints, fuse, expand, add.
#[derive(Clone, Debug, PartialEq)]
pub struct AjreBlock {
    pub reduce: Conv,
    pub gce: Option<GceParams>,
    pub lie: Option<LieParams>,
    pub affm: AffmParams,
    pub expand: Conv,
}

impl AjreBlock {
    fn new<T: Scalar>(b: &mut ParamBuilder<'_, T>, cfg: &ModelConfig) -> Result<Self> {
        let width = cfg.block_width();
        let reduce = Conv::pointwise(b, "reduce", cfg.d_p, width)?;
        let gce = if cfg.use_gce {
            let mut s = b.scope("gce");
            Some(GceParams::with_options(&mut s, cfg.n_joints, width, cfg.use_bau, cfg.similarity)?)
        } else {
            None
        };
        let lie = if cfg.use_lie { Some(LieParams::new(&mut b.scope("lie"), width)?) } else { None };
        let affm = AffmParams::new(&mut b.scope("affm"), cfg.fusion_inputs(), width, cfg.affm_ratio, cfg.use_affm)?;
        let expand = Conv::pointwise(b, "expand", width, cfg.d_p)?;
        Ok(Self { reduce, gce, lie, affm, expand })
    }

    /// `[N, d_p, T_c] -> [N, d_p, T_c]`.
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, p: &ParamVars, x: Var) -> Result<Var> {
        let h = self.reduce.mix_features(tape, p, x)?;
        let mut features = Vec::with_capacity(3);
        if let Some(gce) = &self.gce {
            features.push(layers::gce_forward(tape, p, gce, h)?);
        }
        if let Some(lie) = &self.lie {
            let (adjacent, distant) = layers::lie_forward(tape, p, lie, h)?;
            features.extend([adjacent, distant]);
        }
        let fused = layers::affm_forward(tape, p, &self.affm, &features)?;
        let expanded = self.expand.mix_features(tape, p, fused)?;
        tape.add(x, expanded)
    }
}

/// Dynamics extractor, temporal projection, encoder–decoder blocks and output head.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    config: ModelConfig,
    pub mtde: MtdeParams,
    /// Learned map along time, `2T - 1 -> temporal_dim`.
    pub projection: Conv,
    pub encoder: Vec<AjreBlock>,
    pub decoder: Vec<AjreBlock>,
    /// Channel reduction `d_p -> D`.
    pub head_channels: Conv,
    /// Learned map along time, `temporal_dim -> t_out`.
    pub head_time: Conv,
}

impl Model {
    /// Builds the network and a freshly initialized parameter store from `config.seed`.
    pub fn build<T: Scalar>(config: &ModelConfig) -> Result<(Self, ParamStore<T>)> {
        config.validate()?;
        let mut store = ParamStore::new();
        let mut rng = seeded_rng(config.seed);
        let mut b = ParamBuilder::new(&mut store, &mut rng);
        let mtde = {
            let mut s = b.scope("mtde");
            if config.use_mtde {
                MtdeParams::new(&mut s, config.coord_dim, config.d_p, &config.timescales)?
            } else {
                MtdeParams::single_scale(&mut s, config.coord_dim, config.d_p)?
            }
        };
        let projection = Conv::pointwise(&mut b, "projection", config.mtde_frames(), config.temporal_dim)?;
        let encoder = (0..config.encoder_layers)
            .map(|i| AjreBlock::new(&mut b.scope(format!("encoder.{i}")), config))
            .collect::<Result<Vec<_>>>()?;
        let decoder = (0..config.decoder_layers)
            .map(|i| AjreBlock::new(&mut b.scope(format!("decoder.{i}")), config))
            .collect::<Result<Vec<_>>>()?;
        let mut head = b.scope("head");
        let head_channels = Conv::pointwise(&mut head, "channels", config.d_p, config.coord_dim)?;
        let head_time = Conv::pointwise(&mut head, "time", config.temporal_dim, config.t_out)?;
        let model = Self { config: config.clone(), mtde, projection, encoder, decoder, head_channels, head_time };
        Ok((model, store))
    }

    /// Pairs the architecture of `config` with existing parameters, checking names and shapes.
    pub fn with_params<T: Scalar>(config: &ModelConfig, params: ParamStore<T>) -> Result<(Self, ParamStore<T>)> {
        let (model, fresh) = Self::build::<T>(config)?;
        let expected = fresh.layout();
        let got = params.layout();
        if expected != got {
            let detail = expected
                .iter()
                .zip(&got)
                .find(|(a, b)| a != b)
                .map(|(a, b)| format!("expected {} {:?}, found {} {:?}", a.0, a.1, b.0, b.1))
                .unwrap_or_else(|| format!("expected {} tensors, found {}", expected.len(), got.len()));
            return Err(Error::Config(format!("parameters do not match the model configuration: {detail}")));
        }
        Ok((model, params))
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Encoder block whose output is added to decoder block `i`'s input, mirrored
    /// around the deepest encoder block (which already feeds decoder 0 directly).
    pub fn skip_source(&self, decoder_index: usize) -> Option<usize> {
        (self.encoder.len() - 1).checked_sub(decoder_index + 1)
    }

    /// `[N, t_in, D] -> [N, t_out, D]`.
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, p: &ParamVars, x: Var) -> Result<Var> {
        let cfg = &self.config;
        let expected = [cfg.n_joints, cfg.t_in, cfg.coord_dim];
        if tape.shape(x) != expected {
            return Err(Error::Input(format!("model expects input {expected:?}, got {:?}", tape.shape(x))));
        }
        let dynamics = layers::mtde_forward(tape, p, &self.mtde, x)?;
        // [N, 2T-1, d_p] -> [N, d_p, temporal_dim]
        let by_channel = tape.transpose(dynamics, &[0, 2, 1])?;
        let mut h = self.projection.pointwise_apply(tape, p, by_channel)?;

        let mut skips = Vec::with_capacity(self.encoder.len());
        for block in &self.encoder {
            h = block.forward(tape, p, h)?;
            skips.push(h);
        }
        for (i, block) in self.decoder.iter().enumerate() {
            if let Some(src) = self.skip_source(i) {
                h = tape.add(h, skips[src])?;
            }
            h = block.forward(tape, p, h)?;
        }

        let seq = tape.transpose(h, &[0, 2, 1])?;
        let coords = self.head_channels.pointwise_apply(tape, p, seq)?;
        let by_coord = tape.transpose(coords, &[0, 2, 1])?;
        let future = self.head_time.pointwise_apply(tape, p, by_coord)?;
        tape.transpose(future, &[0, 2, 1])
    }

    /// Inference on one `[N, t_in, D]` window.
    pub fn predict<T: Scalar>(&self, params: &ParamStore<T>, input: &Tensor<T>) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let p = params.bind_frozen(&mut tape);
        let x = tape.constant(input.clone());
        let y = self.forward(&mut tape, &p, x)?;
        Ok(tape.value(y).clone())
    }
}
