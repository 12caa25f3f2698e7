use crate::error::{Error, Result};
use crate::layers::mtde::validate_timescales;
use crate::layers::Similarity;

/// Architecture hyperparameters. Defaults follow the H3.6M short-term setup.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub n_joints: usize,
    pub coord_dim: usize,
    pub t_in: usize,
    pub t_out: usize,
    pub d_p: usize,
    pub timescales: Vec<usize>,
    pub temporal_dim: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub affm_ratio: usize,
    pub seed: u64,
    pub use_mtde: bool,
    pub use_gce: bool,
    pub use_lie: bool,
    pub use_affm: bool,
    pub use_bau: bool,
    pub similarity: Similarity,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n_joints: 22,
            coord_dim: 3,
            t_in: 10,
            t_out: 10,
            d_p: 32,
            timescales: vec![3, 5, 7],
            temporal_dim: 64,
            encoder_layers: 5,
            decoder_layers: 4,
            affm_ratio: 4,
            seed: 0,
            use_mtde: true,
            use_gce: true,
            use_lie: true,
            use_affm: true,
            use_bau: true,
            similarity: Similarity::Cosine,
        }
    }
}

impl ModelConfig {
    /// Channel width inside each block's bottleneck.
    pub fn block_width(&self) -> usize {
        self.d_p / 2
    }

    /// Temporal length after the dynamics extractor.
    pub fn mtde_frames(&self) -> usize {
        2 * self.t_in - 1
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_joints", self.n_joints),
            ("coord_dim", self.coord_dim),
            ("t_out", self.t_out),
            ("d_p", self.d_p),
            ("temporal_dim", self.temporal_dim),
            ("encoder_layers", self.encoder_layers),
            ("affm_ratio", self.affm_ratio),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.t_in < 2 {
            return Err(Error::Config(format!("t_in must be at least 2, got {}", self.t_in)));
        }
        validate_timescales(&self.timescales)?;
        if !self.d_p.is_multiple_of(2) {
            return Err(Error::Config(format!("d_p must be even, got {}", self.d_p)));
        }
        let width = self.block_width();
        if self.use_lie && !width.is_multiple_of(2) {
            return Err(Error::Config(format!("block width d_p/2 = {width} must be even for the non-local path")));
        }
        if self.use_affm && !width.is_multiple_of(self.affm_ratio) {
            return Err(Error::Config(format!(
                "block width d_p/2 = {width} not divisible by affm_ratio {}",
                self.affm_ratio
            )));
        }
        if !self.use_gce && !self.use_lie {
            return Err(Error::Config("at least one of use_gce and use_lie must be enabled".into()));
        }
        Ok(())
    }

    /// Number of maps fed to the fusion module per block.
    pub fn fusion_inputs(&self) -> usize {
        usize::from(self.use_gce) + 2 * usize::from(self.use_lie)
    }
}
