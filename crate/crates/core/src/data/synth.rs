//! Planar articulated chains driven by sinusoidal joint angles.
//!
//! Joint 0 is the root at the origin. Link `j` connects joint `j` to joint
//! `j + 1`; its angle relative to the previous link is
//! `A_j · sin(2π f_j t + φ_j)`, so the absolute heading of link `j` is the sum
//! of the relative angles up to and including `j`. Positions are in
//! millimeters with `z = 0`.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::motion::MotionSequence;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub bone_lengths: Vec<f64>,
    pub n_frames: usize,
    pub fps: f64,
    /// Hz, one per link.
    pub frequencies: Vec<f64>,
    /// Radians, one per link.
    pub amplitudes: Vec<f64>,
    /// Radians, one per link; drawn uniformly from the seed when absent.
    pub phases: Option<Vec<f64>>,
    /// Standard deviation of additive Gaussian noise, millimeters.
    pub noise_sd: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// A chain with `links` bones and varied default motion parameters.
    pub fn chain(links: usize, n_frames: usize, fps: f64, seed: u64) -> Self {
        let bone_lengths = (0..links).map(|j| 300.0 - 40.0 * (j % 4) as f64).collect();
        let frequencies = (0..links).map(|j| 0.6 + 0.35 * j as f64).collect();
        let amplitudes = (0..links).map(|j| 0.7 - 0.1 * (j % 4) as f64).collect();
        Self { bone_lengths, n_frames, fps, frequencies, amplitudes, phases: None, noise_sd: 0.0, seed }
    }

    pub fn n_joints(&self) -> usize {
        self.bone_lengths.len() + 1
    }

    fn validate(&self) -> Result<()> {
        let links = self.bone_lengths.len();
        if links == 0 {
            return Err(Error::Input("chain needs at least one bone".into()));
        }
        if let Some(l) = self.bone_lengths.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::Input(format!("bone lengths must be positive, got {l}")));
        }
        if self.frequencies.len() != links || self.amplitudes.len() != links {
            return Err(Error::Input(format!("need {links} frequencies and amplitudes")));
        }
        if self.phases.as_ref().is_some_and(|p| p.len() != links) {
            return Err(Error::Input(format!("need {links} phases")));
        }
        if self.n_frames == 0 {
            return Err(Error::Input("n_frames must be positive".into()));
        }
        if !(self.fps > 0.0) {
            return Err(Error::Input(format!("fps must be positive, got {}", self.fps)));
        }
        if !(self.noise_sd >= 0.0) {
            return Err(Error::Input(format!("noise_sd must be non-negative, got {}", self.noise_sd)));
        }
        Ok(())
    }
}

/// Edges `(j, j + 1)` of a chain with `n_joints` joints.
pub fn chain_edges(n_joints: usize) -> Vec<(usize, usize)> {
    (1..n_joints).map(|j| (j - 1, j)).collect()
}

pub fn synthesize(spec: &SynthSpec) -> Result<MotionSequence> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let phases = match &spec.phases {
        Some(p) => p.clone(),
        None => (0..spec.bone_lengths.len()).map(|_| rng.random_range(0.0..TAU)).collect(),
    };
    let noise = if spec.noise_sd > 0.0 {
        Some(Normal::new(0.0, spec.noise_sd).map_err(|e| Error::Input(e.to_string()))?)
    } else {
        None
    };
    let n_joints = spec.n_joints();
    let mut coords = Vec::with_capacity(spec.n_frames * n_joints * 3);
    for f in 0..spec.n_frames {
        let t = f as f64 / spec.fps;
        let (mut x, mut y, mut heading) = (0.0f64, 0.0f64, 0.0f64);
        coords.extend([0.0f32; 3]);
        for (j, &len) in spec.bone_lengths.iter().enumerate() {
            heading += spec.amplitudes[j] * (TAU * spec.frequencies[j] * t + phases[j]).sin();
            x += len * heading.cos();
            y += len * heading.sin();
            coords.extend([x as f32, y as f32, 0.0]);
        }
    }
    if let Some(dist) = noise {
        for v in coords.iter_mut() {
            *v += dist.sample(&mut rng) as f32;
        }
    }
    MotionSequence::new(n_joints, spec.fps, coords)
}
