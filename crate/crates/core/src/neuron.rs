//! Analog neuron: differential sensing, input-referred noise, binarized
//! activation and the output-layer readout.
//!
//! Noise comes from a [`NoiseStream`]: ChaCha8 keyed by a 64-bit seed
//! (`rand_chacha::ChaCha8Rng::seed_from_u64`), with standard normal variates
//! drawn by `rand_distr::StandardNormal`. ChaCha is counter-based, so the
//! n-th draw of a seed is fixed. During inference each image gets its own
//! stream seeded with `base_seed ^ image_index`, and draws are consumed
//! layer-major, neuron-minor: one draw per neuron in output order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::tech::TechnologyProfile;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronConfig {
    pub r_sense: f64,
    pub sigma_noise: f64,
    pub vdd: f64,
}

impl NeuronConfig {
    pub fn from_technology(tech: &TechnologyProfile) -> Self {
        Self {
            r_sense: tech.r_sense,
            sigma_noise: tech.sigma_noise,
            vdd: tech.vdd,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NoiseStream {
    seed: u64,
    draws: u64,
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            draws: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Stream for one image of a batch evaluated under `base_seed`.
    pub fn for_image(base_seed: u64, image_index: u64) -> Self {
        Self::new(base_seed ^ image_index)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// Next standard normal variate.
    pub fn next_gaussian(&mut self) -> f64 {
        self.draws += 1;
        StandardNormal.sample(&mut self.rng)
    }
}

/// Differential voltage at the amplifier input: `(I+ - I-) r_sense + noise`.
/// A draw is consumed even when `sigma_noise` is zero so the stream position
/// depends only on how many neurons have fired.
pub fn sense(i_plus: f64, i_minus: f64, cfg: &NeuronConfig, noise: &mut NoiseStream) -> f64 {
    sense_differential(i_plus - i_minus, cfg, noise)
}

/// [`sense`] for an already formed differential current `I+ - I-`.
pub fn sense_differential(i_diff: f64, cfg: &NeuronConfig, noise: &mut NoiseStream) -> f64 {
    let eta = noise.next_gaussian();
    let v = i_diff * cfg.r_sense;
    if cfg.sigma_noise == 0.0 {
        v
    } else {
        v + cfg.sigma_noise * eta
    }
}

/// Hidden-layer activation: full-swing `vdd` for `v_diff >= 0`, else 0 V.
pub fn activate_hidden(v_diff: f64, cfg: &NeuronConfig) -> f64 {
    if v_diff >= 0.0 {
        cfg.vdd
    } else {
        0.0
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn readout_output_layer(v_diffs: &[f64]) -> Result<usize> {
    if v_diffs.is_empty() {
        return Err(Error::InvalidInput("readout needs at least one output".into()));
    }
    let mut best = 0;
    for (i, &v) in v_diffs.iter().enumerate().skip(1) {
        if v > v_diffs[best] {
            best = i;
        }
    }
    Ok(best)
}
