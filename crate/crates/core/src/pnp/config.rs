use serde::{Deserialize, Serialize};

use crate::autodiff::{AdamConfig, DenoiserArch};
use crate::error::{Error, Result};

/// Starting point of the unrolled iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialVector {
    /// `(1/√N)·1`.
    #[default]
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamConfig,
    pub seed: u64,
    /// Sum per-sample gradients in a fixed order so runs are bit-identical.
    pub deterministic: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 10,
            optimizer: AdamConfig {
                learning_rate: 2e-3,
                ..AdamConfig::default()
            },
            seed: 0,
            deterministic: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnrolledConfig {
    /// Stage index → denoiser bank index; its length is the stage count `L`.
    pub tying: Vec<usize>,
    pub denoiser: DenoiserArch,
    #[serde(default)]
    pub initial_vector: InitialVector,
    pub training: TrainingConfig,
}

impl UnrolledConfig {
    /// Four stages, consecutive pairs sharing a bank.
    pub fn desk_scale() -> Self {
        Self {
            tying: vec![0, 0, 1, 1],
            denoiser: DenoiserArch::desk_scale(),
            initial_vector: InitialVector::Uniform,
            training: TrainingConfig::default(),
        }
    }

    pub fn paper_scale() -> Self {
        Self {
            denoiser: DenoiserArch::paper_scale(),
            ..Self::desk_scale()
        }
    }

    /// `L` stages where stage `l` uses bank `l / group`.
    pub fn tied_in_groups(stages: usize, group: usize) -> Vec<usize> {
        (0..stages).map(|l| l / group.max(1)).collect()
    }

    pub fn stages(&self) -> usize {
        self.tying.len()
    }

    pub fn bank_count(&self) -> usize {
        self.tying.iter().max().map_or(0, |m| m + 1)
    }

    pub fn validate(&self) -> Result<()> {
        self.denoiser.validate()?;
        let banks = self.bank_count();
        for b in 0..banks {
            if !self.tying.contains(&b) {
                return Err(Error::invalid(format!(
                    "tying map {:?} skips bank {b}; bank indices must be contiguous from 0",
                    self.tying
                )));
            }
        }
        if self.training.batch_size == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        let lr = self.training.optimizer.learning_rate;
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        Ok(())
    }
}
