use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use sarpnp_core::pnp::UnrolledConfig;
use sarpnp_core::sar::{Acquisition, CircularGeometry, DatasetSpec, GridSpec, RectangleLimits};
use sarpnp_core::spectral::{DEFAULT_MAX_ITERS, DEFAULT_TOL};
use sarpnp_core::{PhaseModel, WfConfig};

use crate::error::{CliError, CliResult};

/// Offset between training and test scene seeds, so the two splits never
/// share a scene.
pub const TEST_SEED_OFFSET: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Paper,
    Desk,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralSettings {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SpectralSettings {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: CircularGeometry,
    pub grid: GridSpec,
    pub phase_model: PhaseModel,
    pub rectangle: RectangleLimits,
    pub train_count: usize,
    pub test_count: usize,
    /// Scene seeds are `seed + i` for training and
    /// `seed + TEST_SEED_OFFSET + i` for testing.
    pub seed: u64,
    /// Noise level of the training split; `null` for noiseless training data.
    pub train_snr_db: Option<f64>,
    /// One test split is generated per entry.
    pub snr_db: Vec<f64>,
    pub network: UnrolledConfig,
    pub wf: WfConfig,
    pub spectral: SpectralSettings,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Paper => Self {
                geometry: CircularGeometry::paper_scale(),
                grid: GridSpec::paper_scale(),
                phase_model: PhaseModel::FarField,
                rectangle: RectangleLimits::for_grid(31),
                train_count: 5000,
                test_count: 50,
                seed: 0,
                train_snr_db: Some(10.0),
                snr_db: vec![5.0, 10.0],
                network: UnrolledConfig::paper_scale(),
                wf: WfConfig {
                    mu_max: 5e-4,
                    ..WfConfig::default()
                },
                spectral: SpectralSettings::default(),
                output_dir: PathBuf::from("out/paper"),
            },
            Preset::Desk => Self {
                geometry: CircularGeometry::desk_scale(),
                grid: GridSpec::desk_scale(),
                phase_model: PhaseModel::FarField,
                rectangle: RectangleLimits::for_grid(16),
                train_count: 500,
                test_count: 50,
                seed: 0,
                train_snr_db: Some(10.0),
                snr_db: vec![10.0],
                network: UnrolledConfig::desk_scale(),
                wf: WfConfig {
                    mu_max: 1e-3,
                    ..WfConfig::default()
                },
                spectral: SpectralSettings::default(),
                output_dir: PathBuf::from("out/desk"),
            },
        }
    }

    /// The preset with `overrides` merged in key by key. Objects merge
    /// recursively, every other value replaces the preset's.
    pub fn from_overrides(preset: Preset, overrides: &Value) -> CliResult<Self> {
        let mut base = serde_json::to_value(Self::preset(preset))
            .map_err(|e| CliError::Config(e.to_string()))?;
        merge(&mut base, overrides);
        let config: Self =
            serde_json::from_value(base).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(preset: Preset, path: Option<&Path>) -> CliResult<Self> {
        let overrides = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(CliError::io(p))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => Value::Object(Default::default()),
        };
        Self::from_overrides(preset, &overrides)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.test_count == 0 {
            return bad("test_count must be positive".into());
        }
        if self.snr_db.is_empty() {
            return bad("snr_db needs at least one entry".into());
        }
        if self.snr_db.iter().chain(&self.train_snr_db).any(|s| s.is_nan()) {
            return bad("SNR values must be numbers".into());
        }
        let n = self.grid.pixels_per_side;
        let r = self.rectangle;
        if r.min_side_px == 0 || r.min_side_px > r.max_side_px || r.max_side_px > n {
            return bad(format!(
                "rectangle sides [{}, {}] do not fit a {n}-pixel grid",
                r.min_side_px, r.max_side_px
            ));
        }
        if !(self.spectral.tol > 0.0) {
            return bad("spectral.tol must be positive".into());
        }
        self.network.validate()?;
        self.wf.validate()?;
        Ok(())
    }

    pub fn acquisition(&self) -> Acquisition {
        Acquisition {
            geometry: self.geometry.clone(),
            grid: self.grid,
            phase_model: self.phase_model,
        }
    }

    pub fn train_spec(&self) -> DatasetSpec {
        DatasetSpec {
            count: self.train_count,
            base_seed: self.seed,
            snr_db: self.train_snr_db,
            limits: self.rectangle,
            with_ground_truth: true,
        }
    }

    pub fn test_spec(&self, snr_db: f64) -> DatasetSpec {
        DatasetSpec {
            count: self.test_count,
            base_seed: self.seed.wrapping_add(TEST_SEED_OFFSET),
            snr_db: Some(snr_db),
            limits: self.rectangle,
            with_ground_truth: true,
        }
    }
}

pub const TRAIN_SPLIT: &str = "train";

pub fn test_split_name(snr_db: f64) -> String {
    format!("test_snr{snr_db}")
}

fn merge(base: &mut Value, overrides: &Value) {
    match (base, overrides) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}
