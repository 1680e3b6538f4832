use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{random_rectangle_scene, CircularGeometry, GridSpec, SarGeometry, Scene, SceneGrid};
use crate::error::{Error, Result};
use crate::forward::{add_intensity_noise, IntensityMeasurements, PhaseModel, SamplingMatrix};

/// Bounds on the side lengths of generated rectangles, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectangleLimits {
    pub min_side_px: usize,
    pub max_side_px: usize,
}

impl RectangleLimits {
    /// Roughly an eighth to two fifths of the grid side (4..=12 on 31×31).
    pub fn for_grid(pixels_per_side: usize) -> Self {
        let min_side_px = pixels_per_side.div_ceil(8).max(1);
        let max_side_px = (pixels_per_side * 2 / 5).max(min_side_px);
        Self {
            min_side_px,
            max_side_px,
        }
    }
}

/// What to generate for one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub count: usize,
    pub base_seed: u64,
    pub snr_db: Option<f64>,
    pub limits: RectangleLimits,
    /// Keep the ground-truth scenes alongside the measurements.
    pub with_ground_truth: bool,
}

/// The full acquisition descriptor from which operators are rebuilt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Acquisition {
    pub geometry: CircularGeometry,
    pub grid: GridSpec,
    #[serde(default)]
    pub phase_model: PhaseModel,
}

/// An [`Acquisition`] with its geometry, grid and sampling matrix built.
#[derive(Debug, Clone)]
pub struct Setup {
    pub acquisition: Acquisition,
    pub geometry: SarGeometry,
    pub grid: SceneGrid,
    pub operator: SamplingMatrix,
}

impl Acquisition {
    pub fn build(&self) -> Result<Setup> {
        let geometry = self.geometry.build()?;
        let grid = self.grid.build()?;
        let operator = SamplingMatrix::build(&geometry, &grid, self.phase_model)?;
        Ok(Setup {
            acquisition: self.clone(),
            geometry,
            grid,
            operator,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub scene: Option<Scene>,
    pub measurements: IntensityMeasurements,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub acquisition: Acquisition,
    pub spec: DatasetSpec,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn has_ground_truth(&self) -> bool {
        self.samples.iter().all(|s| s.scene.is_some())
    }
}

/// Noise stream seed for the sample whose scene seed is `scene_seed`.
///
/// Kept separate from the scene stream so the noise level can change while
/// scenes stay fixed.
pub fn noise_seed(scene_seed: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = scene_seed ^ 0x6e6f_6973_655f_7365;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Sample `i` uses scene seed `base_seed + i` and noise seed
/// `noise_seed(base_seed + i)`. Samples are generated in parallel; order and
/// values are independent of scheduling.
pub fn generate_dataset(setup: &Setup, spec: &DatasetSpec) -> Result<Dataset> {
    if spec.count < 1 {
        return Err(Error::invalid("dataset needs at least one sample"));
    }
    let samples = (0..spec.count)
        .into_par_iter()
        .map(|i| {
            let seed = spec.base_seed.wrapping_add(i as u64);
            let scene = random_rectangle_scene(
                &setup.grid,
                seed,
                spec.limits.min_side_px,
                spec.limits.max_side_px,
            )?;
            let clean = setup.operator.intensity_measurements(&scene.reflectivity)?;
            let measurements = match spec.snr_db {
                Some(snr) => add_intensity_noise(&clean, snr, noise_seed(seed))?,
                None => clean,
            };
            Ok(Sample {
                scene: spec.with_ground_truth.then_some(scene),
                measurements,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        acquisition: setup.acquisition.clone(),
        spec: spec.clone(),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> Setup {
        Acquisition {
            geometry: CircularGeometry {
                slow_time_samples: 16,
                frequency_samples: 8,
                ..CircularGeometry::paper_scale()
            },
            grid: GridSpec {
                extent_m: 14.0,
                pixels_per_side: 8,
            },
            phase_model: PhaseModel::FarField,
        }
        .build()
        .unwrap()
    }

    fn spec(snr_db: Option<f64>) -> DatasetSpec {
        DatasetSpec {
            count: 4,
            base_seed: 100,
            snr_db,
            limits: RectangleLimits::for_grid(8),
            with_ground_truth: true,
        }
    }

    #[test]
    fn limits_scale_with_grid() {
        assert_eq!(
            RectangleLimits::for_grid(31),
            RectangleLimits { min_side_px: 4, max_side_px: 12 }
        );
        assert_eq!(
            RectangleLimits::for_grid(16),
            RectangleLimits { min_side_px: 2, max_side_px: 6 }
        );
        assert_eq!(
            RectangleLimits::for_grid(2),
            RectangleLimits { min_side_px: 1, max_side_px: 1 }
        );
    }

    #[test]
    fn deterministic() {
        let s = setup();
        let a = generate_dataset(&s, &spec(Some(10.0))).unwrap();
        let b = generate_dataset(&s, &spec(Some(10.0))).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        assert!(a.samples.iter().all(|x| x.measurements.len() == 128));
    }

    #[test]
    fn noiseless_measurements_are_exact() {
        let s = setup();
        let ds = generate_dataset(&s, &spec(None)).unwrap();
        for sample in &ds.samples {
            let scene = sample.scene.as_ref().unwrap();
            let f = s.operator.apply_forward(&scene.reflectivity).unwrap();
            for (d, fm) in sample.measurements.values.iter().zip(&f) {
                assert!((d - fm.norm_sqr()).abs() <= 1e-12 * fm.norm_sqr().max(1.0));
            }
        }
    }

    #[test]
    fn noise_level_varies_with_scenes_fixed() {
        let s = setup();
        let lo = generate_dataset(&s, &spec(Some(5.0))).unwrap();
        let hi = generate_dataset(&s, &spec(Some(20.0))).unwrap();
        for (a, b) in lo.samples.iter().zip(&hi.samples) {
            assert_eq!(a.scene, b.scene);
            assert_ne!(a.measurements, b.measurements);
        }
    }

    #[test]
    fn scene_seed_matches_index() {
        let s = setup();
        let ds = generate_dataset(&s, &spec(None)).unwrap();
        let lim = RectangleLimits::for_grid(8);
        let expect = random_rectangle_scene(&s.grid, 102, lim.min_side_px, lim.max_side_px).unwrap();
        assert_eq!(ds.samples[2].scene.as_ref().unwrap(), &expect);
    }

    #[test]
    fn test_split_without_truth() {
        let s = setup();
        let ds = generate_dataset(
            &s,
            &DatasetSpec {
                with_ground_truth: false,
                ..spec(None)
            },
        )
        .unwrap();
        assert!(!ds.has_ground_truth());
        assert!(generate_dataset(&s, &DatasetSpec { count: 0, ..spec(None) }).is_err());
    }
}
