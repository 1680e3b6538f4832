//! Dataset and model files on top of the [`Container`] format.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::autodiff::{ConvLayer, DenoiserParams, Tensor};
use crate::container::Container;
use crate::error::{Error, Result};
use crate::forward::IntensityMeasurements;
use crate::pnp::{TrainedModel, UnrolledConfig};
use crate::sar::{Acquisition, Dataset, DatasetSpec, Rect, Sample, Scene};

const DATASET_KIND: &str = "dataset";
const MODEL_KIND: &str = "model";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SplitMeta {
    name: String,
    spec: DatasetSpec,
    count: usize,
    measurement_count: usize,
    pixel_count: usize,
    has_ground_truth: bool,
    rects: Vec<Option<Rect>>,
    amplitudes: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetMeta {
    kind: String,
    acquisition: Acquisition,
    splits: Vec<SplitMeta>,
}

fn kind_of(meta: &serde_json::Value) -> Option<&str> {
    meta.get("kind").and_then(|k| k.as_str())
}

/// Packs named splits that share one acquisition into a container.
pub fn dataset_container(splits: &[(&str, &Dataset)]) -> Result<Container> {
    let Some((_, first)) = splits.first() else {
        return Err(Error::invalid("a dataset file needs at least one split"));
    };
    let acquisition = first.acquisition.clone();
    let mut metas = Vec::with_capacity(splits.len());
    let mut blobs: Vec<(String, Vec<usize>, Vec<f64>, Option<Vec<num_complex::Complex64>>)> =
        Vec::new();
    for (name, ds) in splits {
        if ds.acquisition != acquisition {
            return Err(Error::invalid(format!(
                "split {name} uses a different acquisition"
            )));
        }
        if metas.iter().any(|m: &SplitMeta| m.name == *name) {
            return Err(Error::invalid(format!("duplicate split {name}")));
        }
        let m = ds.samples.first().map_or(0, |s| s.measurements.len());
        let mut d = Vec::with_capacity(ds.len() * m);
        for s in &ds.samples {
            crate::error::check_len("split measurements", m, s.measurements.len())?;
            d.extend_from_slice(&s.measurements.values);
        }
        let truth = ds.has_ground_truth();
        let n = ds
            .samples
            .iter()
            .find_map(|s| s.scene.as_ref().map(|sc| sc.reflectivity.len()))
            .unwrap_or(0);
        let scenes = if truth {
            let mut all = Vec::with_capacity(ds.len() * n);
            for s in &ds.samples {
                let sc = s.scene.as_ref().expect("ground truth checked");
                crate::error::check_len("split scenes", n, sc.reflectivity.len())?;
                all.extend_from_slice(&sc.reflectivity);
            }
            Some(all)
        } else {
            None
        };
        metas.push(SplitMeta {
            name: name.to_string(),
            spec: ds.spec.clone(),
            count: ds.len(),
            measurement_count: m,
            pixel_count: n,
            has_ground_truth: truth,
            rects: ds
                .samples
                .iter()
                .map(|s| s.scene.as_ref().and_then(|sc| sc.rect))
                .collect(),
            amplitudes: ds
                .samples
                .iter()
                .map(|s| s.scene.as_ref().map_or(0.0, |sc| sc.amplitude))
                .collect(),
        });
        blobs.push((name.to_string(), vec![ds.len(), m], d, scenes));
    }
    let meta = DatasetMeta {
        kind: DATASET_KIND.into(),
        acquisition,
        splits: metas.clone(),
    };
    let mut c = Container::new(serde_json::to_value(&meta)?);
    for ((name, shape, d, scenes), sm) in blobs.into_iter().zip(&metas) {
        c.add_real(&format!("{name}/measurements"), &shape, &d)?;
        if let Some(s) = scenes {
            c.add_complex(&format!("{name}/scenes"), &[sm.count, sm.pixel_count], &s)?;
        }
    }
    Ok(c)
}

/// Unpacks every split of a dataset container, in file order.
pub fn dataset_from_container(c: &Container) -> Result<Vec<(String, Dataset)>> {
    if kind_of(&c.meta) != Some(DATASET_KIND) {
        return Err(Error::Format("container does not hold a dataset".into()));
    }
    let meta: DatasetMeta = serde_json::from_value(c.meta.clone())
        .map_err(|e| Error::Format(format!("dataset header: {e}")))?;
    let mut out = Vec::with_capacity(meta.splits.len());
    for sm in meta.splits {
        let (shape, d) = c.real(&format!("{}/measurements", sm.name))?;
        if shape != [sm.count, sm.measurement_count] {
            return Err(Error::Format(format!(
                "split {}: measurement blob shape {shape:?}",
                sm.name
            )));
        }
        if sm.rects.len() != sm.count || sm.amplitudes.len() != sm.count {
            return Err(Error::Format(format!("split {}: metadata count", sm.name)));
        }
        let scenes = if sm.has_ground_truth {
            let (shape, s) = c.complex(&format!("{}/scenes", sm.name))?;
            if shape != [sm.count, sm.pixel_count] {
                return Err(Error::Format(format!(
                    "split {}: scene blob shape {shape:?}",
                    sm.name
                )));
            }
            Some(s)
        } else {
            None
        };
        let samples = (0..sm.count)
            .map(|i| {
                let m = sm.measurement_count;
                let measurements = IntensityMeasurements {
                    values: d[i * m..(i + 1) * m].to_vec(),
                    snr_db: sm.spec.snr_db,
                };
                let scene = scenes.as_ref().map(|s| {
                    let n = sm.pixel_count;
                    Scene {
                        reflectivity: s[i * n..(i + 1) * n].to_vec(),
                        rect: sm.rects[i],
                        amplitude: sm.amplitudes[i],
                    }
                });
                Sample {
                    scene,
                    measurements,
                }
            })
            .collect();
        out.push((
            sm.name,
            Dataset {
                acquisition: meta.acquisition.clone(),
                spec: sm.spec,
                samples,
            },
        ));
    }
    Ok(out)
}

pub fn write_dataset_file(path: &Path, splits: &[(&str, &Dataset)]) -> Result<()> {
    dataset_container(splits)?.write(path)
}

pub fn read_dataset_file(path: &Path) -> Result<Vec<(String, Dataset)>> {
    dataset_from_container(&Container::read(path)?)
}

pub fn model_container(model: &TrainedModel) -> Result<Container> {
    model.validate()?;
    let meta = json!({
        "kind": MODEL_KIND,
        "config": model.config,
        "history": model.history,
        "banks": model.banks.len(),
    });
    let mut c = Container::new(meta);
    for (b, bank) in model.banks.iter().enumerate() {
        for (l, layer) in bank.layers.iter().enumerate() {
            c.add_real(
                &format!("bank{b}/layer{l}/weight"),
                layer.weight.shape(),
                layer.weight.data(),
            )?;
            c.add_real(
                &format!("bank{b}/layer{l}/bias"),
                layer.bias.shape(),
                layer.bias.data(),
            )?;
        }
    }
    Ok(c)
}

pub fn model_from_container(c: &Container) -> Result<TrainedModel> {
    if kind_of(&c.meta) != Some(MODEL_KIND) {
        return Err(Error::Format("container does not hold a model".into()));
    }
    let field = |key: &str| {
        c.meta
            .get(key)
            .cloned()
            .ok_or_else(|| Error::Format(format!("model header lacks {key}")))
    };
    let config: UnrolledConfig = serde_json::from_value(field("config")?)
        .map_err(|e| Error::Format(format!("model config: {e}")))?;
    let history: Vec<f64> = serde_json::from_value(field("history")?)
        .map_err(|e| Error::Format(format!("model history: {e}")))?;
    config.validate()?;
    let mut banks = Vec::with_capacity(config.bank_count());
    for b in 0..config.bank_count() {
        let mut layers = Vec::with_capacity(config.denoiser.depth);
        for l in 0..config.denoiser.depth {
            let (ws, w) = c.real(&format!("bank{b}/layer{l}/weight"))?;
            let weight = Tensor::new(ws, w.to_vec())?;
            let (bs, bias) = c.real(&format!("bank{b}/layer{l}/bias"))?;
            let bias = Tensor::new(bs, bias.to_vec())?;
            layers.push(ConvLayer { weight, bias });
        }
        let bank = DenoiserParams {
            arch: config.denoiser,
            layers,
        };
        bank.validate()
            .map_err(|e| Error::Format(format!("bank {b}: {e}")))?;
        banks.push(bank);
    }
    let model = TrainedModel {
        config,
        banks,
        history,
    };
    model.validate()?;
    Ok(model)
}

pub fn write_model_file(path: &Path, model: &TrainedModel) -> Result<()> {
    model_container(model)?.write(path)
}

pub fn read_model_file(path: &Path) -> Result<TrainedModel> {
    model_from_container(&Container::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sar::{generate_dataset, CircularGeometry, GridSpec, RectangleLimits};

    fn tiny_acquisition() -> Acquisition {
        Acquisition {
            geometry: CircularGeometry {
                slow_time_samples: 6,
                frequency_samples: 4,
                ..CircularGeometry::desk_scale()
            },
            grid: GridSpec {
                extent_m: 10.0,
                pixels_per_side: 4,
            },
            phase_model: Default::default(),
        }
    }

    fn tiny(truth: bool, snr: Option<f64>) -> Dataset {
        let setup = tiny_acquisition().build().unwrap();
        generate_dataset(
            &setup,
            &DatasetSpec {
                count: 3,
                base_seed: 5,
                snr_db: snr,
                limits: RectangleLimits {
                    min_side_px: 1,
                    max_side_px: 2,
                },
                with_ground_truth: truth,
            },
        )
        .unwrap()
    }

    #[test]
    fn dataset_round_trip() {
        let a = tiny(true, None);
        let b = tiny(false, Some(10.0));
        let c = dataset_container(&[("train", &a), ("test", &b)]).unwrap();
        let bytes = c.to_bytes().unwrap();
        let back = dataset_from_container(&Container::from_bytes(&bytes).unwrap()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].0, "train");
        assert_eq!(back[0].1, a);
        assert_eq!(back[1].1, b);
        assert!(!back[1].1.has_ground_truth());
    }

    #[test]
    fn rejects_wrong_kind_and_mixed_acquisitions() {
        let model = TrainedModel::initialized(UnrolledConfig::desk_scale()).unwrap();
        let c = model_container(&model).unwrap();
        assert!(matches!(dataset_from_container(&c), Err(Error::Format(_))));
        let a = tiny(true, None);
        let mut b = a.clone();
        b.acquisition.grid.extent_m = 11.0;
        assert!(dataset_container(&[("a", &a), ("b", &b)]).is_err());
        assert!(dataset_container(&[("a", &a), ("a", &a)]).is_err());
        assert!(dataset_container(&[]).is_err());
    }

    #[test]
    fn model_round_trip() {
        let mut model = TrainedModel::initialized(UnrolledConfig::desk_scale()).unwrap();
        model.history = vec![0.5, 0.25];
        let c = model_container(&model).unwrap();
        let back = model_from_container(&Container::from_bytes(&c.to_bytes().unwrap()).unwrap()).unwrap();
        assert_eq!(back, model);
        assert!(matches!(dataset_from_container(&c), Err(Error::Format(_))));
    }
}
