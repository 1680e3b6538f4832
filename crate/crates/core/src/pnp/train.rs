use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::UnrolledConfig;
use super::loss::phase_aligned_error_on_tape;
use super::network::{unrolled_on_tape, TrainedModel};
use crate::autodiff::{Adam, Tape, Tensor};
use crate::error::{check_len, Error, Result};
use crate::forward::{IntensityMeasurements, SamplingMatrix};
use crate::linalg::{self, CVec};
use crate::sar::Dataset;
use crate::spectral::SpectralOperator;

/// Measurements paired with the unit-norm ground truth `ρ*/‖ρ*‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub measurements: IntensityMeasurements,
    pub target: CVec,
}

impl TrainingSample {
    pub fn new(measurements: IntensityMeasurements, scene: &[num_complex::Complex64]) -> Result<Self> {
        let target = linalg::normalized(scene)
            .ok_or_else(|| Error::invalid("training scene must be non-zero"))?;
        Ok(Self {
            measurements,
            target,
        })
    }

    pub fn from_dataset(dataset: &Dataset) -> Result<Vec<Self>> {
        dataset
            .samples
            .iter()
            .map(|s| {
                let scene = s
                    .scene
                    .as_ref()
                    .ok_or_else(|| Error::invalid("training needs ground-truth scenes"))?;
                Self::new(s.measurements.clone(), &scene.reflectivity)
            })
            .collect()
    }
}

/// Phase-aligned loss of one sample and its gradient with respect to every
/// bank tensor, flattened bank by bank in [`DenoiserParams::tensors`] order.
///
/// [`DenoiserParams::tensors`]: crate::autodiff::DenoiserParams::tensors
pub fn loss_and_gradients(
    matrix: &SamplingMatrix,
    sample: &TrainingSample,
    model: &TrainedModel,
) -> Result<(f64, Vec<Tensor>)> {
    check_len("training target", matrix.cols(), sample.target.len())?;
    let op = SpectralOperator::new(matrix, &sample.measurements)?;
    let mut tape = Tape::new();
    let vars = model
        .banks
        .iter()
        .map(|b| b.register(&mut tape))
        .collect::<Result<Vec<_>>>()?;
    let (rho, _) = unrolled_on_tape(&mut tape, &op, model, &vars)?;
    let loss = phase_aligned_error_on_tape(&mut tape, rho, &sample.target)?;
    let grads = tape.backward(loss)?;
    let flat = model
        .banks
        .iter()
        .zip(&vars)
        .flat_map(|(bank, lv)| {
            bank.layers.iter().zip(lv).flat_map(|(layer, v)| {
                [
                    grads.get_or_zeros(v.weight, &layer.weight),
                    grads.get_or_zeros(v.bias, &layer.bias),
                ]
            })
        })
        .collect();
    Ok((tape.value(loss).data()[0], flat))
}

pub fn train(
    matrix: &SamplingMatrix,
    samples: &[TrainingSample],
    config: UnrolledConfig,
) -> Result<TrainedModel> {
    train_with_progress(matrix, samples, config, |_, _| {})
}

/// Mini-batch Adam over all banks jointly. `on_epoch(epoch, mean_loss)` is
/// called after every epoch so callers can persist partial history.
pub fn train_with_progress(
    matrix: &SamplingMatrix,
    samples: &[TrainingSample],
    config: UnrolledConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<TrainedModel> {
    let mut model = TrainedModel::initialized(config)?;
    let training = model.config.training.clone();
    if training.epochs == 0 {
        return Ok(model);
    }
    if samples.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let mut adam = Adam::new(training.optimizer);
    let mut rng = ChaCha8Rng::seed_from_u64(training.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();

    for epoch in 0..training.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut counted = 0usize;
        for batch in order.chunks(training.batch_size) {
            let results: Vec<Result<(f64, Vec<Tensor>)>> = batch
                .par_iter()
                .map(|&i| loss_and_gradients(matrix, &samples[i], &model))
                .collect();
            let mut per_sample = Vec::with_capacity(results.len());
            let mut degenerate = false;
            for r in results {
                match r {
                    Ok(x) => per_sample.push(x),
                    Err(Error::DegenerateNormalization { norm }) => {
                        log::warn!("epoch {epoch}: degenerate normalization ({norm:e}); skipping step");
                        degenerate = true;
                    }
                    Err(e) => return Err(e),
                }
            }
            if degenerate {
                continue;
            }
            let batch_loss: f64 = per_sample.iter().map(|(l, _)| l).sum();
            if !batch_loss.is_finite() {
                return Err(Error::Diverged(format!(
                    "non-finite loss in epoch {}; history so far {:?}",
                    epoch + 1,
                    model.history
                )));
            }
            epoch_loss += batch_loss;
            counted += per_sample.len();
            let scale = 1.0 / per_sample.len() as f64;
            let mut grads = if training.deterministic {
                sum_in_order(per_sample.into_iter().map(|(_, g)| g))
            } else {
                per_sample
                    .into_par_iter()
                    .map(|(_, g)| g)
                    .reduce_with(add_all)
                    .expect("batch is non-empty")
            };
            for g in &mut grads {
                g.scale_assign(scale);
            }
            adam.step(model.banks.iter_mut().flat_map(|b| b.tensors_mut()), &grads)?;
        }
        if counted == 0 {
            return Err(Error::Diverged(format!(
                "every batch of epoch {} hit a degenerate normalization",
                epoch + 1
            )));
        }
        let mean = epoch_loss / counted as f64;
        model.history.push(mean);
        log::info!("epoch {}/{}: loss {mean:.6}", epoch + 1, training.epochs);
        on_epoch(epoch, mean);
    }
    let (first, last) = (model.history[0], *model.history.last().unwrap());
    if last > first {
        return Err(Error::Diverged(format!(
            "final-epoch loss {last} exceeds first-epoch loss {first}"
        )));
    }
    Ok(model)
}

fn add_all(mut a: Vec<Tensor>, b: Vec<Tensor>) -> Vec<Tensor> {
    for (x, y) in a.iter_mut().zip(&b) {
        x.add_assign(y);
    }
    a
}

fn sum_in_order(mut grads: impl Iterator<Item = Vec<Tensor>>) -> Vec<Tensor> {
    let first = grads.next().expect("batch is non-empty");
    grads.fold(first, add_all)
}
