//! The library side of each subcommand. `main` only parses flags and maps
//! errors to exit codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use sarpnp_core::container::Container;
use sarpnp_core::io::{dataset_container, dataset_from_container, model_container, model_from_container};
use sarpnp_core::linalg::{self, CVec};
use sarpnp_core::pnp::{self, phase_aligned_error, TrainedModel, TrainingSample};
use sarpnp_core::sar::{generate_dataset, Dataset, Setup};
use sarpnp_core::spectral::{delta_quadratic, j_s, spectral_estimate_with};
use sarpnp_core::{wf_run, IntensityMeasurements, SamplingMatrix, SpectralOperator};

use crate::config::{test_split_name, ExperimentConfig, TRAIN_SPLIT};
use crate::error::{CliError, CliResult};
use crate::pgm;
use crate::report::{
    DiagnosticsReport, Method, MetricsReport, SampleDiagnostics, SplitDiagnostics,
    SplitMetrics, SplitTiming, Summary, TimingReport,
};

pub type Splits = Vec<(String, Dataset)>;

const RECONSTRUCTIONS_KIND: &str = "reconstructions";

fn summary(values: &[f64]) -> Summary {
    Summary::of(values).unwrap_or(Summary {
        mean: 0.0,
        median: 0.0,
        min: 0.0,
        max: 0.0,
    })
}

pub(crate) fn ensure_parent(path: &Path) -> CliResult<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).map_err(CliError::io(dir))
        }
        _ => Ok(()),
    }
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    ensure_parent(path)?;
    fs::write(path, bytes).map_err(CliError::io(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(sarpnp_core::Error::from)?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

fn read_container(path: &Path) -> CliResult<Container> {
    let bytes = fs::read(path).map_err(CliError::io(path))?;
    Container::from_bytes(&bytes).map_err(|e| match e {
        sarpnp_core::Error::Format(msg) => {
            sarpnp_core::Error::Format(format!("{}: {msg}", path.display())).into()
        }
        other => other.into(),
    })
}

pub fn read_datasets(path: &Path) -> CliResult<Splits> {
    Ok(dataset_from_container(&read_container(path)?)?)
}

pub fn write_datasets(path: &Path, splits: &Splits) -> CliResult<()> {
    let refs: Vec<(&str, &Dataset)> = splits.iter().map(|(n, d)| (n.as_str(), d)).collect();
    write_bytes(path, &dataset_container(&refs)?.to_bytes()?)
}

pub fn read_model(path: &Path) -> CliResult<TrainedModel> {
    Ok(model_from_container(&read_container(path)?)?)
}

pub fn write_model(path: &Path, model: &TrainedModel) -> CliResult<()> {
    write_bytes(path, &model_container(model)?.to_bytes()?)
}

/// Picks `wanted` splits by name, or every split except the training one
/// when `wanted` is empty (every split if that leaves none).
pub fn select_splits<'a>(splits: &'a Splits, wanted: &[String]) -> CliResult<Vec<&'a (String, Dataset)>> {
    if wanted.is_empty() {
        let tests: Vec<_> = splits.iter().filter(|(n, _)| n != TRAIN_SPLIT).collect();
        return Ok(if tests.is_empty() { splits.iter().collect() } else { tests });
    }
    wanted
        .iter()
        .map(|w| {
            splits.iter().find(|(n, _)| n == w).ok_or_else(|| {
                let names: Vec<_> = splits.iter().map(|(n, _)| n.as_str()).collect();
                CliError::Input(format!("no split named {w}; the file has {names:?}"))
            })
        })
        .collect()
}

/// Builds the operator shared by all splits of a dataset file.
pub fn setup_for(splits: &Splits) -> CliResult<Setup> {
    let (_, first) = splits
        .first()
        .ok_or_else(|| CliError::Input("dataset file has no splits".into()))?;
    Ok(first.acquisition.build()?)
}

// ---------------------------------------------------------------- simulate

pub struct Simulation {
    pub setup: Setup,
    pub splits: Splits,
}

impl Simulation {
    pub fn summary_line(&self) -> String {
        let m = self.setup.operator.rows();
        let n = self.setup.operator.cols();
        format!("M={m} N={n} M/N={:.2}", m as f64 / n as f64)
    }

    pub fn split(&self, name: &str) -> Option<&Dataset> {
        self.splits.iter().find(|(n, _)| n == name).map(|(_, d)| d)
    }
}

/// The training split (skipped when `train_count` is 0) followed by one
/// test split per SNR.
pub fn simulate(config: &ExperimentConfig) -> CliResult<Simulation> {
    let setup = config.acquisition().build()?;
    let mut splits = Vec::with_capacity(config.snr_db.len() + 1);
    if config.train_count > 0 {
        splits.push((TRAIN_SPLIT.to_string(), generate_dataset(&setup, &config.train_spec())?));
    }
    for &snr in &config.snr_db {
        let name = test_split_name(snr);
        if splits.iter().any(|(n, _)| *n == name) {
            return Err(CliError::Config(format!("snr_db lists {snr} twice")));
        }
        splits.push((name, generate_dataset(&setup, &config.test_spec(snr))?));
    }
    Ok(Simulation { setup, splits })
}

// ------------------------------------------------------------------- train

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    /// Mean training loss per completed epoch.
    pub epochs: Vec<f64>,
    pub completed: bool,
    pub error: Option<String>,
}

/// Trains on `dataset` with `config.network`. `on_epoch` sees the history
/// after every epoch; on failure the returned history holds the completed
/// epochs.
pub fn train(
    config: &ExperimentConfig,
    setup: &Setup,
    dataset: &Dataset,
    mut on_epoch: impl FnMut(&[f64]),
) -> (CliResult<TrainedModel>, TrainingHistory) {
    let mut epochs = Vec::new();
    let result = TrainingSample::from_dataset(dataset)
        .and_then(|samples| {
            pnp::train_with_progress(&setup.operator, &samples, config.network.clone(), |_, loss| {
                epochs.push(loss);
                on_epoch(&epochs);
            })
        })
        .map_err(CliError::from);
    let history = TrainingHistory {
        completed: result.is_ok(),
        error: result.as_ref().err().map(|e| e.to_string()),
        epochs: match &result {
            Ok(model) => model.history.clone(),
            Err(_) => epochs,
        },
    };
    (result, history)
}

// ------------------------------------------------------------- reconstruct

/// One reconstruction. `estimate` is what the method returns at its natural
/// amplitude; the MSE uses its unit-norm version.
#[derive(Debug, Clone)]
pub struct SampleResult {
    pub estimate: CVec,
    pub mse: f64,
    pub iterations: usize,
    pub init_power_iterations: Option<usize>,
    pub seconds: f64,
}

fn unit_or_zero(v: &[Complex64]) -> CVec {
    linalg::normalized(v).unwrap_or_else(|| vec![Complex64::new(0.0, 0.0); v.len()])
}

/// `phase_aligned_error(ρ̂/‖ρ̂‖, ρ*/‖ρ*‖)/N`.
pub fn normalized_mse(estimate: &[Complex64], truth: &[Complex64]) -> f64 {
    phase_aligned_error(&unit_or_zero(estimate), &unit_or_zero(truth)) / truth.len() as f64
}

pub fn run_method(
    method: Method,
    config: &ExperimentConfig,
    matrix: &SamplingMatrix,
    d: &IntensityMeasurements,
    model: Option<&TrainedModel>,
) -> CliResult<(CVec, usize, Option<usize>)> {
    match method {
        Method::Pnp => {
            let model = model.ok_or_else(|| CliError::Input("pnp needs a trained model".into()))?;
            let (rho, report) = pnp::reconstruct(d, matrix, model)?;
            Ok((report.restore_amplitude(&rho), report.stages, None))
        }
        Method::Spectral => {
            let op = SpectralOperator::new(matrix, d)?;
            let (rho, report) =
                spectral_estimate_with(&op, config.spectral.tol, config.spectral.max_iters)?;
            Ok((rho, report.map_or(0, |r| r.iterations), None))
        }
        Method::Wf => {
            let (rho, trace) = wf_run(matrix, d, &config.wf)?;
            Ok((rho, config.wf.iterations, Some(trace.power_iterations)))
        }
    }
}

/// Runs `method` on every sample, in parallel across samples.
pub fn reconstruct_split(
    method: Method,
    config: &ExperimentConfig,
    matrix: &SamplingMatrix,
    dataset: &Dataset,
    model: Option<&TrainedModel>,
) -> CliResult<Vec<SampleResult>> {
    if !dataset.has_ground_truth() {
        return Err(CliError::Input("reconstruction metrics need ground-truth scenes".into()));
    }
    dataset
        .samples
        .par_iter()
        .map(|s| {
            let start = Instant::now();
            let (estimate, iterations, init) = run_method(method, config, matrix, &s.measurements, model)?;
            let seconds = start.elapsed().as_secs_f64();
            let truth = &s.scene.as_ref().expect("checked above").reflectivity;
            Ok(SampleResult {
                mse: normalized_mse(&estimate, truth),
                estimate,
                iterations,
                init_power_iterations: init,
                seconds,
            })
        })
        .collect()
}

pub struct Evaluation {
    pub report: MetricsReport,
    pub timings: TimingReport,
    /// Per split, the samples' estimates in dataset order.
    pub estimates: Vec<(String, Vec<CVec>)>,
}

fn unit_delta(matrix: &SamplingMatrix, truth: &[Complex64]) -> CliResult<f64> {
    let unit = unit_or_zero(truth);
    Ok(delta_quadratic(matrix, &unit, &unit)?)
}

pub fn evaluate(
    method: Method,
    config: &ExperimentConfig,
    setup: &Setup,
    splits: &[&(String, Dataset)],
    model: Option<&TrainedModel>,
) -> CliResult<Evaluation> {
    if model.is_some() != (method == Method::Pnp) {
        return Err(CliError::Input(match method {
            Method::Pnp => "method pnp needs --model".into(),
            m => format!("method {} does not take a model", m.name()),
        }));
    }
    let matrix = &setup.operator;
    let mut metrics = Vec::new();
    let mut timings = Vec::new();
    let mut estimates = Vec::new();
    for (name, ds) in splits {
        log::info!("{}: reconstructing {} samples of {name}", method.name(), ds.len());
        let results = reconstruct_split(method, config, matrix, ds, model)?;
        let deltas = ds
            .samples
            .par_iter()
            .map(|s| unit_delta(matrix, &s.scene.as_ref().expect("has ground truth").reflectivity))
            .collect::<CliResult<Vec<f64>>>()?;
        let mse: Vec<f64> = results.iter().map(|r| r.mse).collect();
        let seconds: Vec<f64> = results.iter().map(|r| r.seconds).collect();
        metrics.push(SplitMetrics {
            split: name.clone(),
            snr_db: ds.spec.snr_db,
            count: ds.len(),
            mse_summary: summary(&mse),
            mse,
            iterations: results.iter().map(|r| r.iterations).collect(),
            init_power_iterations: results.iter().filter_map(|r| r.init_power_iterations).collect(),
            delta: summary(&deltas),
        });
        timings.push(SplitTiming {
            split: name.clone(),
            summary: summary(&seconds),
            seconds,
        });
        estimates.push((name.clone(), results.into_iter().map(|r| r.estimate).collect()));
    }
    let report = MetricsReport {
        method,
        pixel_count: matrix.cols(),
        measurement_count: matrix.rows(),
        splits: metrics,
    };
    if !report.all_finite() {
        return Err(sarpnp_core::Error::NonFinite(format!("{} metrics", method.name())).into());
    }
    Ok(Evaluation {
        report,
        timings: TimingReport {
            method,
            splits: timings,
        },
        estimates,
    })
}

pub fn estimates_container(evaluation: &Evaluation, pixel_count: usize) -> CliResult<Container> {
    let names: Vec<&str> = evaluation.estimates.iter().map(|(n, _)| n.as_str()).collect();
    let mut c = Container::new(json!({
        "kind": RECONSTRUCTIONS_KIND,
        "method": evaluation.report.method,
        "splits": names,
    }));
    for (name, ests) in &evaluation.estimates {
        let flat: Vec<Complex64> = ests.iter().flatten().copied().collect();
        c.add_complex(&format!("{name}/estimates"), &[ests.len(), pixel_count], &flat)?;
    }
    Ok(c)
}

/// Reads the estimates of one split back from a reconstructions file.
pub fn read_estimates(path: &Path, split: &str) -> CliResult<Vec<CVec>> {
    let c = read_container(path)?;
    if c.meta.get("kind").and_then(|k| k.as_str()) != Some(RECONSTRUCTIONS_KIND) {
        return Err(sarpnp_core::Error::Format(format!("{} is not a reconstructions file", path.display())).into());
    }
    let (shape, data) = c.complex(&format!("{split}/estimates"))?;
    Ok(data.chunks(shape[1].max(1)).map(|c| c.to_vec()).collect())
}

/// Layout of a reconstruct output directory.
pub struct OutputLayout {
    pub dir: PathBuf,
}

impl OutputLayout {
    pub fn report(&self) -> PathBuf {
        self.dir.join("report.json")
    }
    pub fn timings(&self) -> PathBuf {
        self.dir.join("timings.json")
    }
    pub fn estimates(&self) -> PathBuf {
        self.dir.join("reconstructions.sarp")
    }
    pub fn image(&self, split: &str, index: usize, what: &str) -> PathBuf {
        self.dir.join("images").join(split).join(format!("{index:04}_{what}.pgm"))
    }
}

/// Writes report, timings, raw estimates and PGM images of estimate and
/// ground truth for every sample.
pub fn write_evaluation(
    layout: &OutputLayout,
    evaluation: &Evaluation,
    setup: &Setup,
    splits: &[&(String, Dataset)],
) -> CliResult<()> {
    let side = setup.grid.pixels_per_side();
    write_json(&layout.report(), &evaluation.report)?;
    write_json(&layout.timings(), &evaluation.timings)?;
    write_bytes(&layout.estimates(), &estimates_container(evaluation, setup.grid.len())?.to_bytes()?)?;
    let method = evaluation.report.method.name();
    for ((name, ests), (_, ds)) in evaluation.estimates.iter().zip(splits) {
        for (i, (est, sample)) in ests.iter().zip(&ds.samples).enumerate() {
            write_bytes(&layout.image(name, i, method), &pgm::magnitude_image(side, est))?;
            if let Some(scene) = &sample.scene {
                write_bytes(&layout.image(name, i, "truth"), &pgm::magnitude_image(side, &scene.reflectivity))?;
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- diagnose

/// `|J_S(ρ) − (−|ρᴴρ*|² + ‖ρ‖² − ρᴴδρ)|` relative to the largest term, with
/// `X̂` built from noiseless `d = |Aρ*|²`.
pub fn identity_residual(
    op: &SpectralOperator<'_>,
    truth: &[Complex64],
    rho: &[Complex64],
) -> CliResult<f64> {
    let lhs = j_s(op, rho)?;
    let overlap = linalg::inner(rho, truth).norm_sqr();
    let delta = delta_quadratic(op.matrix(), truth, rho)?;
    let norm = linalg::norm_sqr(rho);
    let rhs = -overlap + norm - delta;
    let scale = [lhs.abs(), overlap, norm, delta.abs()].into_iter().fold(0.0, f64::max);
    Ok(if scale == 0.0 { 0.0 } else { (lhs - rhs).abs() / scale })
}

fn random_probe(n: usize, seed: u64) -> CVec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect()
}

pub fn diagnose_sample(matrix: &SamplingMatrix, truth: &[Complex64], probe_seed: u64) -> CliResult<SampleDiagnostics> {
    let d = matrix.intensity_measurements(truth)?;
    let op = SpectralOperator::new(matrix, &d)?;
    Ok(SampleDiagnostics {
        delta: delta_quadratic(matrix, truth, truth)?,
        residual_at_truth: identity_residual(&op, truth, truth)?,
        residual_at_probe: identity_residual(&op, truth, &random_probe(truth.len(), probe_seed))?,
    })
}

/// Probe seeds are `seed + i` for sample `i`.
pub fn diagnose(setup: &Setup, splits: &[&(String, Dataset)], seed: u64) -> CliResult<DiagnosticsReport> {
    let matrix = &setup.operator;
    let mut out = Vec::with_capacity(splits.len());
    for (name, ds) in splits {
        if !ds.has_ground_truth() {
            return Err(CliError::Input(format!("split {name} has no ground truth to diagnose")));
        }
        let samples = ds
            .samples
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let truth = &s.scene.as_ref().expect("checked above").reflectivity;
                diagnose_sample(matrix, truth, seed.wrapping_add(i as u64))
            })
            .collect::<CliResult<Vec<_>>>()?;
        let deltas: Vec<f64> = samples.iter().map(|s| s.delta).collect();
        out.push(SplitDiagnostics {
            split: name.clone(),
            max_residual: samples
                .iter()
                .map(|s| s.residual_at_truth.max(s.residual_at_probe))
                .fold(0.0, f64::max),
            delta: summary(&deltas),
            samples,
        });
    }
    Ok(DiagnosticsReport {
        pixel_count: matrix.cols(),
        measurement_count: matrix.rows(),
        splits: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Preset;

    fn tiny() -> ExperimentConfig {
        let mut c = ExperimentConfig::from_overrides(
            Preset::Desk,
            &json!({
                "geometry": {"slow_time_samples": 16, "frequency_samples": 8},
                "grid": {"extent_m": 16.0, "pixels_per_side": 8},
                "rectangle": {"min_side_px": 1, "max_side_px": 3},
                "train_count": 6,
                "test_count": 3,
                "snr_db": [5, 10],
            }),
        )
        .unwrap();
        c.network.training.epochs = 0;
        c
    }

    #[test]
    fn simulate_names_splits() {
        let sim = simulate(&tiny()).unwrap();
        let names: Vec<_> = sim.splits.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names, ["train", "test_snr5", "test_snr10"]);
        assert_eq!(sim.summary_line(), "M=128 N=64 M/N=2.00");
        let sel = select_splits(&sim.splits, &[]).unwrap();
        assert_eq!(sel.len(), 2);
        assert!(select_splits(&sim.splits, &["nope".into()]).is_err());
    }

    #[test]
    fn model_method_mismatch() {
        let c = tiny();
        let sim = simulate(&c).unwrap();
        let sel = select_splits(&sim.splits, &[]).unwrap();
        let model = TrainedModel::initialized(c.network.clone()).unwrap();
        assert!(matches!(evaluate(Method::Pnp, &c, &sim.setup, &sel, None), Err(CliError::Input(_))));
        assert!(matches!(
            evaluate(Method::Wf, &c, &sim.setup, &sel, Some(&model)),
            Err(CliError::Input(_))
        ));
    }

    #[test]
    fn zero_epoch_training_is_identity_model() {
        let c = tiny();
        let sim = simulate(&c).unwrap();
        let (model, history) = train(&c, &sim.setup, sim.split("train").unwrap(), |_| {});
        let model = model.unwrap();
        assert!(history.epochs.is_empty() && history.completed);
        assert_eq!(model, TrainedModel::initialized(c.network).unwrap());
    }

    #[test]
    fn mse_is_scale_and_phase_invariant() {
        let t: CVec = (0..4).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let e = linalg::scale_complex(&t, Complex64::from_polar(3.0, 0.7));
        assert!(normalized_mse(&e, &t) < 1e-15);
        assert!((normalized_mse(&[Complex64::new(0.0, 0.0); 4], &t) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn zero_scene_diagnostics_vanish() {
        let sim = simulate(&tiny()).unwrap();
        let zero = vec![Complex64::new(0.0, 0.0); 64];
        let d = diagnose_sample(&sim.setup.operator, &zero, 3).unwrap();
        assert_eq!(d, SampleDiagnostics { delta: 0.0, residual_at_truth: 0.0, residual_at_probe: 0.0 });
    }
}
