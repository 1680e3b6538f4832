mod common;

use common::sar_setup;
use num_complex::Complex64;
use sarpnp_core::autodiff::{DenoiserArch, DenoiserParams};
use sarpnp_core::linalg::{inner, norm};
use sarpnp_core::pnp::{
    phase_aligned_error, pnp_stage, reconstruct, train, unrolled_forward, unrolled_forward_traced,
    TrainedModel, TrainingSample, UnrolledConfig,
};
use sarpnp_core::sar::{generate_dataset, Dataset, DatasetSpec, RectangleLimits, Setup};
use sarpnp_core::spectral::{power_method, spectral_estimate_with, uniform_start, SpectralOperator};

fn dataset(setup: &Setup, count: usize, seed: u64, snr: Option<f64>) -> Dataset {
    generate_dataset(
        setup,
        &DatasetSpec {
            count,
            base_seed: seed,
            snr_db: snr,
            limits: RectangleLimits::for_grid(setup.grid.pixels_per_side()),
            with_ground_truth: true,
        },
    )
    .unwrap()
}

#[test]
fn identity_model_equals_plain_power_iterations() {
    let setup = sar_setup(8);
    let ds = dataset(&setup, 5, 1, Some(10.0));
    let model = TrainedModel::initialized(UnrolledConfig::desk_scale()).unwrap();
    assert_eq!(model.stages(), 4);
    for s in &ds.samples {
        let op = SpectralOperator::new(&setup.operator, &s.measurements).unwrap();
        let rho = unrolled_forward(&op, &model).unwrap();
        let mut v = uniform_start(64);
        for _ in 0..4 {
            let w = op.apply(&v).unwrap();
            let n = norm(&w);
            v = w.iter().map(|z| z / n).collect();
        }
        for (a, b) in rho.iter().zip(&v) {
            assert!((a - b).norm() <= 1e-12, "{a} vs {b}");
        }
        let report = power_method(&op, &uniform_start(64), 1e-300, 4).unwrap();
        assert_eq!(report.iterations, 4);
        for (a, b) in rho.iter().zip(&report.eigenvector) {
            assert!((a - b).norm() <= 1e-12);
        }
    }
}

#[test]
fn many_identity_stages_converge_to_power_method() {
    let setup = sar_setup(6);
    let ds = dataset(&setup, 3, 7, None);
    let config = UnrolledConfig {
        tying: vec![0; 400],
        ..UnrolledConfig::desk_scale()
    };
    let model = TrainedModel::initialized(config).unwrap();
    for s in &ds.samples {
        let op = SpectralOperator::new(&setup.operator, &s.measurements).unwrap();
        let (rho, report) = reconstruct(&s.measurements, &setup.operator, &model).unwrap();
        assert_eq!(report.stages, 400);
        let (est, _) = spectral_estimate_with(&op, 1e-12, 20000).unwrap();
        let overlap = inner(&rho, &est).norm() / norm(&est);
        assert!(overlap >= 1.0 - 1e-8, "overlap {overlap}");
    }
}

#[test]
fn stage_outputs_are_unit_norm() {
    let setup = sar_setup(5);
    let ds = dataset(&setup, 2, 3, Some(5.0));
    let op = SpectralOperator::new(&setup.operator, &ds.samples[0].measurements).unwrap();
    let mut params = DenoiserParams::init(DenoiserArch::desk_scale(), 1).unwrap();
    let last = params.layers.len() - 1;
    params.layers[last].bias.data_mut()[0] = 0.1;
    let mut rho = uniform_start(25);
    for _ in 0..3 {
        rho = pnp_stage(&op, &rho, &params).unwrap();
        assert!((norm(&rho) - 1.0).abs() <= 1e-12);
    }
    let zero = vec![Complex64::new(0.0, 0.0); 25];
    assert!(pnp_stage(&op, &zero, &params).is_err());
}

#[test]
fn zero_stages_return_the_start_vector_and_tying_uses_two_banks() {
    let setup = sar_setup(4);
    let ds = dataset(&setup, 1, 2, None);
    let op = SpectralOperator::new(&setup.operator, &ds.samples[0].measurements).unwrap();
    let model = TrainedModel::initialized(UnrolledConfig {
        tying: vec![],
        ..UnrolledConfig::desk_scale()
    })
    .unwrap();
    assert_eq!(unrolled_forward(&op, &model).unwrap(), uniform_start(16));
    let model = TrainedModel::initialized(UnrolledConfig::desk_scale()).unwrap();
    assert_eq!(model.config.tying, vec![0, 0, 1, 1]);
    assert_eq!(model.banks.len(), 2);
    let (_, norms) = unrolled_forward_traced(&op, &model).unwrap();
    assert_eq!(norms.len(), 4);
}

#[test]
fn reconstruction_report_and_amplitude_restoration() {
    let setup = sar_setup(5);
    let ds = dataset(&setup, 1, 9, None);
    let s = &ds.samples[0];
    let model = TrainedModel::initialized(UnrolledConfig::desk_scale()).unwrap();
    let (rho, report) = reconstruct(&s.measurements, &setup.operator, &model).unwrap();
    assert_eq!(report.stages, 4);
    assert!(report.elapsed_seconds > 0.0);
    let restored = report.restore_amplitude(&rho);
    let lambda0 = sarpnp_core::spectral::lambda0(&s.measurements);
    assert!((norm(&restored) - lambda0.sqrt()).abs() <= 1e-10 * lambda0.sqrt());
    let json = serde_json::to_string(&report).unwrap();
    assert_eq!(serde_json::from_str::<sarpnp_core::pnp::ReconstructionReport>(&json).unwrap(), report);
}

fn tiny_training_config(epochs: usize) -> UnrolledConfig {
    let mut config = UnrolledConfig::desk_scale();
    config.denoiser = DenoiserArch {
        depth: 3,
        width: 4,
        kernel_size: 3,
        residual: true,
    };
    config.training.epochs = epochs;
    config.training.batch_size = 4;
    config
}

#[test]
fn training_is_deterministic_and_zero_epochs_is_identity() {
    let setup = sar_setup(6);
    let ds = dataset(&setup, 12, 30, Some(10.0));
    let samples = TrainingSample::from_dataset(&ds).unwrap();
    let a = train(&setup.operator, &samples, tiny_training_config(3)).unwrap();
    let b = train(&setup.operator, &samples, tiny_training_config(3)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.history.len(), 3);
    assert!(a.history.last() <= a.history.first());

    let identity = train(&setup.operator, &samples, tiny_training_config(0)).unwrap();
    assert!(identity.history.is_empty());
    assert_eq!(identity, TrainedModel::initialized(tiny_training_config(0)).unwrap());
    for s in &ds.samples {
        let op = SpectralOperator::new(&setup.operator, &s.measurements).unwrap();
        let (u, _) = spectral_estimate_with(&op, 1e-300, 4).unwrap();
        let rho = unrolled_forward(&op, &identity).unwrap();
        let target = s.scene.as_ref().unwrap().normalized().unwrap();
        let u = sarpnp_core::linalg::normalized(&u).unwrap();
        assert!((phase_aligned_error(&rho, &target) - phase_aligned_error(&u, &target)).abs() <= 1e-10);
    }
}

#[test]
fn parallel_reduction_matches_ordered_reduction_closely() {
    let setup = sar_setup(5);
    let ds = dataset(&setup, 8, 50, Some(10.0));
    let samples = TrainingSample::from_dataset(&ds).unwrap();
    let ordered = train(&setup.operator, &samples, tiny_training_config(2)).unwrap();
    let mut config = tiny_training_config(2);
    config.training.deterministic = false;
    let loose = train(&setup.operator, &samples, config).unwrap();
    for (x, y) in ordered.history.iter().zip(&loose.history) {
        assert!((x - y).abs() <= 1e-9 * x.abs());
    }
}

#[test]
fn training_rejects_missing_ground_truth() {
    let setup = sar_setup(4);
    let mut ds = dataset(&setup, 2, 1, None);
    ds.samples[1].scene = None;
    assert!(TrainingSample::from_dataset(&ds).is_err());
}
