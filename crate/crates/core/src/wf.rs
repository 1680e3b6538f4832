//! Wirtinger flow: gradient descent on the intensity least-squares objective
//! `(1/2M)·Σ_m (|a_mᴴρ|² − d_m)²`, started from the spectral estimate.

use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::forward::{IntensityMeasurements, SamplingMatrix};
use crate::linalg::{self, CVec};
use crate::spectral::{spectral_estimate_with, SpectralOperator, DEFAULT_MAX_ITERS, DEFAULT_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WfConfig {
    pub iterations: usize,
    /// Step cap `μ_max` of the ramp `μ_t = min(1 − e^{−t/t₀}, μ_max)`.
    pub mu_max: f64,
    /// Ramp constant `t₀`.
    pub ramp: f64,
    /// Fixed step overriding the ramp when set.
    #[serde(default)]
    pub constant_step: Option<f64>,
    #[serde(default = "default_tol")]
    pub init_tol: f64,
    #[serde(default = "default_max_iters")]
    pub init_max_iters: usize,
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

fn default_max_iters() -> usize {
    DEFAULT_MAX_ITERS
}

impl Default for WfConfig {
    fn default() -> Self {
        Self {
            iterations: 150,
            mu_max: 0.4,
            ramp: 330.0,
            constant_step: None,
            init_tol: DEFAULT_TOL,
            init_max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

impl WfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu_max > 0.0) || !(self.ramp > 0.0) {
            return Err(Error::invalid("WF step parameters must be positive"));
        }
        if let Some(mu) = self.constant_step {
            if !(mu > 0.0) {
                return Err(Error::invalid("WF constant step must be positive"));
            }
        }
        Ok(())
    }

    /// Step size at iteration `t` (1-based).
    pub fn step(&self, t: usize) -> f64 {
        self.constant_step
            .unwrap_or_else(|| (1.0 - (-(t as f64) / self.ramp).exp()).min(self.mu_max))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WfTrace {
    /// Objective at the start and after every iteration.
    pub objective: Vec<f64>,
    pub power_iterations: usize,
    pub elapsed_seconds: f64,
}

fn residuals(matrix: &SamplingMatrix, d: &IntensityMeasurements, rho: &[Complex64]) -> Result<(CVec, Vec<f64>)> {
    check_len("WF measurements", matrix.rows(), d.len())?;
    let f = matrix.apply_forward(rho)?;
    let r = f.iter().zip(&d.values).map(|(fm, dm)| fm.norm_sqr() - dm).collect();
    Ok((f, r))
}

pub fn wf_objective(matrix: &SamplingMatrix, d: &IntensityMeasurements, rho: &[Complex64]) -> Result<f64> {
    let (_, r) = residuals(matrix, d, rho)?;
    Ok(r.iter().map(|x| x * x).sum::<f64>() / (2.0 * matrix.rows() as f64))
}

/// Wirtinger gradient `(1/M)·Aᴴ((|Aρ|² − d) ⊙ Aρ)`.
///
/// Treating real and imaginary parts as independent reals, the gradient of
/// [`wf_objective`] is twice this vector: `∂/∂Re = 2·Re(g)`, `∂/∂Im = 2·Im(g)`.
pub fn wf_gradient(matrix: &SamplingMatrix, d: &IntensityMeasurements, rho: &[Complex64]) -> Result<CVec> {
    let (f, r) = residuals(matrix, d, rho)?;
    let inv_m = 1.0 / matrix.rows() as f64;
    let weighted: CVec = f.iter().zip(&r).map(|(fm, rm)| fm * (rm * inv_m)).collect();
    matrix.apply_adjoint(&weighted)
}

/// Runs WF from `ρ⁰ = spectral_estimate`, stepping
/// `ρ^{t+1} = ρ^t − (μ_t/‖ρ⁰‖²)·wf_gradient(ρ^t)`.
pub fn wf_run(matrix: &SamplingMatrix, d: &IntensityMeasurements, config: &WfConfig) -> Result<(CVec, WfTrace)> {
    config.validate()?;
    let start = Instant::now();
    let op = SpectralOperator::new(matrix, d)?;
    let (mut rho, report) = spectral_estimate_with(&op, config.init_tol, config.init_max_iters)?;
    let init_norm_sqr = linalg::norm_sqr(&rho);
    let mut objective = vec![wf_objective(matrix, d, &rho)?];
    if config.iterations > 0 && init_norm_sqr == 0.0 {
        return Err(Error::DegenerateOperator(
            "spectral initialization is zero; WF step cannot be scaled".into(),
        ));
    }
    for t in 1..=config.iterations {
        let grad = wf_gradient(matrix, d, &rho)?;
        let mu = config.step(t) / init_norm_sqr;
        for (x, g) in rho.iter_mut().zip(&grad) {
            *x -= g * mu;
        }
        let value = wf_objective(matrix, d, &rho)?;
        objective.push(value);
        if !value.is_finite() {
            return Err(Error::NonFinite(format!(
                "WF objective at iteration {t}; trace {objective:?}"
            )));
        }
    }
    Ok((
        rho,
        WfTrace {
            objective,
            power_iterations: report.map_or(0, |r| r.iterations),
            elapsed_seconds: start.elapsed().as_secs_f64(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::gaussian_sampling_matrix;

    #[test]
    fn objective_at_truth_and_zero() {
        let (a, truth) = gaussian_sampling_matrix(8, 40, 1);
        let d = a.intensity_measurements(&truth).unwrap();
        assert!(wf_objective(&a, &d, &truth).unwrap() < 1e-20);
        let zero = vec![Complex64::new(0.0, 0.0); 8];
        let expect = d.values.iter().map(|x| x * x).sum::<f64>() / 80.0;
        assert!((wf_objective(&a, &d, &zero).unwrap() - expect).abs() < 1e-12 * expect);
        let g = wf_gradient(&a, &d, &truth).unwrap();
        let scale = linalg::real_norm(&d.values);
        assert!(linalg::norm(&g) <= 1e-10 * scale);
    }

    #[test]
    fn cubic_homogeneity_without_data() {
        let (a, rho) = gaussian_sampling_matrix(6, 30, 2);
        let d = IntensityMeasurements::noiseless(vec![0.0; 30]);
        let c = 1.7;
        let g1 = wf_gradient(&a, &d, &rho).unwrap();
        let g2 = wf_gradient(&a, &d, &linalg::scale(&rho, c)).unwrap();
        for (x, y) in g1.iter().zip(&g2) {
            assert!((x * c.powi(3) - y).norm() < 1e-12 * y.norm().max(1.0));
        }
    }

    #[test]
    fn zero_iterations_returns_spectral_init() {
        let (a, truth) = gaussian_sampling_matrix(8, 64, 3);
        let d = a.intensity_measurements(&truth).unwrap();
        let config = WfConfig { iterations: 0, ..WfConfig::default() };
        let (rho, trace) = wf_run(&a, &d, &config).unwrap();
        let op = SpectralOperator::new(&a, &d).unwrap();
        assert_eq!(rho, crate::spectral::spectral_estimate(&op).unwrap());
        assert_eq!(trace.objective.len(), 1);
    }

    #[test]
    fn ramp_schedule() {
        let c = WfConfig::default();
        assert!((c.step(1) - (1.0 - (-1.0f64 / 330.0).exp())).abs() < 1e-15);
        assert_eq!(c.step(10_000), 0.4);
        let fixed = WfConfig { constant_step: Some(1e-3), ..c };
        assert_eq!(fixed.step(5), 1e-3);
        assert!(WfConfig { mu_max: 0.0, ..WfConfig::default() }.validate().is_err());
    }

    #[test]
    fn zero_data_cannot_scale_step() {
        let (a, _) = gaussian_sampling_matrix(4, 16, 4);
        let d = IntensityMeasurements::noiseless(vec![0.0; 16]);
        assert!(matches!(
            wf_run(&a, &d, &WfConfig::default()),
            Err(Error::DegenerateOperator(_))
        ));
    }
}
