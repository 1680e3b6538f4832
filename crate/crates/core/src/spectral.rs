//! Back-projected intensity operator `X̂ = (1/M)·Σ d_m a_m a_mᴴ`, applied
//! matrix-free as `(1/M)·Aᴴ(d ⊙ Av)`, and the power method on it.

use num_complex::Complex64;

use crate::error::{check_len, Error, Result};
use crate::forward::{IntensityMeasurements, SamplingMatrix};
use crate::linalg::{self, CVec};

/// Default power-method stopping tolerance for [`spectral_estimate`].
pub const DEFAULT_TOL: f64 = 1e-9;
/// Default power-method iteration cap for [`spectral_estimate`].
pub const DEFAULT_MAX_ITERS: usize = 5000;

#[derive(Debug, Clone)]
pub struct SpectralOperator<'a> {
    matrix: &'a SamplingMatrix,
    weights: Vec<f64>,
}

impl<'a> SpectralOperator<'a> {
    pub fn new(matrix: &'a SamplingMatrix, d: &IntensityMeasurements) -> Result<Self> {
        check_len("spectral operator data", matrix.rows(), d.len())?;
        Ok(Self {
            matrix,
            weights: d.values.clone(),
        })
    }

    pub fn matrix(&self) -> &'a SamplingMatrix {
        self.matrix
    }

    pub fn measurements(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    /// `X̂v = (1/M)·Aᴴ(d ⊙ Av)`.
    pub fn apply(&self, v: &[Complex64]) -> Result<CVec> {
        check_len("spectral_apply", self.dim(), v.len())?;
        Ok(self.apply_unchecked(v))
    }

    pub(crate) fn apply_unchecked(&self, v: &[Complex64]) -> CVec {
        let scale = 1.0 / self.matrix.rows() as f64;
        let mut f = self.matrix.forward_unchecked(v);
        for (fm, dm) in f.iter_mut().zip(&self.weights) {
            *fm *= dm * scale;
        }
        self.matrix.adjoint_unchecked(&f)
    }

    /// `ρᴴX̂ρ`, real because `X̂` is Hermitian.
    pub fn quadratic_form(&self, rho: &[Complex64]) -> Result<f64> {
        check_len("quadratic_form", self.dim(), rho.len())?;
        let f = self.matrix.forward_unchecked(rho);
        let sum: f64 = f
            .iter()
            .zip(&self.weights)
            .map(|(fm, dm)| dm * fm.norm_sqr())
            .sum();
        Ok(sum / self.matrix.rows() as f64)
    }
}

/// Free-function form of [`SpectralOperator::apply`].
pub fn spectral_apply(op: &SpectralOperator<'_>, v: &[Complex64]) -> Result<CVec> {
    op.apply(v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerMethodReport {
    /// Unit-norm leading eigenvector estimate `u₁`.
    pub eigenvector: CVec,
    /// Rayleigh quotient `u₁ᴴX̂u₁`.
    pub eigenvalue: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `‖X̂u₁ − λu₁‖`.
    pub residual: f64,
    /// Rayleigh quotient of every iterate, starting with the normalized `v0`.
    pub rayleigh_history: Vec<f64>,
}

/// Power iteration `v ← X̂v/‖X̂v‖` until successive iterates, aligned in
/// global phase, differ by at most `tol`, or `max_iters` is reached.
pub fn power_method(
    op: &SpectralOperator<'_>,
    v0: &[Complex64],
    tol: f64,
    max_iters: usize,
) -> Result<PowerMethodReport> {
    check_len("power_method start", op.dim(), v0.len())?;
    if !(tol > 0.0) {
        return Err(Error::invalid("power method tolerance must be positive"));
    }
    let mut v = linalg::normalized(v0)
        .ok_or_else(|| Error::invalid("power method start vector must be non-zero"))?;
    let mut w = op.apply_unchecked(&v);
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        history.push(linalg::inner(&v, &w).re);
        let next = normalize_iterate(&w, iterations)?;
        let align = linalg::unit_phase(linalg::inner(&next, &v));
        let step = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a * align - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        v = next;
        w = op.apply_unchecked(&v);
        iterations += 1;
        if step <= tol {
            converged = true;
            break;
        }
    }
    let eigenvalue = linalg::inner(&v, &w).re;
    history.push(eigenvalue);
    let residual = w
        .iter()
        .zip(&v)
        .map(|(a, b)| (a - b * eigenvalue).norm_sqr())
        .sum::<f64>()
        .sqrt();
    if eigenvalue < 0.0 {
        log::warn!("dominant eigenvalue {eigenvalue:e} is negative; spectral data is indefinite");
    }
    Ok(PowerMethodReport {
        eigenvector: v,
        eigenvalue,
        iterations,
        converged,
        residual,
        rayleigh_history: history,
    })
}

fn normalize_iterate(w: &[Complex64], iteration: usize) -> Result<CVec> {
    let n = linalg::norm(w);
    if n == 0.0 {
        return Err(Error::DegenerateOperator(format!(
            "X̂v vanished at iteration {iteration}"
        )));
    }
    if !n.is_finite() {
        return Err(Error::NonFinite("power iteration".into()));
    }
    Ok(linalg::scale(w, 1.0 / n))
}

/// Fixed start vector `(1/√N)·1`.
pub fn uniform_start(n: usize) -> CVec {
    vec![Complex64::new(1.0 / (n as f64).sqrt(), 0.0); n]
}

/// `λ₀ = ‖d‖/√(2M)`.
pub fn lambda0(d: &IntensityMeasurements) -> f64 {
    if d.is_empty() {
        return 0.0;
    }
    linalg::real_norm(&d.values) / (2.0 * d.len() as f64).sqrt()
}

/// `√λ₀·u₁` with `u₁` from the power method at default settings.
pub fn spectral_estimate(op: &SpectralOperator<'_>) -> Result<CVec> {
    spectral_estimate_with(op, DEFAULT_TOL, DEFAULT_MAX_ITERS).map(|(x, _)| x)
}

/// [`spectral_estimate`] with explicit power-method settings. The report is
/// `None` when `d = 0`, in which case the estimate is the zero vector.
pub fn spectral_estimate_with(
    op: &SpectralOperator<'_>,
    tol: f64,
    max_iters: usize,
) -> Result<(CVec, Option<PowerMethodReport>)> {
    let d = IntensityMeasurements::noiseless(op.measurements().to_vec());
    if d.values.iter().all(|x| *x == 0.0) {
        return Ok((vec![Complex64::new(0.0, 0.0); op.dim()], None));
    }
    let report = power_method(op, &uniform_start(op.dim()), tol, max_iters)?;
    let estimate = linalg::scale(&report.eigenvector, lambda0(&d).sqrt());
    Ok((estimate, Some(report)))
}

/// Data-fidelity term `J_S(ρ) = −ρᴴX̂ρ + ‖ρ‖²`.
pub fn j_s(op: &SpectralOperator<'_>, rho: &[Complex64]) -> Result<f64> {
    Ok(-op.quadratic_form(rho)? + linalg::norm_sqr(rho))
}

/// `ρᴴ δ(ρ*ρ*ᴴ) ρ` with `δ = (1/M)FᴴF − I`, evaluated as
/// `(1/M)·Σ_m |a_mᴴρ*|²·|a_mᴴρ|² − |ρᴴρ*|²`.
pub fn delta_quadratic(
    matrix: &SamplingMatrix,
    rho_star: &[Complex64],
    rho: &[Complex64],
) -> Result<f64> {
    let f_star = matrix.apply_forward(rho_star)?;
    let f = matrix.apply_forward(rho)?;
    let lifted: f64 = f_star
        .iter()
        .zip(&f)
        .map(|(a, b)| a.norm_sqr() * b.norm_sqr())
        .sum::<f64>()
        / matrix.rows() as f64;
    Ok(lifted - linalg::inner(rho, rho_star).norm_sqr())
}
