use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::config::{InitialVector, UnrolledConfig};
use crate::autodiff::{
    complex_to_planes, planes_to_complex, DenoiserParams, LayerVars, Tape, Tensor, Var,
};
use crate::error::{Error, Result};
use crate::forward::{IntensityMeasurements, SamplingMatrix};
use crate::linalg::{self, CVec};
use crate::spectral::{lambda0, uniform_start, SpectralOperator};

/// Unrolled network: configuration, one parameter set per denoiser bank,
/// and the per-epoch mean training loss.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub config: UnrolledConfig,
    pub banks: Vec<DenoiserParams>,
    pub history: Vec<f64>,
}

impl TrainedModel {
    /// Freshly initialized banks (the identity denoiser for residual architectures).
    pub fn initialized(config: UnrolledConfig) -> Result<Self> {
        config.validate()?;
        let banks = (0..config.bank_count())
            .map(|b| DenoiserParams::init(config.denoiser, config.training.seed.wrapping_add(b as u64)))
            .collect::<Result<_>>()?;
        Ok(Self {
            config,
            banks,
            history: Vec::new(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.banks.len() != self.config.bank_count() {
            return Err(Error::invalid(format!(
                "model has {} banks but its tying map needs {}",
                self.banks.len(),
                self.config.bank_count()
            )));
        }
        for bank in &self.banks {
            if bank.arch != self.config.denoiser {
                return Err(Error::invalid("bank architecture differs from config"));
            }
            bank.validate()?;
        }
        Ok(())
    }

    pub fn stages(&self) -> usize {
        self.config.stages()
    }

    pub fn parameter_count(&self) -> usize {
        self.banks.iter().map(DenoiserParams::parameter_count).sum()
    }
}

pub(crate) fn side_of(n: usize) -> Result<usize> {
    let side = (n as f64).sqrt().round() as usize;
    if side * side != n {
        return Err(Error::invalid(format!("image length {n} is not a square")));
    }
    Ok(side)
}

fn initial_vector(policy: InitialVector, n: usize) -> CVec {
    match policy {
        InitialVector::Uniform => uniform_start(n),
    }
}

/// Records `X̂x` for a `[1, 2, n, n]` planes tensor. `X̂` is Hermitian, so the
/// vector-Jacobian product is `X̂g`.
pub(crate) fn spectral_on_tape<'a>(
    tape: &mut Tape<'a>,
    op: &'a SpectralOperator<'a>,
    x: Var,
) -> Result<Var> {
    let shape = tape.value(x).shape().to_vec();
    let n_side = shape[2];
    let w = op.apply(&planes_to_complex(tape.value(x)))?;
    let value = complex_to_planes(&w, n_side)?.reshaped(&shape)?;
    tape.custom(
        "spectral_apply",
        &[x],
        value,
        Box::new(move |g: &Tensor| {
            let back = op.apply(&planes_to_complex(g))?;
            Ok(vec![complex_to_planes(&back, n_side)?.reshaped(&shape)?])
        }),
    )
}

/// Records every stage on `tape`. Returns the final image and the norms
/// `‖z_l‖` before each normalization.
pub(crate) fn unrolled_on_tape<'a>(
    tape: &mut Tape<'a>,
    op: &'a SpectralOperator<'a>,
    model: &TrainedModel,
    bank_vars: &[Vec<LayerVars>],
) -> Result<(Var, Vec<f64>)> {
    let n = op.dim();
    let n_side = side_of(n)?;
    let mut rho = tape.leaf(complex_to_planes(
        &initial_vector(model.config.initial_vector, n),
        n_side,
    )?)?;
    let mut norms = Vec::with_capacity(model.stages());
    for &bank in &model.config.tying {
        let w = spectral_on_tape(tape, op, rho)?;
        let z = model.banks[bank].forward(tape, &bank_vars[bank], w)?;
        norms.push(tape.value(z).norm());
        rho = tape.normalize(z)?;
    }
    Ok((rho, norms))
}

/// One stage: `ρ = D(X̂ρ_prev)/‖D(X̂ρ_prev)‖`.
pub fn pnp_stage(
    op: &SpectralOperator<'_>,
    rho_prev: &[Complex64],
    denoiser: &DenoiserParams,
) -> Result<CVec> {
    if linalg::norm(rho_prev) == 0.0 {
        return Err(Error::invalid("stage input must be non-zero"));
    }
    let n_side = side_of(op.dim())?;
    let w = op.apply(rho_prev)?;
    let z = crate::autodiff::denoiser_apply(denoiser, &w, n_side)?;
    let norm = linalg::norm(&z);
    if !(norm >= 1e-30) {
        return Err(Error::DegenerateNormalization { norm });
    }
    Ok(linalg::scale(&z, 1.0 / norm))
}

/// Runs all stages and returns `ρ_L` (unit norm; `ρ₀` when `L = 0`).
pub fn unrolled_forward(op: &SpectralOperator<'_>, model: &TrainedModel) -> Result<CVec> {
    unrolled_forward_traced(op, model).map(|(rho, _)| rho)
}

/// [`unrolled_forward`] that also returns `‖z_l‖` for every stage.
pub fn unrolled_forward_traced(
    op: &SpectralOperator<'_>,
    model: &TrainedModel,
) -> Result<(CVec, Vec<f64>)> {
    model.validate()?;
    let mut tape = Tape::new();
    let vars = model
        .banks
        .iter()
        .map(|b| b.register(&mut tape))
        .collect::<Result<Vec<_>>>()?;
    let (rho, norms) = unrolled_on_tape(&mut tape, op, model, &vars)?;
    Ok((planes_to_complex(tape.value(rho)), norms))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub stages: usize,
    /// `‖z_l‖` before each normalization.
    pub stage_norms: Vec<f64>,
    pub elapsed_seconds: f64,
    /// `√λ₀`, the factor that restores amplitude to the unit-norm estimate.
    pub amplitude_scale: f64,
}

impl ReconstructionReport {
    /// `√λ₀·ρ_L`, for display.
    pub fn restore_amplitude(&self, rho: &[Complex64]) -> CVec {
        linalg::scale(rho, self.amplitude_scale)
    }
}

/// Images `d` with the unrolled network. The returned estimate has unit norm.
pub fn reconstruct(
    d: &IntensityMeasurements,
    matrix: &SamplingMatrix,
    model: &TrainedModel,
) -> Result<(CVec, ReconstructionReport)> {
    let start = Instant::now();
    let op = SpectralOperator::new(matrix, d)?;
    let (rho, stage_norms) = unrolled_forward_traced(&op, model)?;
    let elapsed_seconds = start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE);
    Ok((
        rho,
        ReconstructionReport {
            stages: model.stages(),
            stage_norms,
            elapsed_seconds,
            amplitude_scale: lambda0(d).sqrt(),
        },
    ))
}
