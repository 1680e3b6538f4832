use num_complex::Complex64;

use super::network::{unrolled_forward, TrainedModel};
use crate::autodiff::{complex_to_planes, planes_to_complex, Tape, Tensor, Var};
use crate::error::{check_len, Result};
use crate::forward::{IntensityMeasurements, SamplingMatrix};
use crate::linalg;
use crate::spectral::SpectralOperator;

/// `min_θ ‖ρ − e^{iθ}ρ_ref‖² = ‖ρ‖² + ‖ρ_ref‖² − 2|⟨ρ_ref, ρ⟩|`.
///
/// Summed directly at the optimal phase rather than through the closed form,
/// which loses all digits below `√ε·‖ρ‖` to cancellation.
pub fn phase_aligned_error(rho: &[Complex64], rho_ref: &[Complex64]) -> f64 {
    let phase = optimal_phase(rho, rho_ref);
    rho.iter()
        .zip(rho_ref)
        .map(|(r, t)| (r - phase * t).norm_sqr())
        .sum()
}

/// The unit phase `e^{iθ}` attaining the minimum in [`phase_aligned_error`],
/// i.e. the phase of `⟨ρ_ref, ρ⟩ = ρ_refᴴρ`.
pub fn optimal_phase(rho: &[Complex64], rho_ref: &[Complex64]) -> Complex64 {
    linalg::unit_phase(linalg::inner(rho_ref, rho))
}

/// `√(phase_aligned_error)/‖ρ_ref‖`.
pub fn relative_error(rho: &[Complex64], rho_ref: &[Complex64]) -> f64 {
    (phase_aligned_error(rho, rho_ref) / linalg::norm_sqr(rho_ref)).sqrt()
}

/// Records the phase-aligned error between a `[1, 2, n, n]` image on the
/// tape and a fixed complex target. Where `⟨t, ρ⟩ = 0` the modulus term
/// contributes a zero subgradient.
pub(crate) fn phase_aligned_error_on_tape<'a>(
    tape: &mut Tape<'a>,
    rho: Var,
    target: &'a [Complex64],
) -> Result<Var> {
    let value = planes_to_complex(tape.value(rho));
    check_len("training target", value.len(), target.len())?;
    let loss = phase_aligned_error(&value, target);
    let c = linalg::inner(target, &value);
    let shape = tape.value(rho).shape().to_vec();
    let n_side = shape[2];
    tape.custom(
        "phase_aligned_error",
        &[rho],
        Tensor::scalar(loss),
        Box::new(move |g| {
            let scale = g.data()[0];
            let phase = if c.norm() > 0.0 {
                c / c.norm()
            } else {
                Complex64::new(0.0, 0.0)
            };
            let grad: Vec<Complex64> = value
                .iter()
                .zip(target)
                .map(|(r, t)| (r - phase * t) * (2.0 * scale))
                .collect();
            Ok(vec![complex_to_planes(&grad, n_side)?.reshaped(&shape)?])
        }),
    )
}

/// Mean phase-aligned error of the model over `(d, ρ*_n)` pairs.
pub fn training_loss(
    matrix: &SamplingMatrix,
    batch: &[(IntensityMeasurements, Vec<Complex64>)],
    model: &TrainedModel,
) -> Result<f64> {
    let mut total = 0.0;
    for (d, target) in batch {
        let op = SpectralOperator::new(matrix, d)?;
        let rho = unrolled_forward(&op, model)?;
        total += phase_aligned_error(&rho, target);
    }
    Ok(total / batch.len().max(1) as f64)
}
