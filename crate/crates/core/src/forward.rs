//! Sampling vectors of the SAR intensity model and the linear, adjoint and
//! lifted maps built from them.
//!
//! The operator is stored densely as an `M×N` row-major matrix whose `m`-th
//! row is `a_mᴴ`, so `(Aρ)_m = a_mᴴρ` is the received signal and
//! `|a_mᴴρ|²` the intensity. Everything above this module talks to it only
//! through [`SamplingMatrix::apply_forward`] and
//! [`SamplingMatrix::apply_adjoint`].

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::CVec;
use crate::sar::{SarGeometry, SceneGrid};

/// Which phase model generates the sampling vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseModel {
    /// Small-scene, far-field linearization: phase `(ω/c)(γ̂_T + γ̂_R)·x`.
    #[default]
    FarField,
    /// Exact bistatic path length `|γ_T − x| + |x − γ_R|`.
    ExactPhase,
    /// Rows supplied directly by the caller (test fixtures, synthetic operators).
    Custom,
}

#[derive(Debug, Clone)]
pub struct SamplingMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
    model: PhaseModel,
}

/// Intensity data `d ∈ ℝ^M`, with the SNR of any noise added to it.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityMeasurements {
    pub values: Vec<f64>,
    pub snr_db: Option<f64>,
}

impl IntensityMeasurements {
    pub fn noiseless(values: Vec<f64>) -> Self {
        Self {
            values,
            snr_db: None,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl SamplingMatrix {
    pub fn build(geometry: &SarGeometry, grid: &SceneGrid, model: PhaseModel) -> Result<Self> {
        let k_count = geometry.frequency_count();
        let m_count = geometry.measurement_count();
        let n_count = grid.len();
        let c0 = geometry.wave_speed();
        let mut entries = Vec::with_capacity(m_count * n_count);
        match model {
            PhaseModel::FarField => {
                for (tx, rx) in geometry
                    .transmit_positions()
                    .iter()
                    .zip(geometry.receive_positions())
                {
                    let (ut, ur) = (crate::sar::geometry_unit(tx), crate::sar::geometry_unit(rx));
                    let look = [ut[0] + ur[0], ut[1] + ur[1]];
                    for &omega in geometry.angular_frequencies() {
                        let k = omega / c0;
                        entries.extend(grid.positions().iter().map(|x| {
                            // conj(a_m(n)) = exp(+i·(ω/c)·look·x)
                            Complex64::from_polar(1.0, k * (look[0] * x[0] + look[1] * x[1]))
                        }));
                    }
                }
            }
            PhaseModel::ExactPhase => {
                let dist = |p: &[f64; 3], x: &[f64; 2]| {
                    let (dx, dy, dz) = (p[0] - x[0], p[1] - x[1], p[2]);
                    (dx * dx + dy * dy + dz * dz).sqrt()
                };
                for (tx, rx) in geometry
                    .transmit_positions()
                    .iter()
                    .zip(geometry.receive_positions())
                {
                    for &omega in geometry.angular_frequencies() {
                        let k = omega / c0;
                        entries.extend(grid.positions().iter().map(|x| {
                            Complex64::from_polar(1.0, k * (dist(tx, x) + dist(rx, x)))
                        }));
                    }
                }
            }
            PhaseModel::Custom => {
                return Err(Error::invalid(
                    "custom operators are built with SamplingMatrix::from_rows",
                ))
            }
        }
        debug_assert_eq!(entries.len(), m_count * n_count);
        debug_assert_eq!(m_count % k_count, 0);
        Ok(Self {
            rows: m_count,
            cols: n_count,
            entries,
            model,
        })
    }

    /// Wraps an explicit `M×N` row-major matrix whose rows are `a_mᴴ`.
    pub fn from_rows(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("sampling matrix must be non-empty"));
        }
        check_len("sampling matrix entries", rows * cols, entries.len())?;
        Ok(Self {
            rows,
            cols,
            entries,
            model: PhaseModel::Custom,
        })
    }

    /// Measurement count `M`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Pixel count `N`.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn model(&self) -> PhaseModel {
        self.model
    }

    /// Row `m` of the matrix, i.e. `a_mᴴ` stored entrywise as `conj(a_m(n))`.
    pub fn row(&self, m: usize) -> &[Complex64] {
        &self.entries[m * self.cols..(m + 1) * self.cols]
    }

    /// The sampling vector `a_m` itself.
    pub fn sampling_vector(&self, m: usize) -> CVec {
        self.row(m).iter().map(|z| z.conj()).collect()
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// `f = Aρ`, `f_m = a_mᴴρ`.
    pub fn apply_forward(&self, rho: &[Complex64]) -> Result<CVec> {
        check_len("apply_forward", self.cols, rho.len())?;
        Ok(self.forward_unchecked(rho))
    }

    pub(crate) fn forward_unchecked(&self, rho: &[Complex64]) -> CVec {
        self.entries
            .chunks_exact(self.cols)
            .map(|row| dot(row, rho))
            .collect()
    }

    /// `Aᴴy = Σ_m y_m·a_m`.
    pub fn apply_adjoint(&self, y: &[Complex64]) -> Result<CVec> {
        check_len("apply_adjoint", self.rows, y.len())?;
        Ok(self.adjoint_unchecked(y))
    }

    pub(crate) fn adjoint_unchecked(&self, y: &[Complex64]) -> CVec {
        let mut out = vec![Complex64::new(0.0, 0.0); self.cols];
        for (row, ym) in self.entries.chunks_exact(self.cols).zip(y) {
            conj_axpy(&mut out, row, *ym);
        }
        out
    }

    /// `d_m = |a_mᴴρ|²`.
    pub fn intensity_measurements(&self, rho: &[Complex64]) -> Result<IntensityMeasurements> {
        let f = self.apply_forward(rho)?;
        Ok(IntensityMeasurements::noiseless(
            f.iter().map(|z| z.norm_sqr()).collect(),
        ))
    }

    /// Lifted map `d_m = Re(a_mᴴ P a_m)` for a Hermitian `N×N` row-major `P`.
    pub fn apply_lifted(&self, p: &[Complex64]) -> Result<Vec<f64>> {
        let n = self.cols;
        check_len("apply_lifted", n * n, p.len())?;
        let scale = p.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
        for i in 0..n {
            for j in i..n {
                if (p[i * n + j] - p[j * n + i].conj()).norm() > 1e-9 * scale {
                    return Err(Error::invalid("lifted input must be Hermitian"));
                }
            }
        }
        Ok(self
            .entries
            .chunks_exact(n)
            .map(|row| {
                // a_mᴴ P a_m with row = a_mᴴ, a_m = conj(row)
                let mut acc = Complex64::new(0.0, 0.0);
                for (i, ri) in row.iter().enumerate() {
                    let prow = &p[i * n..(i + 1) * n];
                    let pa: Complex64 = prow.iter().zip(row).map(|(pij, rj)| pij * rj.conj()).sum();
                    acc += ri * pa;
                }
                acc.re
            })
            .collect())
    }
}

#[inline]
fn dot(row: &[Complex64], v: &[Complex64]) -> Complex64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (a, b) in row.iter().zip(v) {
        re += a.re * b.re - a.im * b.im;
        im += a.re * b.im + a.im * b.re;
    }
    Complex64::new(re, im)
}

/// `out += conj(row)·s`.
#[inline]
fn conj_axpy(out: &mut [Complex64], row: &[Complex64], s: Complex64) {
    for (o, a) in out.iter_mut().zip(row) {
        o.re += a.re * s.re + a.im * s.im;
        o.im += a.re * s.im - a.im * s.re;
    }
}

/// Adds i.i.d. Gaussian noise with `σ² = ‖d‖²/(M·10^(snr/10))`.
///
/// Values are not clamped, so noisy intensities can be negative. An infinite
/// SNR leaves the data untouched.
pub fn add_intensity_noise(
    d: &IntensityMeasurements,
    snr_db: f64,
    seed: u64,
) -> Result<IntensityMeasurements> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::invalid("SNR must be a number below +∞"));
    }
    if snr_db == f64::INFINITY || d.is_empty() {
        return Ok(IntensityMeasurements {
            values: d.values.clone(),
            snr_db: Some(snr_db),
        });
    }
    let energy: f64 = d.values.iter().map(|x| x * x).sum();
    let sigma = (energy / (d.len() as f64 * 10f64.powf(snr_db / 10.0))).sqrt();
    let values = if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        d.values.iter().map(|x| x + normal.sample(&mut rng)).collect()
    } else {
        d.values.clone()
    };
    Ok(IntensityMeasurements {
        values,
        snr_db: Some(snr_db),
    })
}
