//! Synthetic operators outside the SAR model, used to check spectral
//! estimation and Wirtinger flow in the regime where their behavior is
//! well established.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::forward::SamplingMatrix;
use crate::linalg::CVec;

/// `M×N` matrix of i.i.d. standard complex Gaussian entries
/// (`E|a|² = 1`) and a standard complex Gaussian signal of length `N`.
pub fn gaussian_sampling_matrix(n: usize, m: usize, seed: u64) -> (SamplingMatrix, CVec) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut draw = || {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(s * re, s * im)
    };
    let entries = (0..m * n).map(|_| draw()).collect();
    let signal = (0..n).map(|_| draw()).collect();
    (
        SamplingMatrix::from_rows(m, n, entries).expect("non-empty fixture"),
        signal,
    )
}

/// Standard complex Gaussian vector of length `n`.
pub fn gaussian_vector(n: usize, seed: u64) -> CVec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(s * re, s * im)
        })
        .collect()
}
