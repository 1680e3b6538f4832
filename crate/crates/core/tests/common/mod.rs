#![allow(dead_code)]

use num_complex::Complex64;
use sarpnp_core::fixtures::gaussian_vector;
use sarpnp_core::sar::{Acquisition, CircularGeometry, GridSpec, Setup};
use sarpnp_core::CVec;

/// Monostatic circular acquisition over an `n_side × n_side` grid with
/// `M = 2N`.
pub fn sar_setup(n_side: usize) -> Setup {
    let n = n_side * n_side;
    let (s, k) = match n {
        0..=16 => (8, 4),
        17..=36 => (12, 6),
        37..=64 => (16, 8),
        _ => (2 * n_side, n_side),
    };
    Acquisition {
        geometry: CircularGeometry {
            slow_time_samples: s,
            frequency_samples: k,
            ..CircularGeometry::desk_scale()
        },
        grid: GridSpec {
            extent_m: 2.0 * n_side as f64,
            pixels_per_side: n_side,
        },
        phase_model: Default::default(),
    }
    .build()
    .unwrap()
}

pub fn rand_vec(n: usize, seed: u64) -> CVec {
    gaussian_vector(n, seed)
}

/// Dense `(1/M)·Σ d_m a_m a_mᴴ`, row-major.
pub fn dense_spectral(setup_rows: &[Vec<Complex64>], d: &[f64]) -> Vec<Vec<Complex64>> {
    let n = setup_rows[0].len();
    let m = setup_rows.len() as f64;
    let mut x = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for (row, dm) in setup_rows.iter().zip(d) {
        // row holds a_mᴴ, so a_m(i) = conj(row[i])
        for i in 0..n {
            for j in 0..n {
                x[i][j] += row[i].conj() * row[j] * (*dm / m);
            }
        }
    }
    x
}

pub fn dense_apply(x: &[Vec<Complex64>], v: &[Complex64]) -> CVec {
    x.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn rel_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum::<f64>().sqrt();
    num / den.max(1e-300)
}
