//! Small helpers on complex vectors stored as `Vec<Complex64>`.
//!
//! The inner product convention used everywhere is `⟨a, b⟩ = aᴴb = Σ conj(aₙ)·bₙ`.

use num_complex::Complex64;

pub type CVec = Vec<Complex64>;

/// `⟨a, b⟩ = Σ conj(aₙ)·bₙ`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

pub fn norm(a: &[Complex64]) -> f64 {
    norm_sqr(a).sqrt()
}

pub fn scale(a: &[Complex64], s: f64) -> CVec {
    a.iter().map(|x| x * s).collect()
}

pub fn scale_complex(a: &[Complex64], s: Complex64) -> CVec {
    a.iter().map(|x| x * s).collect()
}

pub fn sub(a: &[Complex64], b: &[Complex64]) -> CVec {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn real_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Returns `a / ‖a‖`, or `None` when the norm is zero or not finite.
pub fn normalized(a: &[Complex64]) -> Option<CVec> {
    let n = norm(a);
    if n > 0.0 && n.is_finite() {
        Some(scale(a, 1.0 / n))
    } else {
        None
    }
}

pub fn all_finite(a: &[Complex64]) -> bool {
    a.iter().all(|x| x.re.is_finite() && x.im.is_finite())
}

/// Unit-modulus complex number with the phase of `z`, or 1 when `z = 0`.
pub fn unit_phase(z: Complex64) -> Complex64 {
    let r = z.norm();
    if r > 0.0 {
        z / r
    } else {
        Complex64::new(1.0, 0.0)
    }
}
