//! Reference implementations shared by the integration tests. Everything here
//! is written from the definitions, without reusing the library's kernels.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| gaussian(rng)).collect()
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| gaussian(rng))
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

/// Unitary 2-D DFT by the defining double sum.
pub fn naive_dft2(x: &[Complex64], h: usize, w: usize) -> Vec<Complex64> {
    let scale = 1.0 / ((h * w) as f64).sqrt();
    let mut out = vec![Complex64::new(0.0, 0.0); h * w];
    for k in 0..h {
        for l in 0..w {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in 0..h {
                for n in 0..w {
                    let phase = -2.0
                        * std::f64::consts::PI
                        * ((k * m) as f64 / h as f64 + (l * n) as f64 / w as f64);
                    acc += x[m * w + n] * Complex64::from_polar(1.0, phase);
                }
            }
            out[k * w + l] = acc * scale;
        }
    }
    out
}

/// Minimizer of a convex function on `[lo, hi]` given its right derivative:
/// the smallest point where that derivative is non-negative, by bisection.
pub fn convex_argmin(right_derivative: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if right_derivative(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn sign_right(z: f64) -> f64 {
    if z >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// `argmin_z ½(z - v)² + τ|z|`, found numerically.
pub fn scalar_shrink_oracle(v: f64, tau: f64) -> f64 {
    let r = v.abs() + 1.0;
    convex_argmin(|z| z - v + tau * sign_right(z), -r, r)
}

/// `argmin_z ½||z - r||² + τ||z||₂`. The minimizer is a non-negative multiple
/// of `r`, so a one-dimensional search over its length suffices.
pub fn row_shrink_oracle(r: &[f64], tau: f64) -> Vec<f64> {
    let n = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n == 0.0 {
        return vec![0.0; r.len()];
    }
    let s = convex_argmin(|s| s - n + tau * sign_right(s), -1.0, n + 1.0).max(0.0);
    r.iter().map(|v| v * s / n).collect()
}

/// Gradient of `||T X - Z||² + γ(||T||² - log|det T|)` at `T`, and the sum of
/// the norms of its terms (the scale for relative comparisons).
pub fn transform_gradient(
    t: &DMatrix<f64>,
    x: &DMatrix<f64>,
    z: &DMatrix<f64>,
    gamma: f64,
) -> (DMatrix<f64>, f64) {
    let fit = 2.0 * (t * x) * x.transpose();
    let cross = 2.0 * z * x.transpose();
    let ridge = 2.0 * gamma * t;
    let barrier = gamma * t.clone().try_inverse().expect("invertible").transpose();
    let g = &fit - &cross + &ridge - &barrier;
    let scale = fit.norm() + cross.norm() + ridge.norm() + barrier.norm();
    (g, scale)
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

pub fn rel_err_c(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}
