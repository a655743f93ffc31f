use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::cg::SpdOperator;

/// Largest eigenvalue of a symmetric PSD operator by power iteration from a
/// seeded Gaussian start vector. Returns the final Rayleigh quotient.
pub fn power_iteration<A: SpdOperator + ?Sized>(
    op: &A,
    dim: usize,
    iters: usize,
    seed: u64,
) -> f64 {
    if dim == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut w = vec![0.0; dim];
    let normalize = |v: &mut [f64]| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            v.iter_mut().for_each(|x| *x /= n);
        }
        n
    };
    normalize(&mut v);
    for _ in 0..iters {
        op.apply(&v, &mut w);
        if normalize(&mut w) == 0.0 {
            return 0.0;
        }
        std::mem::swap(&mut v, &mut w);
    }
    op.apply(&v, &mut w);
    v.iter().zip(&w).map(|(a, b)| a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn diagonal_largest() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 5.0, 2.0]));
        assert!((power_iteration(&a, 3, 100, 3) - 5.0).abs() < 1e-6);
    }

    #[test]
    fn identity_is_one() {
        let a = DMatrix::<f64>::identity(6, 6);
        assert!((power_iteration(&a, 6, 5, 0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_operator_is_zero() {
        let a = DMatrix::<f64>::zeros(4, 4);
        assert_eq!(power_iteration(&a, 4, 10, 0), 0.0);
    }

    #[test]
    fn deterministic_for_seed() {
        let a = DMatrix::from_fn(5, 5, |i, j| 1.0 / (1.0 + i as f64 + j as f64));
        assert_eq!(power_iteration(&a, 5, 7, 11), power_iteration(&a, 5, 7, 11));
    }
}
