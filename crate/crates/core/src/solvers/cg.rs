use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A symmetric positive semi-definite linear map on `R^dim`.
pub trait SpdOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], out: &mut [f64]);
}

impl SpdOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

/// Wraps a closure as an [`SpdOperator`].
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> SpdOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iters: usize,
    /// Final `||A x - b|| / ||b||` (recurrence residual).
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Conjugate gradient for `A x = b` from `x0`, stopping once
/// `||A x - b|| <= tol * ||b||` or after `max_iters` updates.
pub fn conjugate_gradient<A: SpdOperator + ?Sized>(
    a: &A,
    b: &[f64],
    x0: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<CgOutcome> {
    let n = a.dim();
    if b.len() != n || x0.len() != n {
        return Err(Error::shape(format!(
            "CG operator dim {n}, rhs {}, x0 {}",
            b.len(),
            x0.len()
        )));
    }
    let b_norm = dot(b, b).sqrt();
    if !b_norm.is_finite() {
        return Err(Error::Numerical {
            iteration: 0,
            reason: "right-hand side is not finite".into(),
        });
    }
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            x: vec![0.0; n],
            iters: 0,
            residual: 0.0,
        });
    }

    let mut x = x0.to_vec();
    let mut ap = vec![0.0; n];
    a.apply(&x, &mut ap);
    let mut r: Vec<f64> = b.iter().zip(&ap).map(|(bi, ai)| bi - ai).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let target = tol * b_norm;

    let mut iters = 0;
    while rr.sqrt() > target && iters < max_iters {
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !pap.is_finite() || pap <= 0.0 {
            if pap == 0.0 {
                // p lies in the null space; nothing more to gain.
                break;
            }
            return Err(Error::Numerical {
                iteration: iters,
                reason: format!("curvature pᵀAp = {pap}"),
            });
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        iters += 1;
        if !rr_new.is_finite() {
            return Err(Error::Numerical {
                iteration: iters,
                reason: "residual became non-finite".into(),
            });
        }
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    Ok(CgOutcome {
        x,
        iters,
        residual: rr.sqrt() / b_norm,
    })
}
