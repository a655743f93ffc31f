use nalgebra::DMatrix;

use crate::error::{Error, Result};

fn check_tau(tau: f64) -> Result<()> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::invalid(format!(
            "threshold must be finite and >= 0, got {tau}"
        )));
    }
    Ok(())
}

/// Proximal map of `tau · ||·||_{2,1}`: shrinks every row toward zero by `tau`
/// in Euclidean norm.
pub fn row_soft_threshold(m: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    check_tau(tau)?;
    let mut out = m.clone();
    row_soft_threshold_in_place(&mut out, tau);
    Ok(out)
}

pub(crate) fn row_soft_threshold_in_place(m: &mut DMatrix<f64>, tau: f64) {
    for mut row in m.row_iter_mut() {
        let n = row.norm();
        if n <= tau {
            row.fill(0.0);
        } else {
            row *= 1.0 - tau / n;
        }
    }
}

/// Entrywise soft thresholding, the proximal map of `tau · ||·||_1`.
pub fn soft_threshold(m: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    check_tau(tau)?;
    let mut out = m.clone();
    soft_threshold_in_place(&mut out, tau);
    Ok(out)
}

pub(crate) fn soft_threshold_in_place(m: &mut DMatrix<f64>, tau: f64) {
    for v in m.iter_mut() {
        *v = v.signum() * (v.abs() - tau).max(0.0);
    }
}
