use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::power::power_iteration;
use super::prox::{row_soft_threshold_in_place, soft_threshold_in_place};
use crate::error::{Error, Result};
use crate::model::{l21_norm, Dictionary};

/// Sparsity penalty on coefficient matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefPenalty {
    /// `||Z||_{2,1}`: rows shared across echoes.
    RowSparse,
    /// `||Z||_1`: independent entries.
    Entrywise,
}

impl CoefPenalty {
    pub fn value(self, z: &DMatrix<f64>) -> f64 {
        match self {
            CoefPenalty::RowSparse => l21_norm(z).unwrap_or(f64::NAN),
            CoefPenalty::Entrywise => z.iter().map(|v| v.abs()).sum(),
        }
    }

    /// Penalty summed over all patch locations.
    pub fn sum(self, coefs: &[DMatrix<f64>]) -> f64 {
        coefs.iter().map(|z| self.value(z)).sum()
    }

    pub(crate) fn prox_in_place(self, z: &mut DMatrix<f64>, tau: f64) {
        match self {
            CoefPenalty::RowSparse => row_soft_threshold_in_place(z, tau),
            CoefPenalty::Entrywise => soft_threshold_in_place(z, tau),
        }
    }
}

const STEP_SAFETY: f64 = 1.01;
const POWER_ITERS: usize = 200;
const REL_CHANGE_TOL: f64 = 1e-6;

/// Proximal gradient for `min_Z ||X - D Z||_F² + λ·penalty(Z)` with a fixed
/// dictionary. `DᵀD` and the step size are computed once and reused across
/// patch locations.
#[derive(Debug, Clone)]
pub struct IstaSolver {
    dt: DMatrix<f64>,
    gram: DMatrix<f64>,
    lipschitz: f64,
    penalty: CoefPenalty,
}

#[derive(Debug, Clone)]
pub struct IstaOutcome {
    pub z: DMatrix<f64>,
    pub iters: usize,
    /// Objective at the start point followed by one value per iteration.
    pub objective: Vec<f64>,
}

impl IstaSolver {
    pub fn new(dictionary: &Dictionary, penalty: CoefPenalty, seed: u64) -> Result<Self> {
        let d = dictionary.atoms();
        let gram = d.transpose() * d;
        let l = power_iteration(&gram, gram.nrows(), POWER_ITERS, seed);
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::invalid(
                "dictionary Gram matrix has no positive eigenvalue",
            ));
        }
        Ok(Self {
            dt: d.transpose(),
            gram,
            lipschitz: l * STEP_SAFETY,
            penalty,
        })
    }

    /// Step constant `L` (safety-scaled largest eigenvalue of `DᵀD`).
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn objective(&self, x: &DMatrix<f64>, z: &DMatrix<f64>, lambda: f64) -> f64 {
        let r = x - self.dt.transpose() * z;
        r.norm_squared() + lambda * self.penalty.value(z)
    }

    /// Runs at most `iters` steps from `z0`, stopping early once the relative
    /// iterate change drops below 1e-6. Set `track` to record the objective.
    pub fn solve(
        &self,
        x: &DMatrix<f64>,
        lambda: f64,
        z0: &DMatrix<f64>,
        iters: usize,
        track: bool,
    ) -> Result<IstaOutcome> {
        if !(lambda >= 0.0) {
            return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
        }
        if x.nrows() != self.dt.ncols()
            || z0.nrows() != self.gram.nrows()
            || z0.ncols() != x.ncols()
        {
            return Err(Error::shape(format!(
                "ISTA: X {}x{}, Z0 {}x{}, D {}x{}",
                x.nrows(),
                x.ncols(),
                z0.nrows(),
                z0.ncols(),
                self.dt.ncols(),
                self.dt.nrows()
            )));
        }
        let dtx = &self.dt * x;
        let step = 1.0 / self.lipschitz;
        let tau = lambda / (2.0 * self.lipschitz);
        let mut z = z0.clone();
        let mut objective = Vec::new();
        if track {
            objective.push(self.objective(x, &z, lambda));
        }
        let mut done = 0;
        for _ in 0..iters {
            // Z - (1/L) Dᵀ(DZ - X)
            let mut next = &z - (&self.gram * &z - &dtx) * step;
            self.penalty.prox_in_place(&mut next, tau);
            let change = (&next - &z).norm();
            let scale = z.norm().max(next.norm());
            z = next;
            done += 1;
            if track {
                objective.push(self.objective(x, &z, lambda));
            }
            if change <= REL_CHANGE_TOL * scale {
                break;
            }
        }
        Ok(IstaOutcome {
            z,
            iters: done,
            objective,
        })
    }
}

/// Row-sparse coding of one patch matrix: `min_Z ||X - D Z||_F² + λ||Z||_{2,1}`.
pub fn ista_row_sparse(
    dictionary: &Dictionary,
    x: &DMatrix<f64>,
    lambda: f64,
    z0: &DMatrix<f64>,
    iters: usize,
) -> Result<IstaOutcome> {
    IstaSolver::new(dictionary, CoefPenalty::RowSparse, 0)?.solve(x, lambda, z0, iters, true)
}
