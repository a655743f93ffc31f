//! Numerical primitives shared by the reconstruction engines.

mod cg;
mod ista;
mod power;
mod prox;

pub use cg::{conjugate_gradient, CgOutcome, FnOperator, SpdOperator};
pub use ista::{ista_row_sparse, CoefPenalty, IstaOutcome, IstaSolver};
pub use power::power_iteration;
pub use prox::{row_soft_threshold, soft_threshold};
