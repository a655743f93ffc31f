//! Comparison methods: zero filling, fixed-basis joint-sparse compressed
//! sensing, and dictionary learning with unstructured (entrywise) sparsity.

mod cs;
mod haar;

pub use cs::{cs_objective, cs_sparsity, reconstruct_cs_analysis, CsOutcome};
pub use haar::{haar_dwt2, haar_idwt2, HaarBasis};

use crate::dict::{reconstruct_dl_with_penalty, DlState};
use crate::error::Result;
use crate::model::{KSpaceData, MultiEchoImage, ReconParams};
use crate::operators::apply_adjoint;
use crate::solvers::CoefPenalty;

/// Minimum-norm least-squares estimate: the zero-filled inverse transform.
pub fn reconstruct_zero_filled(y: &KSpaceData) -> Result<MultiEchoImage> {
    apply_adjoint(y)
}

/// The dictionary-learning loop with an entrywise l1 penalty in place of the
/// row-sparsity penalty.
pub fn reconstruct_dl_sparse(y: &KSpaceData, params: &ReconParams) -> Result<DlState> {
    reconstruct_dl_with_penalty(y, params, CoefPenalty::Entrywise)
}
