//! Multi-echo MRI reconstruction from partially sampled k-space.
//!
//! Every echo image of a multi-echo acquisition shows the same anatomy with a
//! different contrast, so patches taken at the same location across echoes
//! share their support in any good sparsifying basis. This crate learns that
//! basis from the data while reconstructing, either as a synthesis dictionary
//! ([`dict`]) or as an analysis transform ([`transform`]), with an
//! l2,1 (row-sparsity) penalty coupling the echoes. Fixed-basis and
//! unstructured baselines live in [`baselines`].
//!
//! The pipeline is: [`phantom::generate_phantom`] → [`operators::generate_mask`]
//! → [`phantom::simulate_acquisition`] → [`Method::reconstruct`] →
//! [`metrics::snr_db`].

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod dict;
mod engine;
pub mod error;
mod exec;
pub mod io;
pub mod lcurve;
pub mod method;
pub mod metrics;
pub mod model;
pub mod operators;
pub mod phantom;
pub mod solvers;
pub mod transform;

pub use error::{Error, Result};
pub use method::{Method, ObjectiveTerms, Reconstruction};
pub use model::{
    l21_norm, AlternationOrder, Dictionary, KSpaceData, MultiEchoImage, PatchMatrix, ReconParams,
    SamplingMask, Transform, Validate, Violation,
};
pub use operators::{ForwardModel, PatchScheme};
