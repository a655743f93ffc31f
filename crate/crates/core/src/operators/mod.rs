//! Linear operators of the acquisition model and the patch decomposition.

mod fft;
mod forward;
mod mask;
mod patches;

pub use fft::{fft2_unitary, fft2_unitary_real, ifft2_unitary, Fft2};
pub use forward::{apply_adjoint, apply_forward, ForwardModel};
pub use mask::{generate_mask, shifted_to_unshifted, unshifted_to_shifted, MaskConfig};
pub use patches::{assemble_adjoint, extract_patches, PatchScheme};
