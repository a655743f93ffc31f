use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SamplingMask;

/// Line-sampling pattern: a dense block around the k-space center plus
/// uniformly random lines elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaskConfig {
    pub height: usize,
    pub width: usize,
    pub echoes: usize,
    pub lines_per_echo: usize,
    /// Fraction of the lines spent on the contiguous center block.
    pub dense_fraction: f64,
    /// Draw the random lines independently for every echo.
    pub per_echo_distinct: bool,
    pub seed: u64,
}

impl Default for MaskConfig {
    fn default() -> Self {
        Self {
            height: 64,
            width: 64,
            echoes: 8,
            lines_per_echo: 16,
            dense_fraction: 1.0 / 3.0,
            per_echo_distinct: true,
            seed: 0,
        }
    }
}

/// fftshift row index → unshifted FFT row index.
pub fn shifted_to_unshifted(row: usize, height: usize) -> usize {
    (row + height - height / 2) % height
}

/// Unshifted FFT row index → fftshift row index.
pub fn unshifted_to_shifted(row: usize, height: usize) -> usize {
    (row + height / 2) % height
}

/// Builds a deterministic line mask from `config`.
pub fn generate_mask(config: &MaskConfig) -> Result<SamplingMask> {
    let MaskConfig {
        height,
        width,
        echoes,
        lines_per_echo,
        dense_fraction,
        per_echo_distinct,
        seed,
    } = *config;
    if height == 0 || width == 0 || echoes == 0 {
        return Err(Error::invalid("mask dimensions must be positive"));
    }
    if lines_per_echo == 0 || lines_per_echo > height {
        return Err(Error::invalid(format!(
            "lines_per_echo must be in [1, {height}], got {lines_per_echo}"
        )));
    }
    if !(0.0..=1.0).contains(&dense_fraction) {
        return Err(Error::invalid(format!(
            "dense_fraction must be in [0, 1], got {dense_fraction}"
        )));
    }

    let dense = ((dense_fraction * lines_per_echo as f64) + 1e-12).floor() as usize;
    let dense = dense.min(lines_per_echo);
    let start = height / 2 - dense / 2;
    let center: Vec<usize> = (start..start + dense)
        .map(|s| shifted_to_unshifted(s, height))
        .collect();
    let mut in_center = vec![false; height];
    for &r in &center {
        in_center[r] = true;
    }
    let remaining: Vec<usize> = (0..height).filter(|&r| !in_center[r]).collect();
    let random = lines_per_echo - dense;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> Vec<usize> {
        let mut lines = center.clone();
        lines.extend(
            rand::seq::index::sample(&mut rng, remaining.len(), random)
                .into_iter()
                .map(|i| remaining[i]),
        );
        lines.sort_unstable();
        lines
    };

    let lines = if per_echo_distinct {
        (0..echoes).map(|_| draw()).collect()
    } else {
        vec![draw(); echoes]
    };
    SamplingMask::new(height, width, lines)
}
