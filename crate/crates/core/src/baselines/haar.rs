use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};

fn check(height: usize, width: usize, len: usize, levels: usize) -> Result<()> {
    if len != height * width {
        return Err(Error::shape(format!(
            "plane has {len} values, expected {height}x{width}"
        )));
    }
    let block = 1usize.checked_shl(levels as u32).unwrap_or(0);
    if block == 0 || !height.is_multiple_of(block) || !width.is_multiple_of(block) {
        return Err(Error::invalid(format!(
            "{height}x{width} is not divisible by 2^{levels}"
        )));
    }
    Ok(())
}

/// One analysis step along a strided line of even length `n`.
fn analyze_line(data: &mut [f64], start: usize, step: usize, n: usize, buf: &mut [f64]) {
    let half = n / 2;
    for k in 0..half {
        let a = data[start + 2 * k * step];
        let b = data[start + (2 * k + 1) * step];
        buf[k] = (a + b) * FRAC_1_SQRT_2;
        buf[half + k] = (a - b) * FRAC_1_SQRT_2;
    }
    for k in 0..n {
        data[start + k * step] = buf[k];
    }
}

fn synthesize_line(data: &mut [f64], start: usize, step: usize, n: usize, buf: &mut [f64]) {
    let half = n / 2;
    for k in 0..half {
        let s = data[start + k * step];
        let d = data[start + (half + k) * step];
        buf[2 * k] = (s + d) * FRAC_1_SQRT_2;
        buf[2 * k + 1] = (s - d) * FRAC_1_SQRT_2;
    }
    for k in 0..n {
        data[start + k * step] = buf[k];
    }
}

/// Orthonormal multi-level 2D Haar analysis (Mallat layout: approximation in
/// the top-left corner). Row-major plane.
pub fn haar_dwt2(plane: &[f64], height: usize, width: usize, levels: usize) -> Result<Vec<f64>> {
    check(height, width, plane.len(), levels)?;
    let mut out = plane.to_vec();
    let mut buf = vec![0.0; height.max(width)];
    let (mut h, mut w) = (height, width);
    for _ in 0..levels {
        for r in 0..h {
            analyze_line(&mut out, r * width, 1, w, &mut buf);
        }
        for c in 0..w {
            analyze_line(&mut out, c, width, h, &mut buf);
        }
        h /= 2;
        w /= 2;
    }
    Ok(out)
}

/// Inverse of [`haar_dwt2`].
pub fn haar_idwt2(coeffs: &[f64], height: usize, width: usize, levels: usize) -> Result<Vec<f64>> {
    check(height, width, coeffs.len(), levels)?;
    let mut out = coeffs.to_vec();
    let mut buf = vec![0.0; height.max(width)];
    for l in (0..levels).rev() {
        let (h, w) = (height >> l, width >> l);
        for c in 0..w {
            synthesize_line(&mut out, c, width, h, &mut buf);
        }
        for r in 0..h {
            synthesize_line(&mut out, r * width, 1, w, &mut buf);
        }
    }
    Ok(out)
}

/// A fixed Haar basis for planes of one size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HaarBasis {
    pub height: usize,
    pub width: usize,
    pub levels: usize,
}

impl HaarBasis {
    pub fn new(height: usize, width: usize, levels: usize) -> Result<Self> {
        check(height, width, height * width, levels)?;
        Ok(Self {
            height,
            width,
            levels,
        })
    }

    pub fn forward(&self, plane: &[f64]) -> Vec<f64> {
        haar_dwt2(plane, self.height, self.width, self.levels).expect("checked at construction")
    }

    pub fn inverse(&self, coeffs: &[f64]) -> Vec<f64> {
        haar_idwt2(coeffs, self.height, self.width, self.levels).expect("checked at construction")
    }
}
