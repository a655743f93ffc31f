use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Planned unitary 2D FFT for one plane size. Row-major planes, DC at index 0.
#[derive(Clone)]
pub struct Fft2 {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2")
            .field("height", &self.height)
            .field("width", &self.width)
            .finish()
    }
}

impl Fft2 {
    pub fn new(height: usize, width: usize) -> Self {
        assert!(height > 0 && width > 0, "FFT plane must be non-empty");
        let mut planner = FftPlanner::new();
        Self {
            height,
            width,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
            scale: 1.0 / ((height * width) as f64).sqrt(),
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// In-place unitary forward transform.
    pub fn forward(&self, plane: &mut [Complex64]) {
        self.run(plane, &self.row_fwd, &self.col_fwd);
    }

    /// In-place unitary inverse transform.
    pub fn inverse(&self, plane: &mut [Complex64]) {
        self.run(plane, &self.row_inv, &self.col_inv);
    }

    fn run(&self, plane: &mut [Complex64], rows: &Arc<dyn Fft<f64>>, cols: &Arc<dyn Fft<f64>>) {
        let (h, w) = (self.height, self.width);
        assert_eq!(plane.len(), h * w, "plane size does not match plan");
        rows.process(plane);
        let mut t = vec![Complex64::new(0.0, 0.0); h * w];
        for r in 0..h {
            for c in 0..w {
                t[c * h + r] = plane[r * w + c];
            }
        }
        cols.process(&mut t);
        for c in 0..w {
            for r in 0..h {
                plane[r * w + c] = t[c * h + r] * self.scale;
            }
        }
    }
}

fn check(plane_len: usize, height: usize, width: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::invalid("FFT plane dimensions must be >= 1"));
    }
    if plane_len != height * width {
        return Err(Error::shape(format!(
            "plane has {plane_len} values, expected {height}x{width}"
        )));
    }
    Ok(())
}

fn check_finite(plane: &[Complex64]) -> Result<()> {
    if plane.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::invalid("FFT input contains non-finite values"));
    }
    Ok(())
}

/// Unitary 2D DFT of a complex row-major plane.
pub fn fft2_unitary(plane: &[Complex64], height: usize, width: usize) -> Result<Vec<Complex64>> {
    check(plane.len(), height, width)?;
    check_finite(plane)?;
    let mut out = plane.to_vec();
    Fft2::new(height, width).forward(&mut out);
    Ok(out)
}

/// Unitary 2D DFT of a real row-major plane.
pub fn fft2_unitary_real(plane: &[f64], height: usize, width: usize) -> Result<Vec<Complex64>> {
    let z: Vec<Complex64> = plane.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2_unitary(&z, height, width)
}

/// Inverse of [`fft2_unitary`].
pub fn ifft2_unitary(plane: &[Complex64], height: usize, width: usize) -> Result<Vec<Complex64>> {
    check(plane.len(), height, width)?;
    check_finite(plane)?;
    let mut out = plane.to_vec();
    Fft2::new(height, width).inverse(&mut out);
    Ok(out)
}
