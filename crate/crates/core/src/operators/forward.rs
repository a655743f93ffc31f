use rustfft::num_complex::Complex64;

use super::fft::Fft2;
use crate::error::{Error, Result};
use crate::exec::map_indexed;
use crate::model::{KSpaceData, MultiEchoImage, SamplingMask};

/// Per-echo line-restricted unitary Fourier sampling of a real image stack.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    mask: SamplingMask,
    fft: Fft2,
    sequential: bool,
}

impl ForwardModel {
    pub fn new(mask: SamplingMask) -> Self {
        let fft = Fft2::new(mask.height(), mask.width());
        Self {
            mask,
            fft,
            sequential: false,
        }
    }

    pub fn sequential(mut self, sequential: bool) -> Self {
        self.sequential = sequential;
        self
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    pub fn height(&self) -> usize {
        self.mask.height()
    }

    pub fn width(&self) -> usize {
        self.mask.width()
    }

    pub fn echoes(&self) -> usize {
        self.mask.echoes()
    }

    fn check_image(&self, x: &MultiEchoImage) -> Result<()> {
        if x.shape() != (self.height(), self.width(), self.echoes()) {
            return Err(Error::shape(format!(
                "image {:?} does not match mask {}x{}x{}",
                x.shape(),
                self.height(),
                self.width(),
                self.echoes()
            )));
        }
        Ok(())
    }

    fn check_kspace(&self, y: &KSpaceData) -> Result<()> {
        if y.mask() != &self.mask {
            return Err(Error::shape("k-space mask differs from the model's mask"));
        }
        Ok(())
    }

    /// Sampled unitary spectrum of one echo plane.
    pub fn forward_echo(&self, echo: usize, plane: &[f64]) -> Vec<Complex64> {
        let w = self.width();
        let mut spec: Vec<Complex64> = plane.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.forward(&mut spec);
        let lines = self.mask.echo_lines(echo);
        let mut out = Vec::with_capacity(lines.len() * w);
        for &r in lines {
            out.extend_from_slice(&spec[r * w..(r + 1) * w]);
        }
        out
    }

    /// Real part of the zero-filled inverse transform of one echo's samples.
    pub fn adjoint_echo(&self, echo: usize, samples: &[Complex64]) -> Vec<f64> {
        let (h, w) = (self.height(), self.width());
        let mut spec = vec![Complex64::new(0.0, 0.0); h * w];
        for (k, &r) in self.mask.echo_lines(echo).iter().enumerate() {
            spec[r * w..(r + 1) * w].copy_from_slice(&samples[k * w..(k + 1) * w]);
        }
        self.fft.inverse(&mut spec);
        spec.into_iter().map(|z| z.re).collect()
    }

    /// `Aᵀ A` applied to one real echo plane.
    pub fn normal_echo(&self, echo: usize, plane: &[f64]) -> Vec<f64> {
        let w = self.width();
        let mut spec: Vec<Complex64> = plane.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.forward(&mut spec);
        let selected = self.mask.row_selected(echo);
        for (r, keep) in selected.into_iter().enumerate() {
            if !keep {
                spec[r * w..(r + 1) * w].fill(Complex64::new(0.0, 0.0));
            }
        }
        self.fft.inverse(&mut spec);
        spec.into_iter().map(|z| z.re).collect()
    }

    pub fn forward(&self, x: &MultiEchoImage) -> Result<KSpaceData> {
        self.check_image(x)?;
        let parts = map_indexed(self.echoes(), self.sequential, |e| {
            self.forward_echo(e, x.echo(e))
        });
        KSpaceData::new(self.mask.clone(), parts.concat())
    }

    pub fn adjoint(&self, y: &KSpaceData) -> Result<MultiEchoImage> {
        self.check_kspace(y)?;
        let planes = map_indexed(self.echoes(), self.sequential, |e| {
            self.adjoint_echo(e, y.echo_samples(e))
        });
        MultiEchoImage::from_planes(self.height(), self.width(), planes)
    }

    /// `Aᵀ A x` for the whole stack.
    pub fn normal(&self, x: &MultiEchoImage) -> Result<MultiEchoImage> {
        self.check_image(x)?;
        let planes = map_indexed(self.echoes(), self.sequential, |e| {
            self.normal_echo(e, x.echo(e))
        });
        MultiEchoImage::from_planes(self.height(), self.width(), planes)
    }

    /// `||y - A x||²`.
    pub fn residual_sqr(&self, x: &MultiEchoImage, y: &KSpaceData) -> Result<f64> {
        self.check_kspace(y)?;
        Ok(self.forward(x)?.sub(y)?.norm_sqr())
    }
}

fn check_finite_image(x: &MultiEchoImage) -> Result<()> {
    if x.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("image contains non-finite values"));
    }
    Ok(())
}

/// Samples the unitary spectrum of every echo on its mask lines.
pub fn apply_forward(x: &MultiEchoImage, mask: &SamplingMask) -> Result<KSpaceData> {
    check_finite_image(x)?;
    ForwardModel::new(mask.clone()).forward(x)
}

/// Exact adjoint of [`apply_forward`] under the real inner product
/// `Re Σ a·conj(b)`: zero-fill, inverse transform, keep the real part.
pub fn apply_adjoint(y: &KSpaceData) -> Result<MultiEchoImage> {
    ForwardModel::new(y.mask().clone()).adjoint(y)
}
