//! Synthetic multi-echo phantom and acquisition simulation.
//!
//! Each region is an ellipse with a proton density and a T2; echo `c`
//! (1-based) has intensity `ρ · exp(-c · ΔTE / T2)`, the CPMG decay model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{KSpaceData, MultiEchoImage, SamplingMask};
use crate::operators::apply_forward;

/// Ellipse in normalized coordinates: the image spans `[-1, 1]` on both axes,
/// `x` to the right and `y` downward. `angle_deg` rotates counter-clockwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: (f64, f64),
    pub axes: (f64, f64),
    pub angle_deg: f64,
}

impl Ellipse {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.angle_deg.to_radians().sin_cos();
        let dx = x - self.center.0;
        let dy = y - self.center.1;
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.axes.0).powi(2) + (v / self.axes.1).powi(2) <= 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub ellipse: Ellipse,
    pub proton_density: f64,
    /// Transverse relaxation time in ms.
    pub t2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhantomSpec {
    pub height: usize,
    pub width: usize,
    pub echoes: usize,
    /// Echo spacing in ms.
    pub delta_te: f64,
    /// Painted in order; later regions overwrite earlier ones.
    pub regions: Vec<Region>,
}

fn region(cx: f64, cy: f64, a: f64, b: f64, angle: f64, rho: f64, t2: f64) -> Region {
    Region {
        ellipse: Ellipse {
            center: (cx, cy),
            axes: (a, b),
            angle_deg: angle,
        },
        proton_density: rho,
        t2,
    }
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            height: 64,
            width: 64,
            echoes: 8,
            delta_te: 6.738,
            regions: vec![
                region(0.0, 0.0, 0.85, 0.92, 0.0, 0.6, 60.0),
                region(-0.3, -0.1, 0.3, 0.5, 18.0, 0.9, 120.0),
                region(0.35, 0.15, 0.25, 0.4, -15.0, 1.0, 200.0),
                region(0.05, -0.55, 0.18, 0.14, 0.0, 0.7, 90.0),
                region(-0.05, 0.55, 0.22, 0.12, 30.0, 0.4, 30.0),
            ],
        }
    }
}

impl PhantomSpec {
    pub fn check(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || self.echoes == 0 {
            return Err(Error::invalid("phantom dimensions must be positive"));
        }
        if !(self.delta_te > 0.0) || !self.delta_te.is_finite() {
            return Err(Error::invalid("delta_te must be positive"));
        }
        for (i, r) in self.regions.iter().enumerate() {
            if !(r.t2 > 0.0) || !r.t2.is_finite() {
                return Err(Error::invalid(format!("region {i}: t2 must be > 0")));
            }
            if !(r.proton_density >= 0.0) || !r.proton_density.is_finite() {
                return Err(Error::invalid(format!(
                    "region {i}: proton density must be >= 0"
                )));
            }
            if !(r.ellipse.axes.0 > 0.0 && r.ellipse.axes.1 > 0.0) {
                return Err(Error::invalid(format!("region {i}: axes must be > 0")));
            }
        }
        Ok(())
    }
}

/// Renders the ground-truth echo stack.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<MultiEchoImage> {
    spec.check()?;
    let (h, w) = (spec.height, spec.width);
    // topmost region index per pixel
    let mut owner: Vec<Option<usize>> = vec![None; h * w];
    for r in 0..h {
        let y = (r as f64 + 0.5) / h as f64 * 2.0 - 1.0;
        for c in 0..w {
            let x = (c as f64 + 0.5) / w as f64 * 2.0 - 1.0;
            owner[r * w + c] = spec
                .regions
                .iter()
                .rposition(|reg| reg.ellipse.contains(x, y));
        }
    }
    Ok(MultiEchoImage::from_fn(h, w, spec.echoes, |r, c, e| {
        owner[r * w + c].map_or(0.0, |k| {
            let reg = &spec.regions[k];
            reg.proton_density * (-((e + 1) as f64) * spec.delta_te / reg.t2).exp()
        })
    }))
}

/// `A x + η` with independent `N(0, σ²)` real and imaginary noise on every
/// sampled entry.
pub fn simulate_acquisition(
    truth: &MultiEchoImage,
    mask: &SamplingMask,
    noise_sigma: f64,
    seed: u64,
) -> Result<KSpaceData> {
    if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
        return Err(Error::invalid(format!(
            "noise sigma must be >= 0, got {noise_sigma}"
        )));
    }
    let mut y = apply_forward(truth, mask)?;
    if noise_sigma > 0.0 {
        let normal = Normal::new(0.0, noise_sigma).expect("valid sigma");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for z in y.samples_mut() {
            *z += Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
        }
    }
    Ok(y)
}
