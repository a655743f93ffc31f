use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{MultiEchoImage, PatchMatrix};

/// Square patch layout over an image: a regular grid of top-left anchors with
/// extra anchors flush to the bottom/right edges when the stride leaves pixels
/// uncovered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchScheme {
    patch_size: usize,
    stride: usize,
    height: usize,
    width: usize,
    anchors: Vec<(usize, usize)>,
}

fn axis_anchors(len: usize, patch: usize, stride: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..=len - patch).step_by(stride).collect();
    if *v.last().unwrap() + patch < len {
        v.push(len - patch);
    }
    v
}

impl PatchScheme {
    pub fn new(height: usize, width: usize, patch_size: usize, stride: usize) -> Result<Self> {
        if patch_size == 0 || stride == 0 {
            return Err(Error::invalid("patch size and stride must be >= 1"));
        }
        if patch_size > height.min(width) {
            return Err(Error::invalid(format!(
                "patch size {patch_size} exceeds image {height}x{width}"
            )));
        }
        let rows = axis_anchors(height, patch_size, stride);
        let cols = axis_anchors(width, patch_size, stride);
        let anchors = rows
            .iter()
            .flat_map(|&r| cols.iter().map(move |&c| (r, c)))
            .collect();
        Ok(Self {
            patch_size,
            stride,
            height,
            width,
            anchors,
        })
    }

    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    /// Pixels per patch.
    pub fn patch_len(&self) -> usize {
        self.patch_size * self.patch_size
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn anchors(&self) -> &[(usize, usize)] {
        &self.anchors
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    /// Number of patches covering each pixel (row-major plane); this is the
    /// diagonal of `Σ Pᵢᵀ Pᵢ`.
    pub fn coverage(&self) -> Vec<f64> {
        let mut cov = vec![0.0; self.height * self.width];
        let p = self.patch_size;
        for &(r0, c0) in &self.anchors {
            for r in r0..r0 + p {
                for v in &mut cov[r * self.width + c0..r * self.width + c0 + p] {
                    *v += 1.0;
                }
            }
        }
        cov
    }

    pub(crate) fn check_image(&self, x: &MultiEchoImage) -> Result<()> {
        if x.height() != self.height || x.width() != self.width {
            return Err(Error::shape(format!(
                "patch scheme for {}x{} applied to {}x{} image",
                self.height,
                self.width,
                x.height(),
                x.width()
            )));
        }
        Ok(())
    }

    /// Vectorized patch at location `i` of one echo plane.
    pub fn extract_plane(&self, plane: &[f64], i: usize) -> DVector<f64> {
        let (r0, c0) = self.anchors[i];
        let p = self.patch_size;
        let mut v = DVector::zeros(p * p);
        for dr in 0..p {
            let row = &plane[(r0 + dr) * self.width + c0..(r0 + dr) * self.width + c0 + p];
            for (dc, &val) in row.iter().enumerate() {
                v[dr * p + dc] = val;
            }
        }
        v
    }

    /// Adds a vectorized patch back into a plane at location `i`.
    pub fn accumulate_plane<'a>(
        &self,
        plane: &mut [f64],
        i: usize,
        patch: impl IntoIterator<Item = &'a f64>,
    ) {
        let (r0, c0) = self.anchors[i];
        let p = self.patch_size;
        for (k, &val) in patch.into_iter().enumerate() {
            let (dr, dc) = (k / p, k % p);
            plane[(r0 + dr) * self.width + c0 + dc] += val;
        }
    }

    /// MMV patch matrix at location `i`.
    pub fn extract_one(&self, x: &MultiEchoImage, i: usize) -> PatchMatrix {
        let n = self.patch_len();
        let mut values = DMatrix::zeros(n, x.echoes());
        for e in 0..x.echoes() {
            values.set_column(e, &self.extract_plane(x.echo(e), i));
        }
        PatchMatrix {
            location: i,
            values,
        }
    }
}

/// One [`PatchMatrix`] per anchor, columns ordered by echo.
pub fn extract_patches(x: &MultiEchoImage, scheme: &PatchScheme) -> Result<Vec<PatchMatrix>> {
    scheme.check_image(x)?;
    Ok((0..scheme.len())
        .map(|i| scheme.extract_one(x, i))
        .collect())
}

/// Transpose of [`extract_patches`]: sums every patch back at its anchor.
/// Overlaps accumulate; nothing is averaged.
pub fn assemble_adjoint(
    patches: &[PatchMatrix],
    scheme: &PatchScheme,
    height: usize,
    width: usize,
) -> Result<MultiEchoImage> {
    if height != scheme.height || width != scheme.width {
        return Err(Error::shape("assemble size differs from patch scheme"));
    }
    if patches.len() != scheme.len() {
        return Err(Error::shape(format!(
            "{} patches for a scheme with {} locations",
            patches.len(),
            scheme.len()
        )));
    }
    let echoes = patches.first().map(|p| p.values.ncols()).unwrap_or(0);
    if echoes == 0 {
        return Err(Error::invalid("patches have no echo columns"));
    }
    let mut out = MultiEchoImage::zeros(height, width, echoes);
    for (i, p) in patches.iter().enumerate() {
        if p.values.nrows() != scheme.patch_len() || p.values.ncols() != echoes {
            return Err(Error::shape(format!(
                "patch {i} is {}x{}, expected {}x{echoes}",
                p.values.nrows(),
                p.values.ncols(),
                scheme.patch_len()
            )));
        }
        for e in 0..echoes {
            scheme.accumulate_plane(out.echo_mut(e), i, p.values.column(e).iter());
        }
    }
    Ok(out)
}
