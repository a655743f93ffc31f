//! Shared domain types and norms.

use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A real-valued `height × width × echoes` stack of echo images.
///
/// Storage is echo-major, then row-major within each echo plane.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiEchoImage {
    height: usize,
    width: usize,
    echoes: usize,
    data: Vec<f64>,
}

impl MultiEchoImage {
    /// Wraps `data` laid out echo-major then row-major. Only the length is
    /// checked here; value-level invariants are reported by [`Validate`].
    pub fn new(height: usize, width: usize, echoes: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || echoes == 0 {
            return Err(Error::invalid(format!(
                "image dimensions must be positive, got {height}x{width}x{echoes}"
            )));
        }
        if data.len() != height * width * echoes {
            return Err(Error::shape(format!(
                "image data has {} values, expected {height}x{width}x{echoes} = {}",
                data.len(),
                height * width * echoes
            )));
        }
        Ok(Self {
            height,
            width,
            echoes,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, echoes: usize) -> Self {
        Self::new(height, width, echoes, vec![0.0; height * width * echoes])
            .expect("positive dimensions")
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        echoes: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * echoes);
        for e in 0..echoes {
            for r in 0..height {
                for c in 0..width {
                    data.push(f(r, c, e));
                }
            }
        }
        Self::new(height, width, echoes, data).expect("positive dimensions")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn echoes(&self) -> usize {
        self.echoes
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.echoes)
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn echo(&self, e: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[e * n..(e + 1) * n]
    }

    pub fn echo_mut(&mut self, e: usize) -> &mut [f64] {
        let n = self.plane_len();
        &mut self.data[e * n..(e + 1) * n]
    }

    pub fn echoes_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.plane_len())
    }

    /// Rebuilds an image from per-echo planes.
    pub fn from_planes(height: usize, width: usize, planes: Vec<Vec<f64>>) -> Result<Self> {
        let echoes = planes.len();
        let mut data = Vec::with_capacity(height * width * echoes);
        for (e, p) in planes.into_iter().enumerate() {
            if p.len() != height * width {
                return Err(Error::shape(format!(
                    "echo {e} plane has {} values, expected {}",
                    p.len(),
                    height * width
                )));
            }
            data.extend(p);
        }
        Self::new(height, width, echoes, data)
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize, echo: usize) -> usize {
        echo * self.height * self.width + row * self.width + col
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, echo: usize) -> f64 {
        self.data[self.index(row, col, echo)]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.shape() == other.shape()
    }

    pub(crate) fn check_same_shape(&self, other: &Self, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "{what}: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )))
        }
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Euclidean inner product over the whole stack.
    pub fn dot(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `self - other`, elementwise.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "image subtraction")?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Self::new(self.height, self.width, self.echoes, data)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= alpha);
        out
    }
}

/// Per-echo set of sampled k-space rows (the restriction operator).
///
/// Row indices are in unshifted FFT coordinates (DC at row 0).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingMask {
    height: usize,
    width: usize,
    echoes: usize,
    lines: Vec<Vec<usize>>,
}

impl SamplingMask {
    /// Builds a mask, sorting each echo's lines and rejecting duplicates or
    /// out-of-range rows.
    pub fn new(height: usize, width: usize, lines: Vec<Vec<usize>>) -> Result<Self> {
        let mut lines = lines;
        for l in &mut lines {
            l.sort_unstable();
        }
        let mask = Self::from_raw(height, width, lines);
        let violations = mask.validate();
        if violations.is_empty() {
            Ok(mask)
        } else {
            Err(Error::invalid(join_violations(&violations)))
        }
    }

    /// Builds a mask without checking it. Use [`Validate::validate`] to
    /// inspect the result.
    pub fn from_raw(height: usize, width: usize, lines: Vec<Vec<usize>>) -> Self {
        Self {
            height,
            width,
            echoes: lines.len(),
            lines,
        }
    }

    /// Every row sampled for every echo.
    pub fn full(height: usize, width: usize, echoes: usize) -> Self {
        Self::from_raw(height, width, vec![(0..height).collect(); echoes])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn echoes(&self) -> usize {
        self.echoes
    }

    pub fn lines(&self) -> &[Vec<usize>] {
        &self.lines
    }

    pub fn echo_lines(&self, echo: usize) -> &[usize] {
        &self.lines[echo]
    }

    /// Total number of sampled complex entries across all echoes.
    pub fn sample_count(&self) -> usize {
        self.lines.iter().map(|l| l.len() * self.width).sum()
    }

    /// Fraction of the full k-space that is sampled.
    pub fn sampling_ratio(&self) -> f64 {
        self.sample_count() as f64 / (self.height * self.width * self.echoes) as f64
    }

    /// Boolean `height × width` view of one echo, row-major.
    pub fn boolean_view(&self, echo: usize) -> Vec<bool> {
        let mut view = vec![false; self.height * self.width];
        for &r in &self.lines[echo] {
            if r < self.height {
                view[r * self.width..(r + 1) * self.width].fill(true);
            }
        }
        view
    }

    /// Row-selection vector for one echo: `true` where the row is sampled.
    pub fn row_selected(&self, echo: usize) -> Vec<bool> {
        let mut rows = vec![false; self.height];
        for &r in &self.lines[echo] {
            if r < self.height {
                rows[r] = true;
            }
        }
        rows
    }
}

/// Complex k-space samples on the rows selected by a [`SamplingMask`].
///
/// Samples are stored echo-major, then by ascending line, then by column.
#[derive(Debug, Clone, PartialEq)]
pub struct KSpaceData {
    mask: SamplingMask,
    samples: Vec<Complex64>,
}

impl KSpaceData {
    pub fn new(mask: SamplingMask, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != mask.sample_count() {
            return Err(Error::shape(format!(
                "k-space has {} samples, mask selects {}",
                samples.len(),
                mask.sample_count()
            )));
        }
        Ok(Self { mask, samples })
    }

    pub fn zeros(mask: SamplingMask) -> Self {
        let n = mask.sample_count();
        Self {
            mask,
            samples: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    pub fn height(&self) -> usize {
        self.mask.height
    }

    pub fn width(&self) -> usize {
        self.mask.width
    }

    pub fn echoes(&self) -> usize {
        self.mask.echoes
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    /// Offset of the first sample of `echo` in [`Self::samples`].
    pub fn echo_offset(&self, echo: usize) -> usize {
        self.mask.lines[..echo]
            .iter()
            .map(|l| l.len() * self.mask.width)
            .sum()
    }

    pub fn echo_samples(&self, echo: usize) -> &[Complex64] {
        let start = self.echo_offset(echo);
        let len = self.mask.lines[echo].len() * self.mask.width;
        &self.samples[start..start + len]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Real inner product `Re Σ a·conj(b)`.
    pub fn dot_re(&self, other: &Self) -> f64 {
        self.samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| (a * b.conj()).re)
            .sum()
    }

    /// `self - other` on identical masks.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.mask != other.mask {
            return Err(Error::shape("k-space subtraction with different masks"));
        }
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self {
            mask: self.mask.clone(),
            samples,
        })
    }
}

/// The multiple-measurement-vector matrix of one patch location: column `c`
/// is the vectorized (row-major) patch of echo `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchMatrix {
    pub location: usize,
    pub values: DMatrix<f64>,
}

/// Synthesis dictionary with unit-norm atoms as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: DMatrix<f64>,
}

impl Dictionary {
    pub fn new(atoms: DMatrix<f64>) -> Self {
        Self { atoms }
    }

    pub fn atoms(&self) -> &DMatrix<f64> {
        &self.atoms
    }

    pub fn into_atoms(self) -> DMatrix<f64> {
        self.atoms
    }

    pub fn signal_dim(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.ncols()
    }
}

/// Square analysis transform; the learning objective requires `det > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transform {
    matrix: DMatrix<f64>,
}

impl Transform {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::shape(format!(
                "transform must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { matrix })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            matrix: DMatrix::identity(n, n),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `log det T`, defined only for a positive determinant.
    pub fn log_det(&self) -> Result<f64> {
        let lu = self.matrix.clone().lu();
        let det = lu.determinant();
        if !(det > 0.0) || !det.is_finite() {
            // The determinant itself can underflow for large n; fall back to
            // summing log|u_ii| with the permutation sign.
            let u = lu.u();
            let mut sign = lu.p().determinant::<f64>();
            let mut log_abs = 0.0;
            for i in 0..u.nrows() {
                let d = u[(i, i)];
                if d == 0.0 {
                    return Err(Error::Domain("transform is singular".into()));
                }
                if d < 0.0 {
                    sign = -sign;
                }
                log_abs += d.abs().ln();
            }
            if sign > 0.0 {
                return Ok(log_abs);
            }
            return Err(Error::Domain(
                "transform determinant is not positive; -log det is undefined".into(),
            ));
        }
        Ok(det.ln())
    }
}

/// Order of the three sub-problem updates within one outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlternationOrder {
    /// coefficients, basis, image
    #[default]
    CoefsFirst,
    /// image, coefficients, basis
    ImageFirst,
}

/// Parameters shared by all reconstruction engines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconParams {
    /// Weight of the learning term against data consistency.
    pub mu: f64,
    /// Sparsity weight.
    pub lambda: f64,
    /// Transform regularizer weight (transform engine only).
    pub gamma: f64,
    pub patch_size: usize,
    pub patch_stride: usize,
    pub max_outer_iters: usize,
    pub rel_cost_tol: f64,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
    /// Inner proximal-gradient iterations per coefficient update.
    pub inner_iters: usize,
    /// Haar decomposition depth for the fixed-basis baseline.
    pub wavelet_levels: usize,
    /// Iteration cap for the fixed-basis baseline.
    pub cs_max_iters: usize,
    pub order: AlternationOrder,
    /// Disable rayon; every result is identical either way, this only pins
    /// execution to the calling thread.
    pub sequential: bool,
    pub seed: u64,
}

impl Default for ReconParams {
    fn default() -> Self {
        Self {
            mu: 1.0,
            lambda: 0.1,
            gamma: 1.0,
            patch_size: 8,
            patch_stride: 4,
            max_outer_iters: 50,
            rel_cost_tol: 1e-4,
            cg_tol: 1e-6,
            cg_max_iters: 100,
            inner_iters: 20,
            wavelet_levels: 3,
            cs_max_iters: 200,
            order: AlternationOrder::CoefsFirst,
            sequential: false,
            seed: 0,
        }
    }
}

impl ReconParams {
    /// Parameter violations for an image of the given size.
    pub fn validate_for(&self, height: usize, width: usize) -> Vec<Violation> {
        let mut v = Vec::new();
        for (name, val) in [
            ("mu", self.mu),
            ("lambda", self.lambda),
            ("gamma", self.gamma),
        ] {
            if !(val >= 0.0) || !val.is_finite() {
                v.push(Violation::new(
                    name,
                    format!("must be finite and >= 0, got {val}"),
                ));
            }
        }
        if self.patch_size == 0 || self.patch_size > height.min(width) {
            v.push(Violation::new(
                "patch_size",
                format!(
                    "must be in [1, {}], got {}",
                    height.min(width),
                    self.patch_size
                ),
            ));
        }
        if self.patch_stride == 0 {
            v.push(Violation::new("patch_stride", "must be >= 1"));
        }
        if self.max_outer_iters == 0 {
            v.push(Violation::new("max_outer_iters", "must be >= 1"));
        }
        if !(self.rel_cost_tol > 0.0) {
            v.push(Violation::new("rel_cost_tol", "must be > 0"));
        }
        if !(self.cg_tol > 0.0) {
            v.push(Violation::new("cg_tol", "must be > 0"));
        }
        if self.cg_max_iters == 0 {
            v.push(Violation::new("cg_max_iters", "must be >= 1"));
        }
        v
    }

    pub(crate) fn check_for(&self, height: usize, width: usize) -> Result<()> {
        let v = self.validate_for(height, width);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(join_violations(&v)))
        }
    }
}

/// One violated invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

pub(crate) fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Invariant checking without side effects; an empty list means valid.
pub trait Validate {
    fn validate(&self) -> Vec<Violation>;

    fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }
}

impl Validate for MultiEchoImage {
    fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if self.data.len() != self.height * self.width * self.echoes {
            v.push(Violation::new("data", "length does not match dimensions"));
        }
        if let Some(i) = self.data.iter().position(|x| !x.is_finite()) {
            let n = self.plane_len();
            v.push(Violation::new(
                "data",
                format!(
                    "non-finite value at index {i} (echo {}, row {}, col {})",
                    i / n,
                    (i % n) / self.width,
                    i % self.width
                ),
            ));
        }
        v
    }
}

impl Validate for SamplingMask {
    fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if self.height == 0 || self.width == 0 || self.echoes == 0 {
            v.push(Violation::new("dimensions", "must be positive"));
        }
        if self.lines.len() != self.echoes {
            v.push(Violation::new("lines", "one line set per echo required"));
        }
        let expected = self.lines.first().map(Vec::len);
        for (e, l) in self.lines.iter().enumerate() {
            if l.is_empty() {
                v.push(Violation::new("lines", format!("echo {e} has no lines")));
            }
            if Some(l.len()) != expected {
                v.push(Violation::new(
                    "lines",
                    format!(
                        "echo {e} has {} lines, echo 0 has {}",
                        l.len(),
                        expected.unwrap_or(0)
                    ),
                ));
            }
            if let Some(&r) = l.iter().find(|&&r| r >= self.height) {
                v.push(Violation::new(
                    "lines",
                    format!("echo {e} row {r} outside [0, {})", self.height),
                ));
            }
            if l.windows(2).any(|w| w[0] == w[1]) {
                v.push(Violation::new(
                    "lines",
                    format!("echo {e} has a duplicated line"),
                ));
            } else if l.windows(2).any(|w| w[0] > w[1]) {
                v.push(Violation::new(
                    "lines",
                    format!("echo {e} lines are not sorted"),
                ));
            }
        }
        v
    }
}

impl Validate for KSpaceData {
    fn validate(&self) -> Vec<Violation> {
        let mut v = self.mask.validate();
        if self.samples.len() != self.mask.sample_count() {
            v.push(Violation::new(
                "samples",
                "count does not match the mask's sampled positions",
            ));
        }
        if let Some(i) = self
            .samples
            .iter()
            .position(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            v.push(Violation::new(
                "samples",
                format!("non-finite value at index {i}"),
            ));
        }
        v
    }
}

impl Validate for Dictionary {
    fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if self.atoms.iter().any(|x| !x.is_finite()) {
            v.push(Violation::new("atoms", "non-finite entry"));
        }
        for (j, col) in self.atoms.column_iter().enumerate() {
            let n = col.norm();
            if (n - 1.0).abs() > 1e-8 {
                v.push(Violation::new("atoms", format!("atom {j} has norm {n}")));
            }
        }
        v
    }
}

impl Validate for Transform {
    fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if self.matrix.iter().any(|x| !x.is_finite()) {
            v.push(Violation::new("matrix", "non-finite entry"));
            return v;
        }
        if self.log_det().is_err() {
            v.push(Violation::new("matrix", "determinant is not positive"));
        }
        let smin = self
            .matrix
            .clone()
            .singular_values()
            .iter()
            .fold(f64::INFINITY, |m, &s| m.min(s));
        if !(smin > 0.0) {
            v.push(Violation::new("matrix", "smallest singular value is zero"));
        }
        v
    }
}

/// Sum of the Euclidean norms of the rows of `m`.
pub fn l21_norm(m: &DMatrix<f64>) -> Result<f64> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(
            "l21_norm of a matrix with non-finite entries",
        ));
    }
    Ok(m.row_iter().map(|r| r.norm()).sum())
}
