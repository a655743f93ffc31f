//! Plumbing shared by the patch-based engines: the forward model, the patch
//! layout and the matrix-free image update.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::exec::try_map_indexed;
use crate::model::{KSpaceData, MultiEchoImage, PatchMatrix, ReconParams};
use crate::operators::{extract_patches, ForwardModel, PatchScheme};
use crate::solvers::{conjugate_gradient, FnOperator};

pub(crate) struct Setup {
    pub model: ForwardModel,
    pub scheme: PatchScheme,
    pub sequential: bool,
}

impl Setup {
    pub fn new(y: &KSpaceData, params: &ReconParams) -> Result<Self> {
        params.check_for(y.height(), y.width())?;
        let scheme = PatchScheme::new(
            y.height(),
            y.width(),
            params.patch_size,
            params.patch_stride,
        )?;
        Ok(Self {
            model: ForwardModel::new(y.mask().clone()).sequential(params.sequential),
            scheme,
            sequential: params.sequential,
        })
    }

    pub fn patches(&self, x: &MultiEchoImage) -> Result<Vec<PatchMatrix>> {
        extract_patches(x, &self.scheme)
    }

    pub fn data_term(&self, x: &MultiEchoImage, y: &KSpaceData) -> Result<f64> {
        self.model.residual_sqr(x, y)
    }

    /// Solves `(AᵀA + R_e) x_e = Aᵀy_e + extra_e` for every echo by CG,
    /// warm-started at `warm`. `reg` adds `R_e v` into its output buffer.
    pub fn solve_image<R>(
        &self,
        y: &KSpaceData,
        warm: &MultiEchoImage,
        extra: &MultiEchoImage,
        params: &ReconParams,
        reg: R,
    ) -> Result<MultiEchoImage>
    where
        R: Fn(usize, &[f64], &mut [f64]) + Sync + Send,
    {
        let n = warm.plane_len();
        let planes = try_map_indexed(warm.echoes(), self.sequential, |e| {
            let mut rhs = self.model.adjoint_echo(e, y.echo_samples(e));
            for (r, v) in rhs.iter_mut().zip(extra.echo(e)) {
                *r += v;
            }
            let op = FnOperator::new(n, |v: &[f64], out: &mut [f64]| {
                let a = self.model.normal_echo(e, v);
                out.copy_from_slice(&a);
                reg(e, v, out);
            });
            conjugate_gradient(&op, &rhs, warm.echo(e), params.cg_tol, params.cg_max_iters)
                .map(|o| o.x)
        })?;
        MultiEchoImage::from_planes(warm.height(), warm.width(), planes)
    }
}

/// `[X_1 | … | X_N]`, the patch matrices side by side.
pub(crate) fn concat_patches(patches: &[PatchMatrix]) -> DMatrix<f64> {
    let rows = patches.first().map_or(0, |p| p.values.nrows());
    let cols: usize = patches.iter().map(|p| p.values.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut c0 = 0;
    for p in patches {
        let k = p.values.ncols();
        out.columns_mut(c0, k).copy_from(&p.values);
        c0 += k;
    }
    out
}

/// Flips each column so that its largest-magnitude entry is positive.
pub(crate) fn fix_column_signs(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let mut best = 0.0f64;
        for &v in col.iter() {
            if v.abs() > best.abs() {
                best = v;
            }
        }
        if best < 0.0 {
            col.neg_mut();
        }
    }
}

/// Left singular vectors of `m` as columns, ordered by decreasing singular
/// value, completed to a full orthonormal basis of the row space dimension.
pub(crate) fn left_singular_basis(m: &DMatrix<f64>) -> DMatrix<f64> {
    let gram = m * m.transpose();
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let n = m.nrows();
    let mut u = DMatrix::zeros(n, n);
    for (j, &k) in order.iter().enumerate() {
        u.set_column(j, &eig.eigenvectors.column(k));
    }
    fix_column_signs(&mut u);
    u
}

pub(crate) fn relative_change(prev: f64, cur: f64) -> f64 {
    (prev - cur).abs() / prev.abs().max(f64::MIN_POSITIVE)
}
