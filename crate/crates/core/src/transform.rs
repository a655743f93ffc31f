//! Row-sparse transform-learning reconstruction.
//!
//! Minimizes
//!
//! ```text
//! ||y - A x||² + μ ( Σ_i ||T X_i - Z_i||_F² + λ ||Z_i||_{2,1} ) + μγ (||T||_F² - log det T)
//! ```
//!
//! The transform regularizer is counted once, not once per patch. Every
//! sub-problem has an exact solution: the coefficients are a row-wise
//! shrinkage of `T X_i`, the transform has a closed form, and the image update
//! is a linear system solved by CG.

use nalgebra::{DMatrix, DVector};

use crate::engine::{concat_patches, left_singular_basis, relative_change, Setup};
use crate::error::{Error, Result};
use crate::exec::map_indexed;
use crate::model::{
    l21_norm, AlternationOrder, KSpaceData, MultiEchoImage, PatchMatrix, ReconParams, Transform,
};
use crate::operators::{assemble_adjoint, extract_patches, PatchScheme};
use crate::solvers::row_soft_threshold;

/// Iterates of the transform-learning engine.
#[derive(Debug, Clone)]
pub struct TlState {
    pub image: MultiEchoImage,
    pub transform: Transform,
    pub coefs: Vec<DMatrix<f64>>,
    /// Objective at initialization followed by one value per outer iteration.
    pub cost_history: Vec<f64>,
}

impl TlState {
    pub fn zero_row_fraction(&self) -> f64 {
        crate::dict::zero_row_fraction(&self.coefs)
    }

    pub fn iterations(&self) -> usize {
        self.cost_history.len().saturating_sub(1)
    }
}

/// `||T||_F² - log det T`.
pub fn transform_regularizer(t: &Transform) -> Result<f64> {
    Ok(t.matrix().norm_squared() - t.log_det()?)
}

/// `Σ_i ||T X_i - Z_i||_F² + γ (||T||_F² - log det T)`, the objective of the
/// transform update.
pub fn transform_objective(
    patches: &[PatchMatrix],
    coefs: &[DMatrix<f64>],
    t: &Transform,
    gamma: f64,
) -> Result<f64> {
    Ok(sparsification_error(patches, coefs, t) + gamma * transform_regularizer(t)?)
}

/// `Σ_i ||T X_i - Z_i||_F²`.
pub fn sparsification_error(patches: &[PatchMatrix], coefs: &[DMatrix<f64>], t: &Transform) -> f64 {
    patches
        .iter()
        .zip(coefs)
        .map(|(p, z)| (t.matrix() * &p.values - z).norm_squared())
        .sum()
}

fn check_coefs(
    scheme: &PatchScheme,
    t: &Transform,
    coefs: &[DMatrix<f64>],
    echoes: usize,
) -> Result<()> {
    if t.dim() != scheme.patch_len() {
        return Err(Error::shape(format!(
            "transform is {}x{}, patches have {} pixels",
            t.dim(),
            t.dim(),
            scheme.patch_len()
        )));
    }
    if coefs.len() != scheme.len() {
        return Err(Error::shape(format!(
            "{} coefficient matrices for {} patch locations",
            coefs.len(),
            scheme.len()
        )));
    }
    if coefs
        .iter()
        .any(|z| z.nrows() != t.dim() || z.ncols() != echoes)
    {
        return Err(Error::shape(
            "coefficient matrix shape does not match transform",
        ));
    }
    Ok(())
}

fn objective_with(
    setup: &Setup,
    state: &TlState,
    y: &KSpaceData,
    params: &ReconParams,
) -> Result<f64> {
    check_coefs(
        &setup.scheme,
        &state.transform,
        &state.coefs,
        state.image.echoes(),
    )?;
    let reg = transform_regularizer(&state.transform)?;
    let patches = setup.patches(&state.image)?;
    let fit = sparsification_error(&patches, &state.coefs, &state.transform);
    let sparsity: f64 = state.coefs.iter().map(l21_norm).sum::<Result<f64>>()?;
    let data = setup.data_term(&state.image, y)?;
    Ok(data + params.mu * (fit + params.lambda * sparsity + params.gamma * reg))
}

/// The full transform-learning objective; a domain error if `det T <= 0`.
pub fn objective_tl(state: &TlState, y: &KSpaceData, params: &ReconParams) -> Result<f64> {
    let setup = Setup::new(y, params)?;
    objective_with(&setup, state, y, params)
}

/// Transform initialized to the transposed left singular vectors of all patch
/// matrices of `x0`. The last row is negated if needed so that `det T = +1`.
pub fn init_transform_svd(x0: &MultiEchoImage, scheme: &PatchScheme) -> Result<Transform> {
    let patches = extract_patches(x0, scheme)?;
    let all = concat_patches(&patches);
    if all.iter().all(|&v| v == 0.0) {
        return Err(Error::invalid(
            "cannot initialize a transform from all-zero patches",
        ));
    }
    let mut t = left_singular_basis(&all).transpose();
    if t.clone().lu().determinant() < 0.0 {
        let last = t.nrows() - 1;
        t.row_mut(last).neg_mut();
    }
    Transform::new(t)
}

/// Image update: solves
/// `(AᵀA + μ Σ PᵢᵀTᵀT Pᵢ) x = Aᵀy + μ Σ PᵢᵀTᵀZ_i` by CG from `warm`.
pub fn update_image_s1(
    y: &KSpaceData,
    transform: &Transform,
    coefs: &[DMatrix<f64>],
    params: &ReconParams,
    warm: &MultiEchoImage,
) -> Result<MultiEchoImage> {
    let setup = Setup::new(y, params)?;
    s1_with(&setup, y, transform, coefs, params, warm)
}

fn s1_with(
    setup: &Setup,
    y: &KSpaceData,
    transform: &Transform,
    coefs: &[DMatrix<f64>],
    params: &ReconParams,
    warm: &MultiEchoImage,
) -> Result<MultiEchoImage> {
    let scheme = &setup.scheme;
    check_coefs(scheme, transform, coefs, warm.echoes())?;
    let mu = params.mu;
    let t = transform.matrix();
    let back: Vec<PatchMatrix> = coefs
        .iter()
        .enumerate()
        .map(|(i, z)| PatchMatrix {
            location: i,
            values: t.transpose() * z * mu,
        })
        .collect();
    let extra = assemble_adjoint(&back, scheme, warm.height(), warm.width())?;
    let gram = t.transpose() * t * mu;
    let n = scheme.patch_len();
    setup.solve_image(y, warm, &extra, params, |_, v, out| {
        let mut cols = DMatrix::zeros(n, scheme.len());
        for i in 0..scheme.len() {
            cols.set_column(i, &scheme.extract_plane(v, i));
        }
        let mapped = &gram * cols;
        for i in 0..scheme.len() {
            scheme.accumulate_plane(out, i, mapped.column(i).iter());
        }
    })
}

/// Closed-form transform update for
/// `min_T Σ_i ||T X_i - Z_i||_F² + γ (||T||_F² - log det T)` over `det T > 0`.
///
/// With `X X_ᵀ + γI = L Lᵀ` (symmetric square root) and the SVD
/// `L⁻¹ X Zᵀ = Q Σ Rᵀ`, the minimizer is `T = R B Qᵀ L⁻¹` where `B` is
/// diagonal with `b_k = (σ_k + sqrt(σ_k² + 2γ)) / 2`. When `det(Q Rᵀ) < 0`
/// the entry for the smallest `σ_k` takes the negative root
/// `(σ_k - sqrt(σ_k² + 2γ)) / 2` instead, which keeps `det T > 0`.
pub fn update_transform_s2(
    patches: &[PatchMatrix],
    coefs: &[DMatrix<f64>],
    gamma: f64,
) -> Result<Transform> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::invalid(format!(
            "transform update needs gamma > 0, got {gamma}"
        )));
    }
    if patches.len() != coefs.len() || patches.is_empty() {
        return Err(Error::shape("patch and coefficient counts differ"));
    }
    let x = concat_patches(patches);
    let z = concat_patches(
        &coefs
            .iter()
            .enumerate()
            .map(|(i, c)| PatchMatrix {
                location: i,
                values: c.clone(),
            })
            .collect::<Vec<_>>(),
    );
    if x.shape() != z.shape() {
        return Err(Error::shape(format!(
            "patches {:?} vs coefficients {:?}",
            x.shape(),
            z.shape()
        )));
    }
    transform_closed_form(&x, &z, gamma)
}

/// The closed form on already concatenated `X` (n × m) and `Z` (n × m).
pub fn transform_closed_form(x: &DMatrix<f64>, z: &DMatrix<f64>, gamma: f64) -> Result<Transform> {
    let n = x.nrows();
    let mut a = x * x.transpose();
    for i in 0..n {
        a[(i, i)] += gamma;
    }
    // A is SPD since gamma > 0; take L = A^{1/2} symmetric.
    let eig = a.symmetric_eigen();
    if eig.eigenvalues.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Numerical {
            iteration: 0,
            reason: "X Xᵀ + γI is not positive definite".into(),
        });
    }
    let inv_sqrt = DVector::from_iterator(n, eig.eigenvalues.iter().map(|e| 1.0 / e.sqrt()));
    let l_inv =
        &eig.eigenvectors * DMatrix::from_diagonal(&inv_sqrt) * eig.eigenvectors.transpose();

    let m = &l_inv * x * z.transpose();
    let svd = m.svd(true, true);
    let q = svd
        .u
        .ok_or_else(|| Error::Degenerate("SVD without U".into()))?;
    let r = svd
        .v_t
        .ok_or_else(|| Error::Degenerate("SVD without Vᵀ".into()))?
        .transpose();
    let sigma = &svd.singular_values;

    let mut b: Vec<f64> = sigma
        .iter()
        .map(|&s| 0.5 * (s + (s * s + 2.0 * gamma).sqrt()))
        .collect();
    let orient = q.clone().lu().determinant() * r.clone().lu().determinant();
    if orient < 0.0 {
        let k = (0..n)
            .min_by(|&i, &j| sigma[i].partial_cmp(&sigma[j]).unwrap().then(j.cmp(&i)))
            .expect("non-empty");
        let s = sigma[k];
        b[k] = 0.5 * (s - (s * s + 2.0 * gamma).sqrt());
    }
    let t = r * DMatrix::from_diagonal(&DVector::from_vec(b)) * q.transpose() * l_inv;
    if t.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical {
            iteration: 0,
            reason: "transform update produced non-finite entries".into(),
        });
    }
    Transform::new(t)
}

/// Coefficient update: `Z_i = row_soft_threshold(T X_i, λ/2)`, the exact
/// minimizer of `||T X_i - Z_i||_F² + λ||Z_i||_{2,1}`.
pub fn update_coefs_s3(
    patches: &[PatchMatrix],
    transform: &Transform,
    lambda: f64,
) -> Result<Vec<DMatrix<f64>>> {
    if !(lambda >= 0.0) {
        return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
    }
    if let Some(p) = patches.iter().find(|p| p.values.nrows() != transform.dim()) {
        return Err(Error::shape(format!(
            "patch has {} rows, transform is {}x{}",
            p.values.nrows(),
            transform.dim(),
            transform.dim()
        )));
    }
    patches
        .iter()
        .map(|p| row_soft_threshold(&(transform.matrix() * &p.values), lambda / 2.0))
        .collect()
}

fn s3_parallel(
    patches: &[PatchMatrix],
    transform: &Transform,
    lambda: f64,
    sequential: bool,
) -> Vec<DMatrix<f64>> {
    map_indexed(patches.len(), sequential, |i| {
        let mut z = transform.matrix() * &patches[i].values;
        crate::solvers::CoefPenalty::RowSparse.prox_in_place(&mut z, lambda / 2.0);
        z
    })
}

/// Runs the full alternating minimization.
pub fn reconstruct_tl(y: &KSpaceData, params: &ReconParams) -> Result<TlState> {
    let setup = Setup::new(y, params)?;
    if !(params.gamma > 0.0) {
        return Err(Error::invalid("transform learning needs gamma > 0"));
    }
    let x0 = setup.model.adjoint(y)?;
    let transform = init_transform_svd(&x0, &setup.scheme)?;
    let n = transform.dim();
    let mut state = TlState {
        image: x0,
        transform,
        coefs: vec![DMatrix::zeros(n, y.echoes()); setup.scheme.len()],
        cost_history: Vec::new(),
    };
    state
        .cost_history
        .push(objective_with(&setup, &state, y, params)?);

    for _ in 0..params.max_outer_iters {
        match params.order {
            AlternationOrder::CoefsFirst => {
                step_coefs(&setup, &mut state, params)?;
                step_transform(&setup, &mut state, params)?;
                step_image(&setup, &mut state, y, params)?;
            }
            AlternationOrder::ImageFirst => {
                step_image(&setup, &mut state, y, params)?;
                step_coefs(&setup, &mut state, params)?;
                step_transform(&setup, &mut state, params)?;
            }
        }
        let cost = objective_with(&setup, &state, y, params)?;
        let prev = *state.cost_history.last().unwrap();
        state.cost_history.push(cost);
        if !cost.is_finite() {
            return Err(Error::Numerical {
                iteration: state.cost_history.len() - 1,
                reason: "objective became non-finite".into(),
            });
        }
        if relative_change(prev, cost) < params.rel_cost_tol {
            break;
        }
    }
    Ok(state)
}

fn step_coefs(setup: &Setup, state: &mut TlState, params: &ReconParams) -> Result<()> {
    let patches = setup.patches(&state.image)?;
    state.coefs = s3_parallel(&patches, &state.transform, params.lambda, setup.sequential);
    Ok(())
}

fn step_transform(setup: &Setup, state: &mut TlState, params: &ReconParams) -> Result<()> {
    let patches = setup.patches(&state.image)?;
    state.transform = update_transform_s2(&patches, &state.coefs, params.gamma)?;
    Ok(())
}

fn step_image(
    setup: &Setup,
    state: &mut TlState,
    y: &KSpaceData,
    params: &ReconParams,
) -> Result<()> {
    state.image = s1_with(
        setup,
        y,
        &state.transform,
        &state.coefs,
        params,
        &state.image,
    )?;
    Ok(())
}
