//! Row-sparse dictionary-learning reconstruction.
//!
//! Minimizes
//!
//! ```text
//! ||y - A x||² + μ Σ_i ( ||X_i - D Z_i||_F² + λ ||Z_i||_{2,1} )
//! ```
//!
//! over the image `x`, the dictionary `D` and the per-location coefficient
//! matrices `Z_i`, where `X_i` stacks the patch at location `i` of every echo
//! as columns. The row-sparsity penalty forces all echoes of a patch to use
//! the same atoms. Each outer iteration runs the coefficient update (proximal
//! gradient per location), the closed-form dictionary update, and the image
//! update (conjugate gradient on the normal equations).

use nalgebra::DMatrix;

use crate::engine::{concat_patches, left_singular_basis, relative_change, Setup};
use crate::error::{Error, Result};
use crate::exec::try_map_indexed;
use crate::model::{
    AlternationOrder, Dictionary, KSpaceData, MultiEchoImage, PatchMatrix, ReconParams,
};
use crate::operators::{assemble_adjoint, PatchScheme};
use crate::solvers::{CoefPenalty, IstaSolver};

/// Ridge added to `Σ Z_i Z_iᵀ` in the dictionary update, relative to its mean
/// diagonal.
pub const DEFAULT_RIDGE: f64 = 1e-8;

/// Iterates of the dictionary-learning engine.
#[derive(Debug, Clone)]
pub struct DlState {
    pub image: MultiEchoImage,
    pub dictionary: Dictionary,
    pub coefs: Vec<DMatrix<f64>>,
    /// Objective at initialization followed by one value per outer iteration.
    pub cost_history: Vec<f64>,
    pub penalty: CoefPenalty,
}

impl DlState {
    /// Fraction of coefficient rows (over all locations) that are exactly zero.
    pub fn zero_row_fraction(&self) -> f64 {
        zero_row_fraction(&self.coefs)
    }

    pub fn iterations(&self) -> usize {
        self.cost_history.len().saturating_sub(1)
    }
}

pub fn zero_row_fraction(coefs: &[DMatrix<f64>]) -> f64 {
    let total: usize = coefs.iter().map(|z| z.nrows()).sum();
    if total == 0 {
        return 0.0;
    }
    let zero: usize = coefs
        .iter()
        .map(|z| z.row_iter().filter(|r| r.iter().all(|&v| v == 0.0)).count())
        .sum();
    zero as f64 / total as f64
}

/// `Σ_i ||X_i - D Z_i||_F²`.
pub fn patch_fidelity(patches: &[PatchMatrix], d: &Dictionary, coefs: &[DMatrix<f64>]) -> f64 {
    patches
        .iter()
        .zip(coefs)
        .map(|(p, z)| (&p.values - d.atoms() * z).norm_squared())
        .sum()
}

fn learning_term(
    patches: &[PatchMatrix],
    d: &Dictionary,
    coefs: &[DMatrix<f64>],
    lambda: f64,
    penalty: CoefPenalty,
) -> f64 {
    patch_fidelity(patches, d, coefs) + lambda * coefs.iter().map(|z| penalty.value(z)).sum::<f64>()
}

fn check_coefs(
    scheme: &PatchScheme,
    d: &Dictionary,
    coefs: &[DMatrix<f64>],
    echoes: usize,
) -> Result<()> {
    if coefs.len() != scheme.len() {
        return Err(Error::shape(format!(
            "{} coefficient matrices for {} patch locations",
            coefs.len(),
            scheme.len()
        )));
    }
    if d.signal_dim() != scheme.patch_len() {
        return Err(Error::shape(format!(
            "dictionary atoms have {} entries, patches have {}",
            d.signal_dim(),
            scheme.patch_len()
        )));
    }
    if let Some(z) = coefs
        .iter()
        .find(|z| z.nrows() != d.num_atoms() || z.ncols() != echoes)
    {
        return Err(Error::shape(format!(
            "coefficient matrix is {}x{}, expected {}x{echoes}",
            z.nrows(),
            z.ncols(),
            d.num_atoms()
        )));
    }
    Ok(())
}

fn objective_with(
    setup: &Setup,
    state: &DlState,
    y: &KSpaceData,
    params: &ReconParams,
) -> Result<f64> {
    check_coefs(
        &setup.scheme,
        &state.dictionary,
        &state.coefs,
        state.image.echoes(),
    )?;
    let patches = setup.patches(&state.image)?;
    let data = setup.data_term(&state.image, y)?;
    Ok(data
        + params.mu
            * learning_term(
                &patches,
                &state.dictionary,
                &state.coefs,
                params.lambda,
                state.penalty,
            ))
}

/// The full dictionary-learning objective at `state`.
pub fn objective_dl(state: &DlState, y: &KSpaceData, params: &ReconParams) -> Result<f64> {
    let setup = Setup::new(y, params)?;
    objective_with(&setup, state, y, params)
}

/// Dictionary from the leading left singular vectors of all patch matrices of
/// `x0` placed side by side; one atom per patch pixel.
pub fn init_dictionary_svd(x0: &MultiEchoImage, scheme: &PatchScheme) -> Result<Dictionary> {
    init_dictionary_svd_with(x0, scheme, scheme.patch_len())
}

pub fn init_dictionary_svd_with(
    x0: &MultiEchoImage,
    scheme: &PatchScheme,
    num_atoms: usize,
) -> Result<Dictionary> {
    let patches = crate::operators::extract_patches(x0, scheme)?;
    if num_atoms == 0 || num_atoms > scheme.patch_len() {
        return Err(Error::invalid(format!(
            "num_atoms must be in [1, {}], got {num_atoms}",
            scheme.patch_len()
        )));
    }
    let all = concat_patches(&patches);
    if all.iter().all(|&v| v == 0.0) {
        return Err(Error::invalid(
            "cannot initialize a dictionary from all-zero patches",
        ));
    }
    let u = left_singular_basis(&all);
    Ok(Dictionary::new(u.columns(0, num_atoms).into_owned()))
}

/// Image update: solves
/// `(AᵀA + μ Σ PᵢᵀPᵢ) x = Aᵀy + μ Σ Pᵢᵀ(D Z_i)` by CG from `warm`.
pub fn update_image_p1(
    y: &KSpaceData,
    dictionary: &Dictionary,
    coefs: &[DMatrix<f64>],
    params: &ReconParams,
    warm: &MultiEchoImage,
) -> Result<MultiEchoImage> {
    let setup = Setup::new(y, params)?;
    p1_with(&setup, y, dictionary, coefs, params, warm)
}

fn p1_with(
    setup: &Setup,
    y: &KSpaceData,
    dictionary: &Dictionary,
    coefs: &[DMatrix<f64>],
    params: &ReconParams,
    warm: &MultiEchoImage,
) -> Result<MultiEchoImage> {
    let scheme = &setup.scheme;
    check_coefs(scheme, dictionary, coefs, warm.echoes())?;
    let mu = params.mu;
    let synth: Vec<PatchMatrix> = coefs
        .iter()
        .enumerate()
        .map(|(i, z)| PatchMatrix {
            location: i,
            values: dictionary.atoms() * z * mu,
        })
        .collect();
    let extra = assemble_adjoint(&synth, scheme, warm.height(), warm.width())?;
    let coverage = scheme.coverage();
    setup.solve_image(y, warm, &extra, params, |_, v, out| {
        for ((o, &vi), &c) in out.iter_mut().zip(v).zip(&coverage) {
            *o += mu * c * vi;
        }
    })
}

/// Closed-form dictionary update
/// `D = (Σ X_i Z_iᵀ)(Σ Z_i Z_iᵀ + ridge·I)⁻¹`, followed by unit-norm column
/// scaling with the matching coefficient rows rescaled so every product
/// `D Z_i` is unchanged. `ridge_rel` is relative to the mean diagonal of
/// `Σ Z_i Z_iᵀ`. Atoms that come out zero keep their value from `prev`.
pub fn update_dictionary_p2(
    patches: &[PatchMatrix],
    coefs: &[DMatrix<f64>],
    ridge_rel: f64,
    prev: &Dictionary,
) -> Result<(Dictionary, Vec<DMatrix<f64>>)> {
    let (d, _) = dictionary_least_squares(patches, coefs, ridge_rel)?;
    normalize_dictionary(d, coefs, prev)
}

/// The unnormalized least-squares dictionary and the ridge actually used.
pub fn dictionary_least_squares(
    patches: &[PatchMatrix],
    coefs: &[DMatrix<f64>],
    ridge_rel: f64,
) -> Result<(DMatrix<f64>, f64)> {
    if patches.len() != coefs.len() || patches.is_empty() {
        return Err(Error::shape("patch and coefficient counts differ"));
    }
    if !(ridge_rel >= 0.0) {
        return Err(Error::invalid("ridge must be >= 0"));
    }
    let n = patches[0].values.nrows();
    let k = coefs[0].nrows();
    let mut b = DMatrix::zeros(n, k);
    let mut g = DMatrix::zeros(k, k);
    for (p, z) in patches.iter().zip(coefs) {
        b += &p.values * z.transpose();
        g += z * z.transpose();
    }
    let mean_diag = g.trace() / k as f64;
    if !(mean_diag > 0.0) {
        return Err(Error::Degenerate(
            "all coefficient matrices are zero; dictionary is undetermined".into(),
        ));
    }
    let ridge = ridge_rel * mean_diag;
    for i in 0..k {
        g[(i, i)] += ridge;
    }
    // D G = B  ⇔  G Dᵀ = Bᵀ (G symmetric)
    let bt = b.transpose();
    let dt = match g.clone().cholesky() {
        Some(ch) => ch.solve(&bt),
        None => g
            .svd(true, true)
            .solve(&bt, 1e-12 * mean_diag)
            .map_err(|e| Error::Degenerate(e.to_string()))?,
    };
    Ok((dt.transpose(), ridge))
}

fn normalize_dictionary(
    mut d: DMatrix<f64>,
    coefs: &[DMatrix<f64>],
    prev: &Dictionary,
) -> Result<(Dictionary, Vec<DMatrix<f64>>)> {
    let mut coefs = coefs.to_vec();
    let max_norm = d.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    for j in 0..d.ncols() {
        let norm = d.column(j).norm();
        if norm > 1e-12 * max_norm && norm.is_finite() {
            d.column_mut(j).unscale_mut(norm);
            for z in &mut coefs {
                z.row_mut(j).scale_mut(norm);
            }
        } else if j < prev.num_atoms() {
            d.set_column(j, &prev.atoms().column(j));
        }
    }
    Ok((Dictionary::new(d), coefs))
}

/// Coefficient update: per location, proximal gradient on
/// `||X_i - D Z_i||_F² + λ·penalty(Z_i)` warm-started at `prev`.
pub fn update_coefs_p3(
    patches: &[PatchMatrix],
    dictionary: &Dictionary,
    lambda: f64,
    prev: &[DMatrix<f64>],
    inner_iters: usize,
    penalty: CoefPenalty,
    sequential: bool,
) -> Result<Vec<DMatrix<f64>>> {
    if patches.len() != prev.len() {
        return Err(Error::shape("patch and coefficient counts differ"));
    }
    let solver = IstaSolver::new(dictionary, penalty, 0)?;
    try_map_indexed(patches.len(), sequential, |i| {
        solver
            .solve(&patches[i].values, lambda, &prev[i], inner_iters, false)
            .map(|o| o.z)
    })
}

/// Runs the full alternating minimization with the row-sparse penalty.
pub fn reconstruct_dl(y: &KSpaceData, params: &ReconParams) -> Result<DlState> {
    reconstruct_dl_with_penalty(y, params, CoefPenalty::RowSparse)
}

/// Same loop with a selectable coefficient penalty; the entrywise variant is
/// the unstructured sparse-coding baseline.
pub fn reconstruct_dl_with_penalty(
    y: &KSpaceData,
    params: &ReconParams,
    penalty: CoefPenalty,
) -> Result<DlState> {
    let setup = Setup::new(y, params)?;
    let x0 = setup.model.adjoint(y)?;
    let dictionary = init_dictionary_svd(&x0, &setup.scheme)?;
    let coefs = vec![DMatrix::zeros(dictionary.num_atoms(), y.echoes()); setup.scheme.len()];
    let mut state = DlState {
        image: x0,
        dictionary,
        coefs,
        cost_history: Vec::new(),
        penalty,
    };
    let initial = objective_with(&setup, &state, y, params)?;
    state.cost_history.push(initial);

    for _ in 0..params.max_outer_iters {
        match params.order {
            AlternationOrder::CoefsFirst => {
                step_coefs(&setup, &mut state, params)?;
                step_dictionary(&setup, &mut state, params)?;
                step_image(&setup, &mut state, y, params)?;
            }
            AlternationOrder::ImageFirst => {
                step_image(&setup, &mut state, y, params)?;
                step_coefs(&setup, &mut state, params)?;
                step_dictionary(&setup, &mut state, params)?;
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

fn step_coefs(setup: &Setup, state: &mut DlState, params: &ReconParams) -> Result<()> {
    let patches = setup.patches(&state.image)?;
    state.coefs = update_coefs_p3(
        &patches,
        &state.dictionary,
        params.lambda,
        &state.coefs,
        params.inner_iters,
        state.penalty,
        setup.sequential,
    )?;
    Ok(())
}

/// Dictionary step with a descent safeguard. Rescaling coefficient rows after
/// normalization changes the penalty, so the candidate coefficients are
/// re-fitted to the new dictionary and the pair is kept only if the learning
/// term (fidelity plus penalty) does not increase.
fn step_dictionary(setup: &Setup, state: &mut DlState, params: &ReconParams) -> Result<()> {
    if state.coefs.iter().all(|z| z.iter().all(|&v| v == 0.0)) {
        return Ok(());
    }
    let patches = setup.patches(&state.image)?;
    let (d, z) = update_dictionary_p2(&patches, &state.coefs, DEFAULT_RIDGE, &state.dictionary)?;
    let z = update_coefs_p3(
        &patches,
        &d,
        params.lambda,
        &z,
        params.inner_iters,
        state.penalty,
        setup.sequential,
    )?;
    let before = learning_term(
        &patches,
        &state.dictionary,
        &state.coefs,
        params.lambda,
        state.penalty,
    );
    let after = learning_term(&patches, &d, &z, params.lambda, state.penalty);
    if after <= before {
        state.dictionary = d;
        state.coefs = z;
    }
    Ok(())
}

fn step_image(
    setup: &Setup,
    state: &mut DlState,
    y: &KSpaceData,
    params: &ReconParams,
) -> Result<()> {
    state.image = p1_with(
        setup,
        y,
        &state.dictionary,
        &state.coefs,
        params,
        &state.image,
    )?;
    Ok(())
}
