//! Matrix-normal conditional draws for `[Γ_f H_f]`, `Γ_f` and `L_p`.
//!
//! The regressions are evaluated in a `γ`-free form. With
//! `Σ = Λ + γ X X^T`, the printed mean `γ Y X^T Σ^{-1}` equals
//! `Y X^T (Λ/γ + X X^T)^{-1}` and the noise `Ḡ Ξ Σ^{-1/2}` with
//! `Ḡ = γ^{1/2} G_f` equals `G_f Ξ (Λ/γ + X X^T)^{-1/2}`. This avoids
//! overflow when `|det G_11|` is small.

use nalgebra::DMatrix;
use rand::Rng;

use super::{GibbsState, PriorParams};
use crate::error::{Result, SysIdError};
use crate::linalg::{spd_factors, standard_normal_matrix};
use crate::structops::toeplitz_from_last_block_row;
use crate::subspace::HankelDataset;

/// A draw `mean + left Ξ right` with `Ξ` standard normal.
#[derive(Clone, Debug)]
pub struct ConditionalDraw {
    pub mean: DMatrix<f64>,
    pub left: DMatrix<f64>,
    pub right: DMatrix<f64>,
    /// A regularizing jitter was needed to factor the posterior precision.
    pub jittered: bool,
}

impl ConditionalDraw {
    /// Shape of `Ξ`.
    pub fn noise_shape(&self) -> (usize, usize) {
        (self.left.ncols(), self.right.nrows())
    }

    pub fn with_noise(&self, xi: &DMatrix<f64>) -> DMatrix<f64> {
        &self.mean + &self.left * xi * &self.right
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DMatrix<f64> {
        let (r, c) = self.noise_shape();
        self.with_noise(&standard_normal_matrix(rng, r, c))
    }
}

/// Posterior of `B` in `Y = B X + G_f E` under the prior precision
/// `prior` (scaled by `γ` as described in the module docs).
fn regression(
    y: &DMatrix<f64>,
    x: &DMatrix<f64>,
    prior: &DMatrix<f64>,
    state: &GibbsState,
    what: &str,
) -> Result<ConditionalDraw> {
    let inv_gamma = (-state.log_gamma_scalar).exp();
    let precision = prior * inv_gamma + x * x.transpose();
    let fac = spd_factors(&precision, what)?;
    Ok(ConditionalDraw {
        mean: y * x.transpose() * &fac.inverse,
        left: state.gf.expand(),
        right: fac.inv_sqrt,
        jittered: fac.jittered,
    })
}

fn stack(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    out
}

fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows() + b.nrows();
    let mut out = DMatrix::zeros(n, n);
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}

/// Joint conditional of `[Γ_f H_f]` given `X_p`, `G_f`.
pub fn gamma_h_conditional(state: &GibbsState, ds: &HankelDataset, priors: &PriorParams) -> Result<ConditionalDraw> {
    let x = stack(&state.xp, &ds.uf);
    let prior = block_diag(&priors.lambda_gamma, &priors.lambda_h);
    regression(&ds.yf, &x, &prior, state, "Σ_1")
}

/// Draws `[Γ_f H_f]` and returns `(Γ_f, unprojected H_f, jittered)`.
pub fn step_gamma_h<R: Rng + ?Sized>(
    state: &GibbsState,
    ds: &HankelDataset,
    priors: &PriorParams,
    rng: &mut R,
) -> Result<(DMatrix<f64>, DMatrix<f64>, bool)> {
    let cond = gamma_h_conditional(state, ds, priors)?;
    let draw = cond.sample(rng);
    let r = state.rank();
    Ok((
        draw.columns(0, r).into_owned(),
        draw.columns(r, draw.ncols() - r).into_owned(),
        cond.jittered,
    ))
}

/// Keeps the last block row of a drawn `H_f` and rebuilds the block lower
/// triangular Toeplitz matrix from it.
pub fn project_hf(hf: &DMatrix<f64>, i: usize, n_o: usize, n_i: usize) -> Result<DMatrix<f64>> {
    if hf.shape() != (i * n_o, i * n_i) {
        return Err(SysIdError::dim("H_f has the wrong shape for projection"));
    }
    let last = hf.rows((i - 1) * n_o, n_o).into_owned();
    toeplitz_from_last_block_row(&last, i, n_o, n_i)
}

/// Conditional of `Γ_f` given `H_f`, `X_p`, `G_f`.
pub fn gamma_refresh_conditional(
    state: &GibbsState,
    ds: &HankelDataset,
    priors: &PriorParams,
) -> Result<ConditionalDraw> {
    let y = &ds.yf - &state.hf * &ds.uf;
    regression(&y, &state.xp, &priors.lambda_gamma, state, "Σ_Γ")
}

pub fn step_gamma_refresh<R: Rng + ?Sized>(
    state: &GibbsState,
    ds: &HankelDataset,
    priors: &PriorParams,
    rng: &mut R,
) -> Result<(DMatrix<f64>, bool)> {
    let cond = gamma_refresh_conditional(state, ds, priors)?;
    Ok((cond.sample(rng), cond.jittered))
}

/// Conditional of `L_p`: with `Σ_2 = Γ^T Ψ_e Γ + Λ_L`, mean
/// `Σ_2^{-1} Γ^T Ψ_e (Y_f - H_f U_f) Z_p^†` and noise `Σ_2^{-1/2} Ξ Z_p^†`.
pub fn lp_conditional(state: &GibbsState, ds: &HankelDataset, priors: &PriorParams) -> Result<ConditionalDraw> {
    let gt_psi = state.gamma.transpose() * &state.psi_e;
    let sigma2 = &gt_psi * &state.gamma + &priors.lambda_l;
    let fac = spd_factors(&sigma2, "Σ_2")?;
    let zp_pinv = ds.zp_pinv();
    let y = &ds.yf - &state.hf * &ds.uf;
    Ok(ConditionalDraw {
        mean: &fac.inverse * gt_psi * y * zp_pinv,
        left: fac.inv_sqrt,
        right: zp_pinv.clone(),
        jittered: fac.jittered,
    })
}

pub fn step_lp<R: Rng + ?Sized>(
    state: &GibbsState,
    ds: &HankelDataset,
    priors: &PriorParams,
    rng: &mut R,
) -> Result<(DMatrix<f64>, bool)> {
    let cond = lp_conditional(state, ds, priors)?;
    Ok((cond.sample(rng), cond.jittered))
}
