//! Conditional draw of the block Toeplitz noise colouring `G_f`.
//!
//! Write `F = G_f^{-1}` with first block column `F_1, …, F_i` and stack the
//! transposed blocks into `M = [F_1^T; …; F_i^T]` (`i n_o x n_o`). For the
//! residual `𝓔 = Y_f - Γ L_p Z_p - H_f U_f` with block rows `𝓔_0 … 𝓔_{i-1}`,
//! the `ij x i n_o` matrix `S` with block `(m, k) = 𝓔_{m-k}^T` (`k ≤ m`)
//! satisfies `S M = vec_b((F 𝓔)^T)`, so every quadratic form in `F 𝓔` is a
//! quadratic form `M^T Ω M`:
//!
//! - independent approximation: `Ω = S^T S`, i.e. `‖F 𝓔‖_F²`;
//! - exact: `Ω = B^T B` with `B = (𝓗^T 𝓗)^{-1} 𝓗^T S`, where `𝓗` maps the
//!   innovation sequence onto the Hankel arrangement of `E_f`. `𝓗^T 𝓗` is
//!   diagonal (anti-diagonal counts), so `B` is a row-averaging of `S`.
//!
//! Factoring `Ω = R^T R` with `R` lower triangular isolates the leading
//! block: `N = R M` has `N_1 = R_11 M_1`, whose Gram matrix is Wishart, and
//! independent standard normal blocks below it.

use nalgebra::DMatrix;
use rand::Rng;

use super::{sample_wishart, GfVariant, GibbsState};
use crate::error::{Result, SysIdError};
use crate::linalg::{reversed_cholesky, standard_normal_matrix, sym_sqrt};
use crate::structops::BlockToeplitzLower;
use crate::subspace::HankelDataset;

/// Wishart degrees of freedom: `i + j - i n_o` (exact) or `ij - i n_o + 1`
/// (independent approximation).
pub fn wishart_dof(variant: GfVariant, i: usize, j: usize, n_o: usize) -> f64 {
    let (i, j, no) = (i as f64, j as f64, n_o as f64);
    match variant {
        GfVariant::Exact => i + j - i * no,
        GfVariant::IndependentApprox => i * j - i * no + 1.0,
    }
}

/// `S` with block `(m, k) = 𝓔_{m-k}^T` for `k ≤ m`, zero otherwise.
fn residual_stack(resid: &DMatrix<f64>, i: usize, n_o: usize) -> DMatrix<f64> {
    let j = resid.ncols();
    let mut s = DMatrix::zeros(i * j, i * n_o);
    for m in 0..i {
        for k in 0..=m {
            let block = resid.rows((m - k) * n_o, n_o).transpose();
            s.view_mut((m * j, k * n_o), (j, n_o)).copy_from(&block);
        }
    }
    s
}

/// The quadratic-form matrix `Ω` for the given residual.
pub fn omega_matrix(resid: &DMatrix<f64>, i: usize, n_o: usize, variant: GfVariant) -> Result<DMatrix<f64>> {
    if resid.nrows() != i * n_o {
        return Err(SysIdError::dim("residual rows do not match i n_o"));
    }
    let j = resid.ncols();
    let s = residual_stack(resid, i, n_o);
    match variant {
        GfVariant::IndependentApprox => Ok(s.transpose() * s),
        GfVariant::Exact => {
            let len = i + j - 1;
            let mut b = DMatrix::zeros(len, i * n_o);
            let mut counts = vec![0.0; len];
            for m in 0..i {
                for n in 0..j {
                    let mut row = b.row_mut(m + n);
                    row += s.row(m * j + n);
                    counts[m + n] += 1.0;
                }
            }
            for (t, c) in counts.iter().enumerate() {
                let mut row = b.row_mut(t);
                row /= *c;
            }
            Ok(b.transpose() * b)
        }
    }
}

/// Everything needed to turn random numbers into a `G_f` draw.
#[derive(Clone, Debug)]
pub struct GfConditional {
    /// Lower triangular factor with `Ω = R^T R`.
    pub r: DMatrix<f64>,
    pub dof: f64,
    pub num_blocks: usize,
    pub n_o: usize,
    pub jittered: bool,
}

impl GfConditional {
    /// `G_f` and `G_f^{-1}` from a Wishart matrix `Θ` and the stacked
    /// normal blocks `N_2 … N_i` (`(i-1) n_o x n_o`).
    pub fn with_noise(
        &self,
        theta: &DMatrix<f64>,
        rest: &DMatrix<f64>,
    ) -> Result<(BlockToeplitzLower, BlockToeplitzLower)> {
        let (i, no) = (self.num_blocks, self.n_o);
        if theta.shape() != (no, no) || rest.shape() != ((i - 1) * no, no) {
            return Err(SysIdError::dim("noise blocks have the wrong shape"));
        }
        let mut n = DMatrix::zeros(i * no, no);
        n.rows_mut(0, no).copy_from(&sym_sqrt(theta)?);
        n.rows_mut(no, (i - 1) * no).copy_from(rest);
        let m = self
            .r
            .solve_lower_triangular(&n)
            .ok_or_else(|| SysIdError::Singular("factor of Ω".into()))?;
        let mut first = DMatrix::zeros(i * no, no);
        for k in 0..i {
            first.rows_mut(k * no, no).copy_from(&m.rows(k * no, no).transpose());
        }
        let f = BlockToeplitzLower::new(first, i)?;
        let g = f.inverse()?;
        Ok((g, f))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(BlockToeplitzLower, BlockToeplitzLower)> {
        let theta = sample_wishart(&DMatrix::identity(self.n_o, self.n_o), self.dof, rng)?;
        let rest = standard_normal_matrix(rng, (self.num_blocks - 1) * self.n_o, self.n_o);
        self.with_noise(&theta, &rest)
    }
}

pub fn gf_conditional(state: &GibbsState, ds: &HankelDataset, variant: GfVariant) -> Result<GfConditional> {
    let (i, j, no) = (ds.f, ds.j, ds.n_o);
    let dof = wishart_dof(variant, i, j, no);
    if dof.is_nan() || dof <= no as f64 - 1.0 {
        return Err(SysIdError::DegreesOfFreedom { dof, i, j, n_o: no });
    }
    let omega = omega_matrix(&state.residual(ds), i, no, variant)?;
    let (r, jittered) = reversed_cholesky(&omega, "Ω")?;
    Ok(GfConditional {
        r,
        dof,
        num_blocks: i,
        n_o: no,
        jittered,
    })
}

/// Draws `G_f` and returns `(G_f, G_f^{-1}, jittered)`.
pub fn step_gf<R: Rng + ?Sized>(
    state: &GibbsState,
    ds: &HankelDataset,
    rng: &mut R,
    variant: GfVariant,
) -> Result<(BlockToeplitzLower, BlockToeplitzLower, bool)> {
    let cond = gf_conditional(state, ds, variant)?;
    let (g, f) = cond.sample(rng)?;
    Ok((g, f, cond.jittered))
}

/// Log of the invariant improper prior `|det G_11|^{-i n_o}`.
pub fn prior_density_log(gf: &BlockToeplitzLower) -> Result<f64> {
    let log_det = gf.log_abs_leading_det()?;
    if !log_det.is_finite() {
        return Err(SysIdError::Singular("leading block of G_f".into()));
    }
    Ok(-((gf.num_blocks() * gf.block_rows()) as f64) * log_det)
}
