//! Bayesian estimation of `H_fp = Γ_f L_p` by Gibbs sampling.
//!
//! The sampler alternates matrix-normal regressions for `[Γ_f H_f]`,
//! `Γ_f` and `L_p` with a draw of the block Toeplitz noise colouring `G_f`,
//! and averages `Γ_f L_p` over the chain.
//!
//! Draw order inside one sweep, which fixes the consumption of the chain's
//! random stream:
//! 1. `[Γ_f H_f]`: one `i n_o x (r + i n_i)` standard normal matrix.
//! 2. `Γ_f` refresh (when enabled): one `i n_o x r` matrix.
//! 3. `L_p`: one `r x j` matrix.
//! 4. `G_f`: the Wishart draw (Bartlett order), then one `(i-1) n_o x n_o` matrix.
//!
//! Every standard normal matrix is filled column-major.

mod chain;
mod diagnostics;
mod gf;
mod steps;
mod wishart;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SysIdError};
use crate::structops::{truncated_svd, BlockToeplitzLower};
use crate::subspace::{ls_markov, HankelDataset};

pub use chain::{gibbs_estimate, run_chain, ChainOutput, TraceRow};
pub use diagnostics::{bartlett_long_run_variance, geweke_z, GEWEKE_CRITICAL_1PCT};
pub use gf::{gf_conditional, omega_matrix, prior_density_log, step_gf, wishart_dof, GfConditional};
pub use steps::{
    gamma_h_conditional, gamma_refresh_conditional, lp_conditional, project_hf, step_gamma_h, step_gamma_refresh,
    step_lp, ConditionalDraw,
};
pub use wishart::sample_wishart;

/// Precisions of the conditionally independent Gaussian priors.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorParams {
    /// `r x r`
    pub lambda_gamma: DMatrix<f64>,
    /// `r x r`
    pub lambda_l: DMatrix<f64>,
    /// `i n_i x i n_i`
    pub lambda_h: DMatrix<f64>,
    pub rank: usize,
    /// `Λ_H` fell back to the identity because `H_f^(1)` was zero.
    pub lambda_h_fallback: bool,
}

/// Current values of every sampled block plus cached derived quantities.
#[derive(Clone, Debug)]
pub struct GibbsState {
    /// `i n_o x r`
    pub gamma: DMatrix<f64>,
    /// `i n_o x i n_i`
    pub hf: DMatrix<f64>,
    /// `r x p (n_i + n_o)`
    pub lp: DMatrix<f64>,
    pub gf: BlockToeplitzLower,
    /// `G_f^{-1}`
    pub gf_inv: BlockToeplitzLower,
    /// `ln γ = -2i ln|det G_11|`
    pub log_gamma_scalar: f64,
    /// `(G_f G_f^T)^{-1}`
    pub psi_e: DMatrix<f64>,
    /// `L_p Z_p`
    pub xp: DMatrix<f64>,
}

impl GibbsState {
    /// `γ = 1 / |det G_11|^{2i}`
    pub fn gamma_scalar(&self) -> f64 {
        self.log_gamma_scalar.exp()
    }

    pub fn rank(&self) -> usize {
        self.gamma.ncols()
    }

    /// Installs a new `G_f` and refreshes `G_f^{-1}`, `γ` and `Ψ_e`.
    pub fn set_gf(&mut self, gf: BlockToeplitzLower) -> Result<()> {
        let inv = gf.inverse()?;
        self.set_gf_pair(gf, inv)
    }

    pub(crate) fn set_gf_pair(&mut self, gf: BlockToeplitzLower, gf_inv: BlockToeplitzLower) -> Result<()> {
        let log_det = gf.log_abs_leading_det()?;
        if !log_det.is_finite() {
            return Err(SysIdError::Singular("leading block of G_f".into()));
        }
        let f = gf_inv.expand();
        self.log_gamma_scalar = -2.0 * gf.num_blocks() as f64 * log_det;
        self.psi_e = f.transpose() * f;
        self.gf = gf;
        self.gf_inv = gf_inv;
        Ok(())
    }

    pub fn set_lp(&mut self, lp: DMatrix<f64>, ds: &HankelDataset) {
        self.xp = &lp * &ds.zp;
        self.lp = lp;
    }

    /// `Y_f - Γ_f L_p Z_p - H_f U_f`
    pub fn residual(&self, ds: &HankelDataset) -> DMatrix<f64> {
        &ds.yf - &self.gamma * &self.xp - &self.hf * &ds.uf
    }

    pub fn hfp(&self) -> DMatrix<f64> {
        &self.gamma * &self.lp
    }
}

/// How `G_f` is drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GfVariant {
    /// Keeps the Hankel structure of the innovations.
    Exact,
    /// Treats the entries of `E_f` as independent.
    #[default]
    #[serde(alias = "approx")]
    IndependentApprox,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AverageMode {
    /// Average of the drawn `Γ_f L_p`.
    Plain,
    /// Average of conditional expectations.
    #[default]
    RaoBlackwell,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    /// `N_F`, total sweeps.
    pub total_iterations: usize,
    /// `N_o`, sweeps discarded before averaging.
    pub burn_in: usize,
    pub gf_variant: GfVariant,
    pub seed: u64,
    pub average_mode: AverageMode,
    /// Redraw `Γ_f` given the projected `H_f` after the joint draw.
    pub refresh_gamma: bool,
    /// Let [`gibbs_estimate`] run the chain on outputs scaled to unit RMS.
    /// `γ = |det G_11|^{-2i}` depends on the output units, so without this
    /// the prior strength swings with the data scale.
    pub normalize_outputs: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            total_iterations: 500,
            burn_in: 100,
            gf_variant: GfVariant::default(),
            seed: 0,
            average_mode: AverageMode::default(),
            refresh_gamma: true,
            normalize_outputs: true,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.total_iterations {
            return Err(SysIdError::Config(format!(
                "burn-in {} must be smaller than the total iterations {}",
                self.burn_in, self.total_iterations
            )));
        }
        Ok(())
    }
}

/// Empirical priors and the starting state.
///
/// Runs least squares, factors `H_fp^(1) Z_p ≈ U_r S_r V_r^T` and sets
/// `Γ = U_r S_r^{1/2}`, `L_p = S_r^{1/2} V_r^T Z_p^†`, `G_f = I`,
/// `Λ_Γ = i n_o S_r^{-1}`, `Λ_L = j S_r^{-1}` and
/// `Λ_H = I i² n_o n_i / tr(H_f^T H_f)`.
pub fn init_chain(ds: &HankelDataset, r: usize) -> Result<(PriorParams, GibbsState)> {
    let (i, j, ni, no) = (ds.f, ds.j, ds.n_i, ds.n_o);
    if r == 0 {
        return Err(SysIdError::InvalidArgument("rank must be positive".into()));
    }
    let ls = ls_markov(ds);
    let svd = truncated_svd(&(&ls.hfp * &ds.zp), r)?;
    let top = svd.profile.iter().copied().next().unwrap_or(0.0);
    if svd.s[r - 1] <= 1e-12 * top || top == 0.0 {
        return Err(SysIdError::InvalidArgument(format!(
            "rank {r} exceeds the numerical rank of H_fp Z_p"
        )));
    }
    let root = DMatrix::from_diagonal(&svd.s.map(f64::sqrt));
    let inv_s: DVector<f64> = svd.s.map(|s| 1.0 / s);
    let gamma = &svd.u * &root;
    let lp = &root * svd.v.transpose() * ds.zp_pinv();

    let tr = ls.hf.norm_squared();
    let (lambda_h, lambda_h_fallback) = if tr > 0.0 {
        (
            DMatrix::identity(i * ni, i * ni) * ((i * i * no * ni) as f64 / tr),
            false,
        )
    } else {
        (DMatrix::identity(i * ni, i * ni), true)
    };
    let priors = PriorParams {
        lambda_gamma: DMatrix::from_diagonal(&(&inv_s * (i * no) as f64)),
        lambda_l: DMatrix::from_diagonal(&(&inv_s * j as f64)),
        lambda_h,
        rank: r,
        lambda_h_fallback,
    };
    let xp = &lp * &ds.zp;
    let state = GibbsState {
        gamma,
        hf: ls.hf,
        lp,
        gf: BlockToeplitzLower::identity(no, i),
        gf_inv: BlockToeplitzLower::identity(no, i),
        log_gamma_scalar: 0.0,
        psi_e: DMatrix::identity(i * no, i * no),
        xp,
    };
    Ok((priors, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subspace::assemble;
    use crate::sysmodel::{demo_mimo, simulate_white_input};

    fn dataset() -> HankelDataset {
        let sim = simulate_white_input(&demo_mimo(0.1), 300, 100, 3).unwrap();
        assemble(&sim.data, 4, 4).unwrap()
    }

    #[test]
    fn init_factors_reproduce_svd() {
        let ds = dataset();
        let (priors, state) = init_chain(&ds, 3).unwrap();
        let ls = ls_markov(&ds);
        let svd = truncated_svd(&(&ls.hfp * &ds.zp), 3).unwrap();
        let lhs = &state.gamma * &state.lp * &ds.zp;
        assert!((lhs - svd.reconstruct()).amax() < 1e-9 * svd.s[0]);
        assert_eq!(state.gamma_scalar(), 1.0);
        assert_eq!(priors.lambda_gamma.nrows(), 3);
        assert!(!priors.lambda_h_fallback);
    }

    #[test]
    fn lambda_gamma_scaling() {
        // Λ_Γ = i n_o S_r^{-1} with S_r = diag(4, 1), i = 3, n_o = 2
        let s = DVector::from_vec(vec![4.0, 1.0]);
        let lam = DMatrix::from_diagonal(&(s.map(|v| 1.0 / v) * 6.0));
        assert_eq!(lam, DMatrix::from_diagonal(&DVector::from_vec(vec![1.5, 6.0])));
    }

    #[test]
    fn lambda_h_fallback_on_zero_hf() {
        let sim = simulate_white_input(&demo_mimo(0.1), 200, 50, 4).unwrap();
        let mut data = sim.data.clone();
        data.u.fill(0.0);
        // zero inputs make U_f vanish, so LS returns H_f = 0
        let ds = assemble(&data, 3, 3).unwrap();
        let (priors, _) = init_chain(&ds, 2).unwrap();
        assert!(priors.lambda_h_fallback);
        assert_eq!(priors.lambda_h, DMatrix::identity(6, 6));
    }

    #[test]
    fn rank_above_numerical_rank_rejected() {
        let ds = dataset();
        let full = ds.yf.nrows();
        assert!(init_chain(&ds, full + 1).is_err());
        assert!(init_chain(&ds, 0).is_err());
    }

    #[test]
    fn chain_config_validation() {
        let mut cfg = ChainConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.burn_in = cfg.total_iterations;
        assert!(cfg.validate().is_err());
    }
}
