use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::gf::gf_conditional;
use super::steps::{gamma_h_conditional, gamma_refresh_conditional, lp_conditional, project_hf};
use super::{init_chain, AverageMode, ChainConfig, GibbsState, PriorParams};
use crate::error::{Result, SysIdError};
use crate::subspace::HankelDataset;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    /// 1-based sweep index.
    pub iteration: usize,
    pub log_det_g11: f64,
    pub gamma_l_norm: f64,
}

#[derive(Clone, Debug)]
pub struct ChainOutput {
    /// Averaged `Ĥ_fp`, `i n_o x p (n_i + n_o)`.
    pub hfp: DMatrix<f64>,
    /// Post-burn-in average of the projected `H_f`.
    pub hf: DMatrix<f64>,
    pub trace: Vec<TraceRow>,
    /// Number of factorizations that needed diagonal jitter.
    pub jitter_events: usize,
    pub final_state: GibbsState,
}

impl ChainOutput {
    pub fn log_det_trace(&self) -> Vec<f64> {
        self.trace.iter().map(|t| t.log_det_g11).collect()
    }
}

/// Runs `N_F` sweeps from `state` and averages `Γ_f L_p` over the sweeps
/// after burn-in. Each sweep draws `[Γ_f H_f]`, projects `H_f`, optionally
/// refreshes `Γ_f`, then draws `L_p` and `G_f`.
pub fn run_chain(
    ds: &HankelDataset,
    priors: &PriorParams,
    mut state: GibbsState,
    cfg: &ChainConfig,
) -> Result<ChainOutput> {
    cfg.validate()?;
    let (i, ni, no) = (ds.f, ds.n_i, ds.n_o);
    let r = state.rank();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut hfp_acc = DMatrix::zeros(i * no, ds.zp.nrows());
    let mut hf_acc = DMatrix::zeros(i * no, i * ni);
    let mut trace = Vec::with_capacity(cfg.total_iterations);
    let mut jitter_events = 0;

    for n in 1..=cfg.total_iterations {
        let wrap = |e: SysIdError| SysIdError::Chain {
            iteration: n,
            source: Box::new(e),
        };
        let prev_lp = state.lp.clone();

        let cond = gamma_h_conditional(&state, ds, priors).map_err(wrap)?;
        jitter_events += cond.jittered as usize;
        let draw = cond.sample(&mut rng);
        let mut gamma_mean = cond.mean.columns(0, r).into_owned();
        state.gamma = draw.columns(0, r).into_owned();
        state.hf = project_hf(&draw.columns(r, i * ni).into_owned(), i, no, ni).map_err(wrap)?;

        if cfg.refresh_gamma {
            let cond = gamma_refresh_conditional(&state, ds, priors).map_err(wrap)?;
            jitter_events += cond.jittered as usize;
            state.gamma = cond.sample(&mut rng);
            gamma_mean = cond.mean;
        }

        let cond = lp_conditional(&state, ds, priors).map_err(wrap)?;
        jitter_events += cond.jittered as usize;
        let lp = cond.sample(&mut rng);
        let lp_mean = cond.mean;
        state.set_lp(lp, ds);

        let gcond = gf_conditional(&state, ds, cfg.gf_variant).map_err(wrap)?;
        jitter_events += gcond.jittered as usize;
        let (g, g_inv) = gcond.sample(&mut rng).map_err(wrap)?;
        state.set_gf_pair(g, g_inv).map_err(wrap)?;

        let hfp = state.hfp();
        if !hfp.iter().all(|v| v.is_finite()) {
            return Err(wrap(SysIdError::Numerical("non-finite H_fp draw".into())));
        }
        trace.push(TraceRow {
            iteration: n,
            log_det_g11: state.gf.log_abs_leading_det().map_err(wrap)?,
            gamma_l_norm: hfp.norm(),
        });

        if n > cfg.burn_in {
            match cfg.average_mode {
                AverageMode::Plain => hfp_acc += hfp,
                AverageMode::RaoBlackwell => {
                    hfp_acc += (gamma_mean * prev_lp + &state.gamma * lp_mean) * 0.5;
                }
            }
            hf_acc += &state.hf;
        }
    }
    let kept = (cfg.total_iterations - cfg.burn_in) as f64;
    Ok(ChainOutput {
        hfp: hfp_acc / kept,
        hf: hf_acc / kept,
        trace,
        jitter_events,
        final_state: state,
    })
}

/// [`init_chain`] followed by [`run_chain`].
///
/// With `cfg.normalize_outputs` the chain sees outputs scaled by
/// `Λ = diag(rms)^{-1}` and the averages are mapped back, so `hfp` and `hf`
/// are in the original units while the trace and `final_state` stay in the
/// scaled ones.
pub fn gibbs_estimate(ds: &HankelDataset, r: usize, cfg: &ChainConfig) -> Result<ChainOutput> {
    if !cfg.normalize_outputs {
        let (priors, state) = init_chain(ds, r)?;
        return run_chain(ds, &priors, state, cfg);
    }
    let rms = ds.output_rms();
    if rms.iter().any(|v| *v <= 0.0 || !v.is_finite()) {
        return Err(SysIdError::InvalidArgument("an output channel has zero energy".into()));
    }
    let scale = rms.map(|v| 1.0 / v);
    let scaled = ds.scale_outputs(&scale)?;
    let (priors, state) = init_chain(&scaled, r)?;
    let mut out = run_chain(&scaled, &priors, state, cfg)?;
    let no = ds.n_o;
    let nu = ds.p * ds.n_i;
    // H = W^{-1} H' diag(I, I ⊗ Λ)
    let rows = out.hfp.nrows();
    for c in 0..out.hfp.ncols() {
        let right = if c >= nu { scale[(c - nu) % no] } else { 1.0 };
        for r in 0..rows {
            out.hfp[(r, c)] *= rms[r % no] * right;
        }
    }
    for c in 0..out.hf.ncols() {
        for r in 0..out.hf.nrows() {
            out.hf[(r, c)] *= rms[r % no];
        }
    }
    Ok(out)
}
