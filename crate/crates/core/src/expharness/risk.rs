use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::{contaminate, derive_seed};
use crate::bayes::{gibbs_estimate, ChainConfig, TraceRow};
use crate::error::{Result, SysIdError};
use crate::linalg::sample_covariance;
use crate::subspace::{assemble, default_weights, ls_markov, weighted_truncate, HankelDataset, WeightPair};
use crate::sysmodel::{markov_hfp, simulate_white_input, StateSpaceModel, DEFAULT_BURN_IN};

/// An estimate of `H_fp` with the matching `H_f`.
#[derive(Clone, Debug)]
pub struct HfpEstimate {
    pub hfp: DMatrix<f64>,
    pub hf: DMatrix<f64>,
    /// Per-sweep chain trace for sampling estimators.
    pub trace: Option<Vec<TraceRow>>,
}

/// Anything that maps a Hankel dataset to `Ĥ_fp`.
pub trait HfpEstimator: Send + Sync {
    fn name(&self) -> &str;

    /// `sigma_y` is the output covariance used for weighting, `seed` the
    /// stream for randomized estimators.
    fn estimate(&self, ds: &HankelDataset, sigma_y: &DMatrix<f64>, seed: u64) -> Result<HfpEstimate>;
}

/// Plain least squares.
#[derive(Clone, Copy, Debug, Default)]
pub struct LsEstimator;

impl HfpEstimator for LsEstimator {
    fn name(&self) -> &str {
        "ls"
    }

    fn estimate(&self, ds: &HankelDataset, _sigma_y: &DMatrix<f64>, _seed: u64) -> Result<HfpEstimate> {
        let ls = ls_markov(ds);
        Ok(HfpEstimate {
            hfp: ls.hfp,
            hf: ls.hf,
            trace: None,
        })
    }
}

/// Least squares followed by the weighted rank-`r` truncation.
#[derive(Clone, Copy, Debug)]
pub struct SvdEstimator {
    pub rank: usize,
}

impl HfpEstimator for SvdEstimator {
    fn name(&self) -> &str {
        "svd-truncated"
    }

    fn estimate(&self, ds: &HankelDataset, sigma_y: &DMatrix<f64>, _seed: u64) -> Result<HfpEstimate> {
        let ls = ls_markov(ds);
        let w = default_weights(ds, sigma_y)?;
        Ok(HfpEstimate {
            hfp: weighted_truncate(&ls.hfp, &w, self.rank)?,
            hf: ls.hf,
            trace: None,
        })
    }
}

/// Gibbs sampler average; the chain seed is replaced by the call's seed.
#[derive(Clone, Debug)]
pub struct GibbsEstimator {
    pub rank: usize,
    pub chain: ChainConfig,
}

impl HfpEstimator for GibbsEstimator {
    fn name(&self) -> &str {
        "bayes-gibbs"
    }

    fn estimate(&self, ds: &HankelDataset, _sigma_y: &DMatrix<f64>, seed: u64) -> Result<HfpEstimate> {
        let cfg = ChainConfig {
            seed,
            ..self.chain.clone()
        };
        let out = gibbs_estimate(ds, self.rank, &cfg)?;
        Ok(HfpEstimate {
            hfp: out.hfp,
            hf: out.hf,
            trace: Some(out.trace),
        })
    }
}

/// How the risk weights are chosen for each realization.
#[derive(Clone, Debug)]
pub enum WeightPolicy {
    Identity,
    /// `W1 = I ⊗ diag(Σ_y)^{-1/2}` from the realization, `W2 = Z_p`.
    Default,
    Fixed(WeightPair),
}

impl WeightPolicy {
    fn weights(&self, ds: &HankelDataset, sigma_y: &DMatrix<f64>) -> Result<WeightPair> {
        match self {
            WeightPolicy::Identity => Ok(WeightPair::identity(ds.yf.nrows(), ds.zp.nrows())),
            WeightPolicy::Default => default_weights(ds, sigma_y),
            WeightPolicy::Fixed(w) => Ok(w.clone()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RiskSetup {
    pub f: usize,
    pub p: usize,
    /// Samples per realization.
    pub samples: usize,
    pub trials: usize,
    /// Coloured output contamination level (0 for none).
    pub alpha: f64,
    pub seed: u64,
    pub weights: WeightPolicy,
}

#[derive(Clone, Debug, Serialize)]
pub struct RiskSummary {
    pub method: String,
    pub mean: f64,
    pub std_err: f64,
    pub failures: usize,
    /// Weighted squared error per successful trial, in trial order.
    pub per_trial: Vec<f64>,
}

/// Monte-Carlo estimate of `E ‖W1 (H_fp - Ĥ_fp) W2‖_F²`.
///
/// Every estimator sees the same realizations (white Gaussian input, fresh
/// innovations and contamination per trial), so differences are paired.
pub fn risk_monte_carlo(
    model: &StateSpaceModel,
    estimators: &[&dyn HfpEstimator],
    setup: &RiskSetup,
) -> Result<Vec<RiskSummary>> {
    if setup.trials < 2 {
        return Err(SysIdError::InvalidArgument("risk needs at least two trials".into()));
    }
    let truth = markov_hfp(model, setup.f, setup.p).hfp;
    let per_trial: Vec<Vec<Option<f64>>> = (0..setup.trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<Option<f64>>> {
            let seed = derive_seed(setup.seed, &[t as u64]);
            let sim = simulate_white_input(model, setup.samples, DEFAULT_BURN_IN, seed)?;
            let sigma_y = sample_covariance(&sim.data.y);
            let data = contaminate(&sim.data, setup.alpha, &sigma_y, derive_seed(seed, &[1]))?;
            let ds = assemble(&data, setup.f, setup.p)?;
            let weights = setup.weights.weights(&ds, &sigma_y)?;
            Ok(estimators
                .iter()
                .map(|e| {
                    e.estimate(&ds, &sigma_y, derive_seed(seed, &[2]))
                        .ok()
                        .map(|est| weights.weighted_sq_error(&truth, &est.hfp))
                        .filter(|r| r.is_finite())
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    Ok(estimators
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let vals: Vec<f64> = per_trial.iter().filter_map(|row| row[k]).collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            RiskSummary {
                method: e.name().to_string(),
                mean,
                std_err: (var / n).sqrt(),
                failures: setup.trials - vals.len(),
                per_trial: vals,
            }
        })
        .collect())
}
