//! Subspace identification of MIMO linear systems.
//!
//! The crate estimates the predictor Markov-parameter matrix `H_fp` from
//! input/output data, either by least squares followed by a weighted
//! truncated SVD, or by a Gibbs sampler over the factors `Γ_f`, `L_p`, `H_f`
//! and the block Toeplitz noise colouring `G_f`. Around the estimators sit a
//! state-space simulator, a model-recovery step and an experiment harness
//! (dataset ingestion, noise contamination, prediction error and risk).
//!
//! Module map:
//! - [`structops`]: block Hankel/Toeplitz kernels, selector matrices, SVD helpers.
//! - [`sysmodel`]: state-space models, simulation and one-step prediction.
//! - [`subspace`]: Hankel data assembly, least squares, weighting, recovery.
//! - [`bayes`]: empirical priors and the Gibbs sampler.
//! - [`expharness`]: data files, experiment grids, Monte-Carlo risk.

pub mod bayes;
pub mod error;
pub mod expharness;
pub mod linalg;
pub mod structops;
pub mod subspace;
pub mod sysmodel;

pub use bayes::{init_chain, run_chain, AverageMode, ChainConfig, ChainOutput, GfVariant, GibbsState, PriorParams};
pub use error::{Result, SysIdError};
pub use expharness::{DatasetSpec, ExperimentConfig, Method, RankPolicy, ResultRecord};
pub use structops::BlockToeplitzLower;
pub use subspace::{HankelDataset, WeightPair};
pub use sysmodel::{StateSpaceModel, TimeSeries};
