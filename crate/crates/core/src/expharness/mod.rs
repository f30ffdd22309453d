//! Experiment harness: data files, detrending and contamination, the
//! normalized prediction error, Monte-Carlo risk and method comparison grids.

mod config;
mod daisy;
mod experiment;
mod metrics;
mod noise;
mod risk;

pub use config::{ExperimentConfig, Method, RankPolicy};
pub use daisy::{format_daisy, load_daisy, parse_columns, write_daisy, DatasetSpec};
pub use experiment::{
    cell_name, identify_dataset, identify_segments, records_csv, run_experiment, summary_csv, trace_csv, write_report,
    CellFailure, ExperimentReport, Identification, IdentifyOptions, ResultRecord, SummaryRow, CSV_HEADER,
    PREDICTION_WASHOUT,
};
pub use metrics::{normalized_prediction_error, npe_against, Npe};
pub use noise::{contaminate, detrend, NOISE_POLE};
pub use risk::{
    risk_monte_carlo, GibbsEstimator, HfpEstimate, HfpEstimator, LsEstimator, RiskSetup, RiskSummary, SvdEstimator,
    WeightPolicy,
};

/// Mixes `parts` into `base` (splitmix64 finalizer per step) to derive
/// independent stream seeds.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mix = |mut z: u64| {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    };
    parts.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}
