use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SysIdError};
use crate::linalg::{standard_normal_matrix, sym_sqrt};
use crate::sysmodel::TimeSeries;

/// AR coefficient of the coloured contamination.
pub const NOISE_POLE: f64 = 0.5;

/// Subtracts the per-channel mean of the first `estimation_length` samples
/// from every sample of `u` and `y`.
pub fn detrend(ts: &TimeSeries, estimation_length: usize) -> TimeSeries {
    let n = estimation_length.min(ts.len());
    if n == 0 {
        return ts.clone();
    }
    let center = |m: &DMatrix<f64>| {
        let mean = m.columns(0, n).column_mean();
        let mut out = m.clone();
        for mut col in out.column_iter_mut() {
            col -= &mean;
        }
        out
    };
    TimeSeries {
        u: center(&ts.u),
        y: center(&ts.y),
    }
}

/// Adds `v[k] = 0.5 v[k-1] + (√3/2) w[k]`, `w[k] ~ N(0, α² Σ_y)`, to the
/// outputs, starting from `v[0] = (√3/2) w[0]`. The stationary covariance
/// of `v` is `α² Σ_y`.
pub fn contaminate(ts: &TimeSeries, alpha: f64, sigma_y: &DMatrix<f64>, seed: u64) -> Result<TimeSeries> {
    if alpha < 0.0 || !alpha.is_finite() {
        return Err(SysIdError::InvalidArgument(format!(
            "noise level {alpha} must be nonnegative"
        )));
    }
    if sigma_y.shape() != (ts.n_o(), ts.n_o()) {
        return Err(SysIdError::dim("Σ_y does not match the output count"));
    }
    if alpha == 0.0 {
        return Ok(ts.clone());
    }
    let root = sym_sqrt(sigma_y)? * alpha;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = root * standard_normal_matrix(&mut rng, ts.n_o(), ts.len());
    let gain = 3f64.sqrt() / 2.0;
    let mut y = ts.y.clone();
    let mut v = w.column(0) * 0.0;
    for k in 0..ts.len() {
        v = v * NOISE_POLE + w.column(k) * gain;
        let mut col = y.column_mut(k);
        col += &v;
    }
    TimeSeries::new(ts.u.clone(), y)
}
