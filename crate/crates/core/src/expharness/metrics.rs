use nalgebra::DMatrix;

use crate::error::{Result, SysIdError};

/// Normalized one-step prediction error and the channels left out of it.
#[derive(Clone, Debug, PartialEq)]
pub struct Npe {
    pub value: f64,
    /// Channels with zero energy, excluded from the average.
    pub excluded: Vec<usize>,
}

/// `(1/n_o) Σ_m Σ_k (ŷ_m[k] - y_m[k])² / Σ_k y_m[k]²` over columns `skip..`.
pub fn normalized_prediction_error(yhat: &DMatrix<f64>, y: &DMatrix<f64>, skip: usize) -> Result<Npe> {
    npe_against(yhat, y, y, skip)
}

/// Like [`normalized_prediction_error`] but with the denominator taken from
/// `reference` (e.g. noise-free outputs).
pub fn npe_against(yhat: &DMatrix<f64>, y: &DMatrix<f64>, reference: &DMatrix<f64>, skip: usize) -> Result<Npe> {
    if yhat.shape() != y.shape() || reference.shape() != y.shape() {
        return Err(SysIdError::dim("prediction and output shapes differ"));
    }
    if skip >= y.ncols() {
        return Err(SysIdError::InsufficientData {
            what: "prediction error",
            required: skip + 1,
            available: y.ncols(),
        });
    }
    let n = y.ncols() - skip;
    let mut excluded = Vec::new();
    let mut total = 0.0;
    let mut used = 0;
    for m in 0..y.nrows() {
        let den = reference.view((m, skip), (1, n)).norm_squared();
        if den <= 0.0 {
            excluded.push(m);
            continue;
        }
        let num = (yhat.view((m, skip), (1, n)) - y.view((m, skip), (1, n))).norm_squared();
        total += num / den;
        used += 1;
    }
    if used == 0 {
        return Err(SysIdError::InvalidArgument(
            "every output channel has zero energy".into(),
        ));
    }
    Ok(Npe {
        value: total / used as f64,
        excluded,
    })
}
