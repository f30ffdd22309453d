use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Result, SysIdError};
use crate::linalg::cholesky_jittered;

/// Draws from `W_d(scale, dof)` by the Bartlett decomposition.
///
/// Consumes `d` chi-squared draws for the diagonal first, then the
/// strictly lower entries row by row.
pub fn sample_wishart<R: Rng + ?Sized>(scale: &DMatrix<f64>, dof: f64, rng: &mut R) -> Result<DMatrix<f64>> {
    let d = scale.nrows();
    if scale.ncols() != d {
        return Err(SysIdError::dim("Wishart scale must be square"));
    }
    if dof.is_nan() || dof <= d as f64 - 1.0 {
        return Err(SysIdError::InvalidArgument(format!(
            "Wishart degrees of freedom {dof} must exceed d - 1 = {}",
            d as f64 - 1.0
        )));
    }
    let (chol, _) = cholesky_jittered(scale, "Wishart scale")?;
    let mut a = DMatrix::zeros(d, d);
    for k in 0..d {
        let chi =
            ChiSquared::new(dof - k as f64).map_err(|e| SysIdError::InvalidArgument(format!("chi-squared: {e}")))?;
        a[(k, k)] = chi.sample(rng).sqrt();
    }
    for r in 1..d {
        for c in 0..r {
            a[(r, c)] = StandardNormal.sample(rng);
        }
    }
    let la = chol.l() * a;
    Ok(&la * la.transpose())
}
