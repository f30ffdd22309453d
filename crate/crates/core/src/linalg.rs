//! Small dense helpers shared by the estimators.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Result, SysIdError};

/// Relative singular-value cutoff for pseudo-inverses.
pub const PINV_CUTOFF: f64 = 1e-10;

/// Diagonal jitter added to near-singular SPD matrices, relative to trace/dim.
pub const JITTER_SCALE: f64 = 1e-10;

/// Eigenvalues below `-PSD_TOLERANCE * max|λ|` make a matrix non-PSD.
const PSD_TOLERANCE: f64 = 1e-10;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn check_square(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(SysIdError::dim(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Symmetric PSD square root via eigendecomposition.
pub fn sym_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square(m, "matrix square root input")?;
    if m.nrows() == 0 {
        return Ok(m.clone());
    }
    let eig = symmetrize(m).symmetric_eigen();
    let scale = eig.eigenvalues.amax();
    let mut roots = eig.eigenvalues.clone();
    for v in roots.iter_mut() {
        if *v < -PSD_TOLERANCE * scale.max(f64::MIN_POSITIVE) {
            return Err(SysIdError::NotPositiveDefinite(format!(
                "eigenvalue {v:.3e} is negative"
            )));
        }
        *v = v.max(0.0).sqrt();
    }
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose())
}

/// Inverse of the symmetric square root of an SPD matrix.
pub fn sym_inv_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square(m, "inverse square root input")?;
    let eig = symmetrize(m).symmetric_eigen();
    let mut inv = eig.eigenvalues.clone();
    for v in inv.iter_mut() {
        if *v <= 0.0 {
            return Err(SysIdError::NotPositiveDefinite(format!(
                "eigenvalue {v:.3e} is not positive"
            )));
        }
        *v = 1.0 / v.sqrt();
    }
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose())
}

/// Moore-Penrose pseudo-inverse with singular values below
/// `rel_cutoff * σ_max` treated as zero. Returns the numerical rank too.
pub fn pinv(m: &DMatrix<f64>, rel_cutoff: f64) -> (DMatrix<f64>, usize) {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return (DMatrix::zeros(c, r), 0);
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cut = rel_cutoff * smax;
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let mut out = DMatrix::zeros(c, r);
    let mut rank = 0;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cut && s > 0.0 {
            rank += 1;
            out += vt.row(k).transpose() * u.column(k).transpose() * (1.0 / s);
        }
    }
    (out, rank)
}

/// Cholesky factorization with the jitter policy: up to two additions of
/// `JITTER_SCALE * trace / dim` on the diagonal. The flag reports whether
/// jitter was needed.
pub fn cholesky_jittered(m: &DMatrix<f64>, what: &str) -> Result<(Cholesky<f64, Dyn>, bool)> {
    check_square(m, what)?;
    let sym = symmetrize(m);
    if let Some(ch) = sym.clone().cholesky() {
        return Ok((ch, false));
    }
    let n = sym.nrows().max(1);
    let bump = JITTER_SCALE * sym.trace().abs().max(f64::MIN_POSITIVE) / n as f64;
    let mut work = sym;
    for _ in 0..2 {
        for d in 0..work.nrows() {
            work[(d, d)] += bump;
        }
        if let Some(ch) = work.clone().cholesky() {
            return Ok((ch, true));
        }
    }
    Err(SysIdError::NotPositiveDefinite(format!(
        "{what} is not positive definite after jitter"
    )))
}

/// Symmetric eigendecomposition based (inverse, inverse square root) of an
/// SPD matrix, with the same jitter policy as [`cholesky_jittered`].
pub struct SpdFactors {
    pub inverse: DMatrix<f64>,
    pub inv_sqrt: DMatrix<f64>,
    pub jittered: bool,
}

pub fn spd_factors(m: &DMatrix<f64>, what: &str) -> Result<SpdFactors> {
    check_square(m, what)?;
    let mut sym = symmetrize(m);
    let n = sym.nrows().max(1);
    let bump = JITTER_SCALE * sym.trace().abs().max(f64::MIN_POSITIVE) / n as f64;
    let mut eig = sym.clone().symmetric_eigen();
    let mut jittered = false;
    for _ in 0..2 {
        if eig.eigenvalues.min() > 0.0 {
            break;
        }
        for d in 0..sym.nrows() {
            sym[(d, d)] += bump;
        }
        eig = sym.clone().symmetric_eigen();
        jittered = true;
    }
    if sym.nrows() > 0 && eig.eigenvalues.min() <= 0.0 {
        return Err(SysIdError::NotPositiveDefinite(format!(
            "{what} is not positive definite after jitter"
        )));
    }
    let q = &eig.eigenvectors;
    let inv = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v));
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()));
    Ok(SpdFactors {
        inverse: q * inv * q.transpose(),
        inv_sqrt: q * inv_sqrt * q.transpose(),
        jittered,
    })
}

/// Spectral radius of a square matrix (0 for the empty matrix).
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Factor `m = R^T R` with `R` lower triangular. This is an upper Cholesky
/// factorization carried out in reversed index order.
pub fn reversed_cholesky(m: &DMatrix<f64>, what: &str) -> Result<(DMatrix<f64>, bool)> {
    let n = m.nrows();
    let rev = DMatrix::from_fn(n, n, |r, c| m[(n - 1 - r, n - 1 - c)]);
    let (ch, jittered) = cholesky_jittered(&rev, what)?;
    // rev = L L^T  =>  m = P L L^T P = (P L^T P)^T (P L^T P)
    let lt = ch.l().transpose();
    let r = DMatrix::from_fn(n, n, |a, b| lt[(n - 1 - a, n - 1 - b)]);
    Ok((r, jittered))
}

/// Column-major vectorization.
pub fn vec(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Fill an `r x c` matrix with standard normal draws in column-major order.
pub fn standard_normal_matrix<R: rand::Rng + ?Sized>(rng: &mut R, r: usize, c: usize) -> DMatrix<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let data: Vec<f64> = (0..r * c).map(|_| StandardNormal.sample(rng)).collect();
    DMatrix::from_vec(r, c, data)
}

/// Sample covariance of the columns of `x` (variables in rows).
pub fn sample_covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.ncols();
    if n < 2 {
        return DMatrix::zeros(x.nrows(), x.nrows());
    }
    let mean = x.column_mean();
    let mut centered = x.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    &centered * centered.transpose() / (n as f64 - 1.0)
}
