//! Classical subspace pipeline: Hankel data assembly, the least-squares
//! estimate of `[H_fp, H_f]`, weighted SVD truncation and recovery of the
//! system matrices from the factors `Γ_f`, `L_p`.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SysIdError};
use crate::linalg::{self, pinv, PINV_CUTOFF};
use crate::structops::{build_block_hankel, numerical_rank, truncated_svd};
use crate::sysmodel::{StateSpaceModel, TimeSeries};

/// Default relative threshold for automatic order selection.
pub const AUTO_RANK_THRESHOLD: f64 = 1e-3;

/// Future/past block Hankel matrices built from one record.
///
/// Column `n` of the future blocks starts at sample `p + n`, column `n` of
/// the past blocks at sample `n`.
#[derive(Clone, Debug)]
pub struct HankelDataset {
    pub yf: DMatrix<f64>,
    pub uf: DMatrix<f64>,
    pub up: DMatrix<f64>,
    pub yp: DMatrix<f64>,
    /// `[U_p; Y_p]`
    pub zp: DMatrix<f64>,
    /// Future horizon (`f = i`, the block-row count of `Y_f`).
    pub f: usize,
    pub p: usize,
    /// Number of columns.
    pub j: usize,
    pub n_i: usize,
    pub n_o: usize,
    /// The record the blocks were built from, when known.
    pub source: Option<TimeSeries>,
    zp_pinv: OnceLock<DMatrix<f64>>,
}

impl HankelDataset {
    /// Builds a dataset from explicit blocks (no source record).
    pub fn from_blocks(
        yf: DMatrix<f64>,
        uf: DMatrix<f64>,
        up: DMatrix<f64>,
        yp: DMatrix<f64>,
        f: usize,
        p: usize,
    ) -> Result<Self> {
        let j = yf.ncols();
        if [uf.ncols(), up.ncols(), yp.ncols()].iter().any(|&c| c != j) {
            return Err(SysIdError::dim("Hankel blocks have different widths"));
        }
        if f == 0 || p == 0 || !yf.nrows().is_multiple_of(f) || !uf.nrows().is_multiple_of(f) {
            return Err(SysIdError::dim("future blocks do not split into f block rows"));
        }
        let (n_o, n_i) = (yf.nrows() / f, uf.nrows() / f);
        if up.nrows() != p * n_i || yp.nrows() != p * n_o {
            return Err(SysIdError::dim("past blocks do not match p and channel counts"));
        }
        let mut zp = DMatrix::zeros(p * (n_i + n_o), j);
        zp.rows_mut(0, p * n_i).copy_from(&up);
        zp.rows_mut(p * n_i, p * n_o).copy_from(&yp);
        Ok(Self {
            yf,
            uf,
            up,
            yp,
            zp,
            f,
            p,
            j,
            n_i,
            n_o,
            source: None,
            zp_pinv: OnceLock::new(),
        })
    }

    /// `Z_p^†`, computed once.
    pub fn zp_pinv(&self) -> &DMatrix<f64> {
        self.zp_pinv.get_or_init(|| pinv(&self.zp, PINV_CUTOFF).0)
    }

    /// `[U_p; Y_p; U_f]`
    pub fn regressor(&self) -> DMatrix<f64> {
        let rows = self.zp.nrows() + self.uf.nrows();
        let mut out = DMatrix::zeros(rows, self.j);
        out.rows_mut(0, self.zp.nrows()).copy_from(&self.zp);
        out.rows_mut(self.zp.nrows(), self.uf.nrows()).copy_from(&self.uf);
        out
    }

    /// Root-mean-square of each output channel over the `Y_p` windows.
    pub fn output_rms(&self) -> DVector<f64> {
        DVector::from_fn(self.n_o, |k, _| {
            let mut acc = 0.0;
            for b in 0..self.p {
                acc += self.yp.row(b * self.n_o + k).norm_squared();
            }
            (acc / (self.p * self.j) as f64).sqrt()
        })
    }

    /// Copy with output channel `k` multiplied by `scale[k]` in `Y_f` and `Y_p`.
    pub fn scale_outputs(&self, scale: &DVector<f64>) -> Result<Self> {
        if scale.len() != self.n_o || scale.iter().any(|s| !s.is_finite() || *s == 0.0) {
            return Err(SysIdError::InvalidArgument(
                "output scales must be finite and nonzero".into(),
            ));
        }
        let apply = |m: &DMatrix<f64>| DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)] * scale[r % self.n_o]);
        let mut out = Self::from_blocks(
            apply(&self.yf),
            self.uf.clone(),
            self.up.clone(),
            apply(&self.yp),
            self.f,
            self.p,
        )?;
        out.source = self.source.as_ref().map(|ts| {
            let y = DMatrix::from_fn(ts.y.nrows(), ts.y.ncols(), |r, c| ts.y[(r, c)] * scale[r]);
            TimeSeries { u: ts.u.clone(), y }
        });
        Ok(out)
    }
}

/// Arranges `data` into the future/past Hankel blocks with `j = T - f - p + 1`.
pub fn assemble(data: &TimeSeries, f: usize, p: usize) -> Result<HankelDataset> {
    if f == 0 || p == 0 {
        return Err(SysIdError::InvalidArgument("horizons must be positive".into()));
    }
    let t = data.len();
    if t < f + p {
        return Err(SysIdError::InsufficientData {
            what: "Hankel dataset",
            required: f + p,
            available: t,
        });
    }
    let j = t - f - p + 1;
    let up = build_block_hankel(&data.u, p, j, 0)?;
    let yp = build_block_hankel(&data.y, p, j, 0)?;
    let uf = build_block_hankel(&data.u, f, j, p)?;
    let yf = build_block_hankel(&data.y, f, j, p)?;
    let mut ds = HankelDataset::from_blocks(yf, uf, up, yp, f, p)?;
    ds.source = Some(data.clone());
    Ok(ds)
}

#[derive(Clone, Debug)]
pub struct LsEstimate {
    pub hfp: DMatrix<f64>,
    pub hf: DMatrix<f64>,
    /// Numerical rank of `[U_p; Y_p; U_f]`.
    pub regressor_rank: usize,
    /// False when the minimum-norm solution was used.
    pub full_rank: bool,
}

/// `[Ĥ_fp, Ĥ_f] = Y_f [U_p; Y_p; U_f]^†`.
pub fn ls_markov(ds: &HankelDataset) -> LsEstimate {
    let reg = ds.regressor();
    let (reg_pinv, rank) = pinv(&reg, PINV_CUTOFF);
    let coef = &ds.yf * reg_pinv;
    let nz = ds.zp.nrows();
    LsEstimate {
        hfp: coef.columns(0, nz).into_owned(),
        hf: coef.columns(nz, ds.uf.nrows()).into_owned(),
        regressor_rank: rank,
        full_rank: rank == reg.nrows(),
    }
}

/// Left and right weights of the truncation `W1 H W2 ≈ U_r S_r V_r^T`.
#[derive(Clone, Debug)]
pub struct WeightPair {
    /// `f n_o x f n_o`, nonsingular.
    pub w1: DMatrix<f64>,
    /// `p (n_i + n_o) x m`.
    pub w2: DMatrix<f64>,
}

impl WeightPair {
    pub fn identity(rows: usize, cols: usize) -> Self {
        Self {
            w1: DMatrix::identity(rows, rows),
            w2: DMatrix::identity(cols, cols),
        }
    }

    pub fn w1_inverse(&self) -> Result<DMatrix<f64>> {
        self.w1
            .clone()
            .try_inverse()
            .ok_or_else(|| SysIdError::Singular("left weight W1".into()))
    }

    /// `‖W1 (a - b) W2‖_F²`
    pub fn weighted_sq_error(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (&self.w1 * (a - b) * &self.w2).norm_squared()
    }
}

/// Rank-`r` factors of `W1 H W2`, mapped back through the weights.
#[derive(Clone, Debug)]
pub struct WeightedFactors {
    /// `W1^{-1} U_r S_r^{1/2}`
    pub gamma: DMatrix<f64>,
    /// `S_r^{1/2} V_r^T W2^†`
    pub lp: DMatrix<f64>,
    /// Every singular value of `W1 H W2`, descending.
    pub profile: DVector<f64>,
}

impl WeightedFactors {
    pub fn hfp(&self) -> DMatrix<f64> {
        &self.gamma * &self.lp
    }
}

pub fn weighted_factorization(hfp: &DMatrix<f64>, weights: &WeightPair, r: usize) -> Result<WeightedFactors> {
    weighted_factorization_with_pinv(hfp, weights, &pinv(&weights.w2, PINV_CUTOFF).0, r)
}

/// Same as [`weighted_factorization`] with a precomputed `W2^†`.
pub fn weighted_factorization_with_pinv(
    hfp: &DMatrix<f64>,
    weights: &WeightPair,
    w2_pinv: &DMatrix<f64>,
    r: usize,
) -> Result<WeightedFactors> {
    if weights.w1.ncols() != hfp.nrows() || weights.w2.nrows() != hfp.ncols() {
        return Err(SysIdError::dim("weights do not conform to H_fp"));
    }
    let w1_inv = weights.w1_inverse()?;
    let svd = truncated_svd(&(&weights.w1 * hfp * &weights.w2), r)?;
    let root = DMatrix::from_diagonal(&svd.s.map(f64::sqrt));
    Ok(WeightedFactors {
        gamma: w1_inv * &svd.u * &root,
        lp: root * svd.v.transpose() * w2_pinv,
        profile: svd.profile,
    })
}

/// `W1^{-1} U_r S_r V_r^T W2^†`.
pub fn weighted_truncate(hfp: &DMatrix<f64>, weights: &WeightPair, r: usize) -> Result<DMatrix<f64>> {
    Ok(weighted_factorization(hfp, weights, r)?.hfp())
}

/// `W1 = I_f ⊗ Λ_y` with `Λ_y = diag(Σ_y)^{-1/2}` and `W2 = Z_p`.
pub fn default_weights(ds: &HankelDataset, sigma_y: &DMatrix<f64>) -> Result<WeightPair> {
    if sigma_y.nrows() != ds.n_o || sigma_y.ncols() != ds.n_o {
        return Err(SysIdError::dim("output covariance has the wrong size"));
    }
    let mut lambda = DMatrix::zeros(ds.n_o, ds.n_o);
    for c in 0..ds.n_o {
        let v = sigma_y[(c, c)];
        if v <= 0.0 || !v.is_finite() {
            return Err(SysIdError::InvalidArgument(format!(
                "output channel {c} has nonpositive variance {v}"
            )));
        }
        lambda[(c, c)] = 1.0 / v.sqrt();
    }
    Ok(WeightPair {
        w1: DMatrix::<f64>::identity(ds.f, ds.f).kronecker(&lambda),
        w2: ds.zp.clone(),
    })
}

/// Hankel row length `i = min(15, ⌊N / (10 (n_o + n_i))⌋)`, clamped to at
/// least 2 so the shift structure of `Γ_f` exists.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RowLength {
    pub i: usize,
    /// The formula gave less than 2.
    pub clamped: bool,
}

pub fn row_length(n: usize, n_o: usize, n_i: usize) -> RowLength {
    let raw = (n / (10 * (n_o + n_i).max(1))).min(15);
    if raw < 2 {
        RowLength { i: 2, clamped: true }
    } else {
        RowLength { i: raw, clamped: false }
    }
}

/// Largest `r` with `σ_r / σ_1 > threshold` (at least 1 for a nonzero profile).
pub fn select_rank(profile: &DVector<f64>, threshold: f64) -> usize {
    let Some(&top) = profile.iter().next() else {
        return 0;
    };
    if top <= 0.0 {
        return 0;
    }
    profile.iter().take_while(|&&s| s / top > threshold).count()
}

/// Recovers `(A, B, C, D, K, Σ)` from observability/controllability factors.
///
/// `C` is the first block row of `Γ_f`, `A` solves the shift equation of
/// `Γ_f` in least squares, `B - KD` and `K` are the last block columns of
/// `L_p^(1)` and `L_p^(2)`. `D` and `Σ` come from a least-squares fit of the
/// one-step prediction residual on the input over the dataset's record.
pub fn recover_system(
    gamma: &DMatrix<f64>,
    lp: &DMatrix<f64>,
    hf: &DMatrix<f64>,
    ds: &HankelDataset,
    n_x: usize,
) -> Result<StateSpaceModel> {
    let (f, p, ni, no) = (ds.f, ds.p, ds.n_i, ds.n_o);
    let data = ds
        .source
        .as_ref()
        .ok_or_else(|| SysIdError::InvalidArgument("dataset has no source record".into()))?;
    if hf.shape() != (f * no, f * ni) {
        return Err(SysIdError::dim("H_f has the wrong shape"));
    }
    if n_x == 0 {
        let mut d = DMatrix::zeros(no, ni);
        for b in 0..f {
            d += hf.view((b * no, b * ni), (no, ni));
        }
        d /= f as f64;
        let resid = &data.y - &d * &data.u;
        let sigma = linalg::symmetrize(&linalg::sample_covariance(&resid));
        return StateSpaceModel::new_allow_unstable(
            DMatrix::zeros(0, 0),
            DMatrix::zeros(0, ni),
            DMatrix::zeros(no, 0),
            d,
            DMatrix::zeros(0, no),
            sigma,
        );
    }
    if gamma.shape() != (f * no, n_x) || lp.shape() != (n_x, p * (ni + no)) {
        return Err(SysIdError::dim(format!(
            "factors are {}x{} and {}x{}, expected {}x{n_x} and {n_x}x{}",
            gamma.nrows(),
            gamma.ncols(),
            lp.nrows(),
            lp.ncols(),
            f * no,
            p * (ni + no)
        )));
    }
    if f < 2 {
        return Err(SysIdError::InvalidArgument(
            "need at least two block rows in Γ_f".into(),
        ));
    }
    let upper = gamma.rows(0, (f - 1) * no).into_owned();
    let lower = gamma.rows(no, (f - 1) * no).into_owned();
    if numerical_rank(&upper, 1e-10) < n_x {
        return Err(SysIdError::Singular(format!(
            "shifted observability stack has rank below {n_x}"
        )));
    }
    let a = pinv(&upper, PINV_CUTOFF).0 * lower;
    let c = gamma.rows(0, no).into_owned();
    let bk1 = lp.columns((p - 1) * ni, ni).into_owned();
    let k = lp.columns(p * ni + (p - 1) * no, no).into_owned();

    // Predictor run needs only B - KD, so D can be fitted afterwards.
    let a_k = &a - &k * &c;
    let t = data.len();
    let mut x = DVector::zeros(n_x);
    let mut cx = DMatrix::zeros(no, t);
    for s in 0..t {
        cx.set_column(s, &(&c * &x));
        x = &a_k * &x + &bk1 * data.u.column(s) + &k * data.y.column(s);
    }
    let skip = f.max(20).min(t / 2);
    let resid_y = (&data.y - &cx).columns(skip, t - skip).into_owned();
    let u = data.u.columns(skip, t - skip).into_owned();
    let d = &resid_y * pinv(&u, PINV_CUTOFF).0;
    let innovations = &resid_y - &d * &u;
    let sigma = linalg::symmetrize(&linalg::sample_covariance(&innovations));
    let b = &bk1 + &k * &d;
    StateSpaceModel::new_allow_unstable(a, b, c, d, k, sigma)
}

/// Weighted rank-`r` factorization of `hfp` followed by [`recover_system`].
pub fn model_from_hfp(
    hfp: &DMatrix<f64>,
    hf: &DMatrix<f64>,
    ds: &HankelDataset,
    weights: &WeightPair,
    r: usize,
) -> Result<StateSpaceModel> {
    let w2_pinv = if weights.w2 == ds.zp {
        ds.zp_pinv().clone()
    } else {
        pinv(&weights.w2, PINV_CUTOFF).0
    };
    let factors = weighted_factorization_with_pinv(hfp, weights, &w2_pinv, r)?;
    recover_system(&factors.gamma, &factors.lp, hf, ds, r)
}
