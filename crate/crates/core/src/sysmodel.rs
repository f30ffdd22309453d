//! Discrete-time state-space models in innovation form
//!
//! ```text
//! x[k+1] = A x[k] + B u[k] + K e[k]
//!   y[k] = C x[k] + D u[k] + e[k],     e[k] ~ N(0, Σ)
//! ```
//!
//! together with the equivalent predictor form driven by `z = [u; y]`, and the
//! structured matrices (`Γ_f`, `H_f`, `G_f`, `H_fp`, `L_p`) used by the
//! subspace estimators.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SysIdError};
use crate::linalg::{self, spectral_radius, sym_sqrt};

/// Predictor stability margin: `ρ(A - KC)` must stay below this.
pub const STABILITY_LIMIT: f64 = 1.0 - 1e-9;

/// Default number of discarded warm-up samples in stationary simulations.
pub const DEFAULT_BURN_IN: usize = 100;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StateSpaceModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    /// Skip the predictor stability requirement.
    #[serde(default)]
    pub allow_unstable: bool,
}

impl StateSpaceModel {
    /// Builds a model, checking dimensions, `Σ ⪰ 0` and predictor stability.
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        k: DMatrix<f64>,
        sigma: DMatrix<f64>,
    ) -> Result<Self> {
        let model = Self {
            a,
            b,
            c,
            d,
            k,
            sigma,
            allow_unstable: false,
        };
        model.validate()?;
        Ok(model)
    }

    /// Same as [`StateSpaceModel::new`] but accepts an unstable predictor.
    pub fn new_allow_unstable(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        k: DMatrix<f64>,
        sigma: DMatrix<f64>,
    ) -> Result<Self> {
        let model = Self {
            a,
            b,
            c,
            d,
            k,
            sigma,
            allow_unstable: true,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn n_x(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_i(&self) -> usize {
        self.d.ncols()
    }

    pub fn n_o(&self) -> usize {
        self.d.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let (nx, ni, no) = (self.a.nrows(), self.d.ncols(), self.d.nrows());
        let checks = [
            ("A", self.a.shape(), (nx, nx)),
            ("B", self.b.shape(), (nx, ni)),
            ("C", self.c.shape(), (no, nx)),
            ("K", self.k.shape(), (nx, no)),
            ("Sigma", self.sigma.shape(), (no, no)),
        ];
        for (name, got, want) in checks {
            if got != want {
                return Err(SysIdError::dim(format!(
                    "{name} is {}x{}, expected {}x{}",
                    got.0, got.1, want.0, want.1
                )));
            }
        }
        if (&self.sigma - self.sigma.transpose()).amax() > 1e-12 * self.sigma.amax().max(1.0) {
            return Err(SysIdError::NotPositiveDefinite("Sigma is not symmetric".into()));
        }
        sym_sqrt(&self.sigma)?;
        if !self.allow_unstable {
            let radius = self.predictor_radius();
            if radius >= STABILITY_LIMIT {
                return Err(SysIdError::Unstable { radius });
            }
        }
        Ok(())
    }

    /// `A_K = A - K C`.
    pub fn a_k(&self) -> DMatrix<f64> {
        &self.a - &self.k * &self.c
    }

    /// `B_K = [B - K D, K]`.
    pub fn b_k(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n_x(), self.n_i() + self.n_o());
        out.columns_mut(0, self.n_i()).copy_from(&(&self.b - &self.k * &self.d));
        out.columns_mut(self.n_i(), self.n_o()).copy_from(&self.k);
        out
    }

    pub fn predictor_radius(&self) -> f64 {
        spectral_radius(&self.a_k())
    }

    /// Impulse-response Markov parameters `D, CB, CAB, ...` (first `count`).
    pub fn markov_parameters(&self, count: usize) -> Vec<DMatrix<f64>> {
        let mut out = Vec::with_capacity(count);
        if count == 0 {
            return out;
        }
        out.push(self.d.clone());
        let mut apow_b = self.b.clone();
        for _ in 1..count {
            out.push(&self.c * &apow_b);
            apow_b = &self.a * apow_b;
        }
        out
    }
}

/// Input/output record with samples as columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    /// `n_i x T`
    pub u: DMatrix<f64>,
    /// `n_o x T`
    pub y: DMatrix<f64>,
}

impl TimeSeries {
    pub fn new(u: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self> {
        if u.ncols() != y.ncols() {
            return Err(SysIdError::dim(format!(
                "input has {} samples, output has {}",
                u.ncols(),
                y.ncols()
            )));
        }
        if u.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(SysIdError::InvalidArgument(
                "time series contains non-finite values".into(),
            ));
        }
        Ok(Self { u, y })
    }

    pub fn len(&self) -> usize {
        self.y.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_i(&self) -> usize {
        self.u.nrows()
    }

    pub fn n_o(&self) -> usize {
        self.y.nrows()
    }

    /// Samples `start .. start + len`.
    pub fn segment(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.len() {
            return Err(SysIdError::InsufficientData {
                what: "time series segment",
                required: start + len,
                available: self.len(),
            });
        }
        Ok(Self {
            u: self.u.columns(start, len).into_owned(),
            y: self.y.columns(start, len).into_owned(),
        })
    }
}

/// Simulation output plus the innovations that produced it.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub data: TimeSeries,
    /// `e[k]`, `n_o x T`.
    pub innovations: DMatrix<f64>,
    /// State trajectory `x[0..T]`, `n_x x T`.
    pub states: DMatrix<f64>,
}

/// Runs the innovation-form recursion with `e[k] = Σ^{1/2} ξ[k]`,
/// `ξ[k]` standard normal from a ChaCha8 stream seeded by `seed`.
pub fn simulate(model: &StateSpaceModel, u: &DMatrix<f64>, seed: u64, x0: &DVector<f64>) -> Result<Simulation> {
    if u.nrows() != model.n_i() {
        return Err(SysIdError::dim("input rows do not match model inputs"));
    }
    if x0.len() != model.n_x() {
        return Err(SysIdError::dim("initial state has wrong length"));
    }
    let sqrt_sigma = sym_sqrt(&model.sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = u.ncols();
    let xi = linalg::standard_normal_matrix(&mut rng, model.n_o(), t);
    let e = &sqrt_sigma * xi;
    let mut y = DMatrix::zeros(model.n_o(), t);
    let mut states = DMatrix::zeros(model.n_x(), t);
    let mut x = x0.clone();
    for k in 0..t {
        states.set_column(k, &x);
        let yk = &model.c * &x + &model.d * u.column(k) + e.column(k);
        y.set_column(k, &yk);
        x = &model.a * &x + &model.b * u.column(k) + &model.k * e.column(k);
    }
    Ok(Simulation {
        data: TimeSeries::new(u.clone(), y)?,
        innovations: e,
        states,
    })
}

/// Simulates `burn_in + len` samples driven by unit-variance white Gaussian
/// input and returns the last `len`.
pub fn simulate_white_input(model: &StateSpaceModel, len: usize, burn_in: usize, seed: u64) -> Result<Simulation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let u = linalg::standard_normal_matrix(&mut rng, model.n_i(), burn_in + len);
    let sim = simulate(model, &u, seed, &DVector::zeros(model.n_x()))?;
    Ok(Simulation {
        data: sim.data.segment(burn_in, len)?,
        innovations: sim.innovations.columns(burn_in, len).into_owned(),
        states: sim.states.columns(burn_in, len).into_owned(),
    })
}

/// One-step-ahead predictions `ŷ[k|k-1] = C x̂[k] + D u[k]` with
/// `x̂[k+1] = A_K x̂[k] + B_K z[k]`.
pub fn predict_one_step(model: &StateSpaceModel, data: &TimeSeries, x0: &DVector<f64>) -> Result<DMatrix<f64>> {
    if data.n_i() != model.n_i() || data.n_o() != model.n_o() {
        return Err(SysIdError::dim("data channels do not match the model"));
    }
    if x0.len() != model.n_x() {
        return Err(SysIdError::dim("initial state has wrong length"));
    }
    if !model.allow_unstable {
        let radius = model.predictor_radius();
        if radius >= STABILITY_LIMIT {
            return Err(SysIdError::Unstable { radius });
        }
    }
    let a_k = model.a_k();
    let b_u = &model.b - &model.k * &model.d;
    let mut x = x0.clone();
    let mut yhat = DMatrix::zeros(model.n_o(), data.len());
    for k in 0..data.len() {
        yhat.set_column(k, &(&model.c * &x + &model.d * data.u.column(k)));
        x = &a_k * &x + &b_u * data.u.column(k) + &model.k * data.y.column(k);
    }
    Ok(yhat)
}

/// `Γ_f = [C; CA; ...; CA^{f-1}]`.
pub fn extended_observability(model: &StateSpaceModel, f: usize) -> DMatrix<f64> {
    let (no, nx) = (model.n_o(), model.n_x());
    let mut out = DMatrix::zeros(f * no, nx);
    let mut block = model.c.clone();
    for m in 0..f {
        out.view_mut((m * no, 0), (no, nx)).copy_from(&block);
        block = &block * &model.a;
    }
    out
}

fn lower_toeplitz_from_blocks(blocks: &[DMatrix<f64>], rows: usize, cols: usize) -> DMatrix<f64> {
    let f = blocks.len();
    let mut out = DMatrix::zeros(f * rows, f * cols);
    for k in 0..f {
        for l in 0..=k {
            out.view_mut((k * rows, l * cols), (rows, cols))
                .copy_from(&blocks[k - l]);
        }
    }
    out
}

/// `H_f`: block lower Toeplitz with blocks `D, CB, CAB, ...`.
pub fn toeplitz_hf(model: &StateSpaceModel, f: usize) -> DMatrix<f64> {
    lower_toeplitz_from_blocks(&model.markov_parameters(f), model.n_o(), model.n_i())
}

/// `G_f`: block lower Toeplitz with blocks `I, CK, CAK, ...`, right-multiplied
/// by `I_f ⊗ Σ^{1/2}`.
pub fn toeplitz_gf(model: &StateSpaceModel, f: usize) -> Result<DMatrix<f64>> {
    let no = model.n_o();
    let mut blocks = Vec::with_capacity(f);
    if f > 0 {
        blocks.push(DMatrix::identity(no, no));
    }
    let mut apow_k = model.k.clone();
    for _ in 1..f {
        blocks.push(&model.c * &apow_k);
        apow_k = &model.a * apow_k;
    }
    let root = sym_sqrt(&model.sigma)?;
    let scale = DMatrix::<f64>::identity(f, f).kronecker(&root);
    Ok(lower_toeplitz_from_blocks(&blocks, no, no) * scale)
}

/// `H_fp = [Γ_f L_p^(1), Γ_f L_p^(2)]` together with its factors.
#[derive(Clone, Debug)]
pub struct MarkovFactors {
    pub hfp: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    /// `L_p = [L_p^(1), L_p^(2)]`, `n_x x p(n_i + n_o)`.
    pub lp: DMatrix<f64>,
    pub lp1: DMatrix<f64>,
    pub lp2: DMatrix<f64>,
}

/// `L_p^(i) = [A_K^{p-1} B_K^(i), ..., A_K B_K^(i), B_K^(i)]` with
/// `B_K^(1) = B - KD`, `B_K^(2) = K`; columns ordered like `Z_p = [U_p; Y_p]`.
pub fn markov_hfp(model: &StateSpaceModel, f: usize, p: usize) -> MarkovFactors {
    let (nx, ni, no) = (model.n_x(), model.n_i(), model.n_o());
    let a_k = model.a_k();
    let bk1 = &model.b - &model.k * &model.d;
    let bk2 = model.k.clone();
    let mut lp1 = DMatrix::zeros(nx, p * ni);
    let mut lp2 = DMatrix::zeros(nx, p * no);
    let mut b1 = bk1;
    let mut b2 = bk2;
    for m in (0..p).rev() {
        lp1.columns_mut(m * ni, ni).copy_from(&b1);
        lp2.columns_mut(m * no, no).copy_from(&b2);
        b1 = &a_k * b1;
        b2 = &a_k * b2;
    }
    let mut lp = DMatrix::zeros(nx, p * (ni + no));
    lp.columns_mut(0, p * ni).copy_from(&lp1);
    lp.columns_mut(p * ni, p * no).copy_from(&lp2);
    let gamma = extended_observability(model, f);
    MarkovFactors {
        hfp: &gamma * &lp,
        gamma,
        lp,
        lp1,
        lp2,
    }
}

/// Example MIMO system used by the tests, benches and the CLI presets:
/// three states, two inputs, two outputs, predictor radius below 0.6.
pub fn demo_mimo(noise_std: f64) -> StateSpaceModel {
    let a = DMatrix::from_row_slice(3, 3, &[0.70, 0.20, 0.00, -0.20, 0.70, 0.10, 0.00, 0.10, 0.50]);
    let b = DMatrix::from_row_slice(3, 2, &[2.0, 0.0, 0.0, 2.0, 1.0, 1.5]);
    let c = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.5, 0.0, 1.0, -0.5]);
    let d = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.0]);
    let k = DMatrix::from_row_slice(3, 2, &[0.30, 0.00, 0.00, 0.30, 0.10, -0.10]);
    let sigma = DMatrix::identity(2, 2) * (noise_std * noise_std);
    StateSpaceModel::new(a, b, c, d, k, sigma).expect("demo model is valid")
}

/// First-order SISO example.
pub fn demo_siso(noise_std: f64) -> StateSpaceModel {
    StateSpaceModel::new(
        DMatrix::from_element(1, 1, 0.8),
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_element(1, 1, 0.0),
        DMatrix::from_element(1, 1, 0.4),
        DMatrix::from_element(1, 1, noise_std * noise_std),
    )
    .expect("demo model is valid")
}
