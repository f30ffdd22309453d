//! Structured linear algebra: block Hankel and block lower triangular
//! Toeplitz matrices, the 0/1 selector matrices that map generating
//! sequences onto them, block vectorization, truncated SVD and the
//! pseudo-determinant.
//!
//! Vectorization is column-major everywhere, matching nalgebra's storage.

use nalgebra::{DMatrix, DMatrixView, DVector};

use crate::error::{Result, SysIdError};

/// Default relative cutoff for the pseudo-determinant.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-12;

/// Block lower triangular Toeplitz matrix stored by its first block column.
///
/// Block `(k, l)` of the expanded matrix equals block `k - l` of the first
/// block column for `k >= l` (0-based), and zero above the block diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockToeplitzLower {
    first_block_column: DMatrix<f64>,
    block_rows: usize,
    block_cols: usize,
    num_blocks: usize,
}

impl BlockToeplitzLower {
    /// `first_block_column` is `(num_blocks * block_rows) x block_cols`.
    pub fn new(first_block_column: DMatrix<f64>, num_blocks: usize) -> Result<Self> {
        if num_blocks == 0 || !first_block_column.nrows().is_multiple_of(num_blocks) {
            return Err(SysIdError::dim(format!(
                "first block column with {} rows does not split into {num_blocks} blocks",
                first_block_column.nrows()
            )));
        }
        let block_rows = first_block_column.nrows() / num_blocks;
        let block_cols = first_block_column.ncols();
        Ok(Self {
            first_block_column,
            block_rows,
            block_cols,
            num_blocks,
        })
    }

    pub fn identity(block_size: usize, num_blocks: usize) -> Self {
        let mut col = DMatrix::zeros(block_size * num_blocks, block_size);
        col.view_mut((0, 0), (block_size, block_size)).fill_with_identity();
        Self {
            first_block_column: col,
            block_rows: block_size,
            block_cols: block_size,
            num_blocks,
        }
    }

    /// Reads the first block column out of a dense matrix; does not check
    /// that the rest of `dense` is Toeplitz.
    pub fn from_dense(dense: &DMatrix<f64>, block_rows: usize, block_cols: usize) -> Result<Self> {
        if block_rows == 0 || !dense.nrows().is_multiple_of(block_rows) {
            return Err(SysIdError::dim(
                "dense matrix rows are not a multiple of the block size",
            ));
        }
        let i = dense.nrows() / block_rows;
        if dense.ncols() != i * block_cols {
            return Err(SysIdError::dim("dense matrix is not square in blocks"));
        }
        Self::new(dense.columns(0, block_cols).into_owned(), i)
    }

    pub fn first_block_column(&self) -> &DMatrix<f64> {
        &self.first_block_column
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    pub fn block_rows(&self) -> usize {
        self.block_rows
    }

    pub fn block_cols(&self) -> usize {
        self.block_cols
    }

    /// Block `k` (0-based) of the first block column.
    pub fn block(&self, k: usize) -> DMatrixView<'_, f64> {
        self.first_block_column
            .view((k * self.block_rows, 0), (self.block_rows, self.block_cols))
    }

    pub fn expand(&self) -> DMatrix<f64> {
        let (br, bc, i) = (self.block_rows, self.block_cols, self.num_blocks);
        let mut out = DMatrix::zeros(i * br, i * bc);
        for k in 0..i {
            for l in 0..=k {
                out.view_mut((k * br, l * bc), (br, bc)).copy_from(&self.block(k - l));
            }
        }
        out
    }

    fn require_square(&self) -> Result<()> {
        if self.block_rows != self.block_cols {
            return Err(SysIdError::dim("operation needs square blocks"));
        }
        Ok(())
    }

    /// Determinant of the leading block; the matrix is nonsingular iff this is nonzero.
    pub fn leading_block_det(&self) -> Result<f64> {
        self.require_square()?;
        Ok(self.block(0).into_owned().determinant())
    }

    /// `ln |det T_1|`, computed through an LU factorization.
    pub fn log_abs_leading_det(&self) -> Result<f64> {
        self.require_square()?;
        let lu = self.block(0).into_owned().lu();
        let u = lu.u();
        Ok(u.diagonal().iter().map(|d| d.abs().ln()).sum())
    }

    /// Inverse by block forward substitution on the first block column.
    pub fn inverse(&self) -> Result<Self> {
        self.require_square()?;
        let nb = self.block_rows;
        let inv1 = self
            .block(0)
            .into_owned()
            .try_inverse()
            .ok_or_else(|| SysIdError::Singular("leading Toeplitz block".into()))?;
        let mut out = DMatrix::zeros(self.num_blocks * nb, nb);
        out.view_mut((0, 0), (nb, nb)).copy_from(&inv1);
        for k in 1..self.num_blocks {
            let mut acc = DMatrix::zeros(nb, nb);
            for l in 1..=k {
                acc += self.block(l) * out.view(((k - l) * nb, 0), (nb, nb));
            }
            out.view_mut((k * nb, 0), (nb, nb)).copy_from(&(-&inv1 * acc));
        }
        Self::new(out, self.num_blocks)
    }

    /// Product of two block lower Toeplitz matrices (again block lower Toeplitz).
    pub fn mul(&self, rhs: &Self) -> Result<Self> {
        if self.block_cols != rhs.block_rows || self.num_blocks != rhs.num_blocks {
            return Err(SysIdError::dim("incompatible block Toeplitz product"));
        }
        let (br, bc) = (self.block_rows, rhs.block_cols);
        let mut out = DMatrix::zeros(self.num_blocks * br, bc);
        for k in 0..self.num_blocks {
            let mut acc = DMatrix::zeros(br, bc);
            for l in 0..=k {
                acc += self.block(k - l) * rhs.block(l);
            }
            out.view_mut((k * br, 0), (br, bc)).copy_from(&acc);
        }
        Self::new(out, self.num_blocks)
    }

    /// Right-multiply every block by `s`, i.e. `T (I_i ⊗ s)`.
    pub fn right_scale(&self, s: &DMatrix<f64>) -> Result<Self> {
        if s.nrows() != self.block_cols {
            return Err(SysIdError::dim("scaling block has wrong size"));
        }
        Self::new(&self.first_block_column * s, self.num_blocks)
    }
}

/// Expanded dense form of `t`.
pub fn toeplitz_expand(t: &BlockToeplitzLower) -> DMatrix<f64> {
    t.expand()
}

/// Exact structural predicate: block lower triangular and constant along
/// block diagonals, up to `tol` in absolute value.
pub fn is_block_lower_toeplitz(m: &DMatrix<f64>, block_rows: usize, block_cols: usize, tol: f64) -> bool {
    if block_rows == 0
        || block_cols == 0
        || !m.nrows().is_multiple_of(block_rows)
        || !m.ncols().is_multiple_of(block_cols)
    {
        return false;
    }
    let i = m.nrows() / block_rows;
    if m.ncols() / block_cols != i {
        return false;
    }
    for k in 0..i {
        for l in 0..i {
            let blk = m.view((k * block_rows, l * block_cols), (block_rows, block_cols));
            let reference = if k >= l {
                m.view(((k - l) * block_rows, 0), (block_rows, block_cols)).into_owned()
            } else {
                DMatrix::zeros(block_rows, block_cols)
            };
            if (blk - reference).amax() > tol {
                return false;
            }
        }
    }
    true
}

/// Rebuild a block lower triangular Toeplitz matrix from its last block row.
///
/// `row` is `block_rows x (i * block_cols)`; output block `(k, l)` equals
/// row block `i - 1 - (k - l)` for `k >= l` (0-based).
pub fn toeplitz_from_last_block_row(
    row: &DMatrix<f64>,
    i: usize,
    block_rows: usize,
    block_cols: usize,
) -> Result<DMatrix<f64>> {
    if row.nrows() != block_rows || row.ncols() != i * block_cols {
        return Err(SysIdError::dim(format!(
            "last block row is {}x{}, expected {block_rows}x{}",
            row.nrows(),
            row.ncols(),
            i * block_cols
        )));
    }
    let mut first = DMatrix::zeros(i * block_rows, block_cols);
    for d in 0..i {
        first
            .view_mut((d * block_rows, 0), (block_rows, block_cols))
            .copy_from(&row.view((0, (i - 1 - d) * block_cols), (block_rows, block_cols)));
    }
    Ok(BlockToeplitzLower::new(first, i)?.expand())
}

/// Which triangle a scalar Toeplitz selector generates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Triangle {
    /// Lower triangular, parameterized by its first column.
    Lower,
    /// Upper triangular, parameterized by its first row.
    Upper,
}

/// The `i² x i` 0/1 matrix mapping the generating sequence of a triangular
/// Toeplitz matrix to its vectorization.
#[derive(Clone, Debug)]
pub struct SelectorT {
    dim: usize,
    triangle: Triangle,
}

impl SelectorT {
    /// `vec(G) = T g` for lower triangular Toeplitz `G` with first column `g`.
    pub fn lower(dim: usize) -> Self {
        Self {
            dim,
            triangle: Triangle::Lower,
        }
    }

    /// `vec(U) = T u` for upper triangular Toeplitz `U` with first row `u`.
    pub fn upper(dim: usize) -> Self {
        Self {
            dim,
            triangle: Triangle::Upper,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Source index in the generator for vec position `(row r, col c)`.
    fn source(&self, r: usize, c: usize) -> Option<usize> {
        match self.triangle {
            Triangle::Lower if r >= c => Some(r - c),
            Triangle::Upper if c >= r => Some(c - r),
            _ => None,
        }
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let i = self.dim;
        let mut t = DMatrix::zeros(i * i, i);
        for c in 0..i {
            for r in 0..i {
                if let Some(s) = self.source(r, c) {
                    t[(c * i + r, s)] = 1.0;
                }
            }
        }
        t
    }

    /// Index-gather form of `T g`.
    pub fn apply(&self, g: &DVector<f64>) -> DVector<f64> {
        let i = self.dim;
        DVector::from_fn(i * i, |idx, _| {
            let (c, r) = (idx / i, idx % i);
            self.source(r, c).map_or(0.0, |s| g[s])
        })
    }
}

/// The `ij x (i+j-1)` 0/1 matrix mapping a sequence to the vectorization of
/// the `i x j` Hankel matrix whose entry `(m, n)` is `v[m + n]`.
#[derive(Clone, Debug)]
pub struct SelectorH {
    rows: usize,
    cols: usize,
}

impl SelectorH {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols }
    }

    pub fn seq_len(&self) -> usize {
        self.rows + self.cols - 1
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let (i, j) = (self.rows, self.cols);
        let mut h = DMatrix::zeros(i * j, self.seq_len());
        for n in 0..j {
            for m in 0..i {
                h[(n * i + m, m + n)] = 1.0;
            }
        }
        h
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let i = self.rows;
        DVector::from_fn(i * self.cols, |idx, _| v[idx / i + idx % i])
    }

    /// `H^T x`: sums of `x` along anti-diagonals of the reshaped Hankel.
    pub fn apply_transpose(&self, x: &DVector<f64>) -> DVector<f64> {
        let i = self.rows;
        let mut out = DVector::zeros(self.seq_len());
        for (idx, v) in x.iter().enumerate() {
            out[idx / i + idx % i] += v;
        }
        out
    }

    /// Diagonal of `H^T H`: how many Hankel entries each sequence element fills.
    pub fn gram_diagonal(&self) -> DVector<f64> {
        DVector::from_fn(self.seq_len(), |t, _| {
            let lo = t.saturating_sub(self.cols - 1);
            let hi = t.min(self.rows - 1);
            (hi + 1 - lo) as f64
        })
    }
}

/// Block Hankel matrix from the columns of `signal` (`d x T`): block
/// `(m, n)` is `signal[:, start + m + n]`.
pub fn build_block_hankel(signal: &DMatrix<f64>, rows: usize, cols: usize, start: usize) -> Result<DMatrix<f64>> {
    let d = signal.nrows();
    if rows == 0 || cols == 0 {
        return Err(SysIdError::InvalidArgument("Hankel dimensions must be positive".into()));
    }
    let required = start + rows + cols - 1;
    if signal.ncols() < required {
        return Err(SysIdError::InsufficientData {
            what: "block Hankel matrix",
            required,
            available: signal.ncols(),
        });
    }
    let mut out = DMatrix::zeros(rows * d, cols);
    for n in 0..cols {
        for m in 0..rows {
            out.view_mut((m * d, n), (d, 1))
                .copy_from(&signal.column(start + m + n));
        }
    }
    Ok(out)
}

/// Stack the block columns of `p` (each `block_width` wide) vertically.
pub fn block_vec(p: &DMatrix<f64>, block_width: usize) -> Result<DMatrix<f64>> {
    if block_width == 0 || !p.ncols().is_multiple_of(block_width) {
        return Err(SysIdError::dim(format!(
            "{} columns are not divisible by block width {block_width}",
            p.ncols()
        )));
    }
    let k = p.ncols() / block_width;
    let m = p.nrows();
    let mut out = DMatrix::zeros(k * m, block_width);
    for b in 0..k {
        out.view_mut((b * m, 0), (m, block_width))
            .copy_from(&p.columns(b * block_width, block_width));
    }
    Ok(out)
}

/// Leading `r` singular triplets, singular values in descending order.
#[derive(Clone, Debug)]
pub struct TruncatedSvd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
    /// Every singular value of the input, descending.
    pub profile: DVector<f64>,
}

impl TruncatedSvd {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.u * DMatrix::from_diagonal(&self.s) * self.v.transpose()
    }
}

pub fn truncated_svd(m: &DMatrix<f64>, r: usize) -> Result<TruncatedSvd> {
    let k = m.nrows().min(m.ncols());
    if r > k {
        return Err(SysIdError::InvalidArgument(format!(
            "rank {r} exceeds min dimension {k} of a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let profile = DVector::from_iterator(order.len(), order.iter().map(|&o| svd.singular_values[o]));
    let mut uu = DMatrix::zeros(m.nrows(), r);
    let mut vv = DMatrix::zeros(m.ncols(), r);
    for (dst, &src) in order.iter().take(r).enumerate() {
        uu.set_column(dst, &u.column(src));
        vv.set_column(dst, &vt.row(src).transpose());
    }
    Ok(TruncatedSvd {
        u: uu,
        s: profile.rows(0, r).into_owned(),
        v: vv,
        profile,
    })
}

/// `ln |M|_+`: log of the product of singular values above
/// `rank_tolerance * σ_max`. Returns `-inf` for the zero matrix.
pub fn log_pseudo_determinant(m: &DMatrix<f64>, rank_tolerance: f64) -> f64 {
    let sv = m.clone().singular_values();
    let smax = sv.max();
    if smax <= 0.0 {
        return f64::NEG_INFINITY;
    }
    sv.iter().filter(|&&s| s > rank_tolerance * smax).map(|s| s.ln()).sum()
}

/// Product of the singular values above `rank_tolerance * σ_max`.
pub fn pseudo_determinant(m: &DMatrix<f64>, rank_tolerance: f64) -> f64 {
    log_pseudo_determinant(m, rank_tolerance).exp()
}

/// Numerical rank with a relative singular-value cutoff.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = m.clone().singular_values();
    let smax = sv.max();
    sv.iter().filter(|&&s| s > rel_tol * smax && s > 0.0).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn scalar_hankel() {
        let s = dmatrix![1.0, 2.0, 3.0, 4.0];
        let h = build_block_hankel(&s, 2, 3, 0).unwrap();
        assert_eq!(h, dmatrix![1.0, 2.0, 3.0; 2.0, 3.0, 4.0]);
    }

    #[test]
    fn vector_hankel() {
        let s = dmatrix![1.0, 0.0, 1.0; 0.0, 1.0, 1.0];
        let h = build_block_hankel(&s, 2, 2, 0).unwrap();
        assert_eq!(h, dmatrix![1.0, 0.0; 0.0, 1.0; 0.0, 1.0; 1.0, 1.0]);
    }

    #[test]
    fn hankel_antidiagonals_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = rand_mat(&mut rng, 1, 12);
        let h = build_block_hankel(&s, 3, 5, 2).unwrap();
        for a in 0..3 {
            for b in 0..5 {
                for c in 0..3 {
                    for d in 0..5 {
                        if a + b == c + d {
                            assert_eq!(h[(a, b)], h[(c, d)]);
                        }
                    }
                }
            }
        }
        assert_eq!(h[(0, 0)], s[(0, 2)]);
    }

    #[test]
    fn hankel_reports_shortfall() {
        let s = DMatrix::<f64>::zeros(1, 4);
        match build_block_hankel(&s, 3, 3, 0) {
            Err(SysIdError::InsufficientData {
                required, available, ..
            }) => {
                assert_eq!((required, available), (5, 4));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn expand_identity_and_scalar() {
        let t = BlockToeplitzLower::identity(2, 2);
        assert_eq!(t.expand(), DMatrix::identity(4, 4));
        let s = BlockToeplitzLower::new(dmatrix![1.0; 2.0; 3.0], 3).unwrap();
        assert_eq!(s.expand(), dmatrix![1.0, 0.0, 0.0; 2.0, 1.0, 0.0; 3.0, 2.0, 1.0]);
    }

    #[test]
    fn expand_matches_selector() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for i in 1..7 {
            let g = rand_mat(&mut rng, i, 1);
            let t = BlockToeplitzLower::new(g.clone(), i).unwrap();
            let via_selector = SelectorT::lower(i).dense() * &g;
            let direct = crate::linalg::vec(&t.expand());
            assert!((via_selector.column(0) - direct).amax() < 1e-12);
        }
    }

    #[test]
    fn last_block_row_reconstruction() {
        let row = dmatrix![3.0, 2.0, 1.0];
        let t = toeplitz_from_last_block_row(&row, 3, 1, 1).unwrap();
        assert_eq!(t, dmatrix![1.0, 0.0, 0.0; 2.0, 1.0, 0.0; 3.0, 2.0, 1.0]);
        let single = dmatrix![1.0, 2.0; 3.0, 4.0];
        assert_eq!(toeplitz_from_last_block_row(&single, 1, 2, 2).unwrap(), single);
        assert!(toeplitz_from_last_block_row(&single, 3, 2, 2).is_err());
    }

    #[test]
    fn pseudo_determinant_basics() {
        assert!((pseudo_determinant(&DMatrix::identity(3, 3), DEFAULT_RANK_TOLERANCE) - 1.0).abs() < 1e-12);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0, 0.0]));
        assert!((pseudo_determinant(&d, DEFAULT_RANK_TOLERANCE) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn block_vec_examples() {
        let p = dmatrix![1.0, 2.0, 3.0, 4.0; 5.0, 6.0, 7.0, 8.0];
        assert_eq!(
            block_vec(&p, 2).unwrap(),
            dmatrix![1.0, 2.0; 5.0, 6.0; 3.0, 4.0; 7.0, 8.0]
        );
        assert_eq!(block_vec(&p, 4).unwrap(), p);
        assert!(block_vec(&p, 3).is_err());
    }

    #[test]
    fn block_vec_product_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = rand_mat(&mut rng, 4, 3);
        let r = rand_mat(&mut rng, 3, 6);
        let lhs = block_vec(&(&q * &r), 2).unwrap();
        let rhs = DMatrix::<f64>::identity(3, 3).kronecker(&q) * block_vec(&r, 2).unwrap();
        assert!((lhs - rhs).amax() < 1e-12);
    }

    #[test]
    fn truncated_svd_examples() {
        let u = dmatrix![1.0; 2.0; -1.0];
        let v = dmatrix![0.5; 3.0];
        let m = &u * v.transpose();
        let t = truncated_svd(&m, 1).unwrap();
        assert!((t.reconstruct() - &m).norm() < 1e-12);

        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![5.0, 3.0, 1.0]));
        let t = truncated_svd(&d, 2).unwrap();
        let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![5.0, 3.0, 0.0]));
        assert!((t.reconstruct() - expect).norm() < 1e-12);
        assert!(truncated_svd(&d, 4).is_err());
    }

    #[test]
    fn truncated_svd_error_matches_tail() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = rand_mat(&mut rng, 8, 6);
        let t = truncated_svd(&m, 3).unwrap();
        // full-SVD oracle
        let sv = m.clone().singular_values();
        let mut sorted: Vec<f64> = sv.iter().copied().collect();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let tail: f64 = sorted[3..].iter().map(|s| s * s).sum::<f64>().sqrt();
        assert!(((t.reconstruct() - &m).norm() - tail).abs() < 1e-10);
        assert!((t.u.transpose() * &t.u - DMatrix::identity(3, 3)).amax() < 1e-12);
        assert!((t.v.transpose() * &t.v - DMatrix::identity(3, 3)).amax() < 1e-12);
        assert!(t.s[0] >= t.s[1] && t.s[1] >= t.s[2] && t.s[2] >= 0.0);
    }

    #[test]
    fn selector_t_columns() {
        for i in 1..7 {
            let t = SelectorT::lower(i).dense();
            for k in 0..i {
                assert_eq!(t.column(k).sum() as usize, i - k);
            }
            // disjoint supports
            let gram = t.transpose() * &t;
            assert_eq!(
                gram.clone() - DMatrix::from_diagonal(&gram.diagonal()),
                DMatrix::zeros(i, i)
            );
        }
    }

    #[test]
    fn selector_gathers_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = SelectorH::new(3, 4);
        let v = DVector::from_fn(6, |_, _| rng.random_range(-1.0..1.0));
        assert_eq!(h.dense() * &v, h.apply(&v));
        let x = DVector::from_fn(12, |_, _| rng.random_range(-1.0..1.0));
        assert!((h.dense().transpose() * &x - h.apply_transpose(&x)).amax() < 1e-14);
        let g = h.dense().transpose() * h.dense();
        assert_eq!(
            DVector::from_iterator(6, g.diagonal().iter().copied()),
            h.gram_diagonal()
        );
        let t = SelectorT::upper(4);
        let u = DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
        assert_eq!(t.dense() * &u, t.apply(&u));
    }

    #[test]
    fn inverse_and_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut col = rand_mat(&mut rng, 6, 2);
        col[(0, 0)] += 3.0;
        col[(1, 1)] += 3.0;
        let t = BlockToeplitzLower::new(col, 3).unwrap();
        let inv = t.inverse().unwrap();
        let prod = t.mul(&inv).unwrap();
        assert!((prod.expand() - DMatrix::identity(6, 6)).amax() < 1e-12);
        assert!(is_block_lower_toeplitz(&inv.expand(), 2, 2, 1e-12));
    }

    #[test]
    fn singular_leading_block_rejected() {
        let t = BlockToeplitzLower::new(dmatrix![0.0; 1.0], 2).unwrap();
        assert!(t.inverse().is_err());
    }
}
