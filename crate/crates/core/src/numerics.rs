//! Dense linear-algebra building blocks: a rank-revealing thin SVD and a
//! ridge least-squares solver with per-block Tikhonov weights.
//!
//! Matrices are `nalgebra::DMatrix<f64>`, which stores entries column-major.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Dense column-major matrix of `f64`.
pub type DenseMatrix = DMatrix<f64>;

/// Singular values below `DEFAULT_SVD_REL_TOL * sigma_1` are dropped.
pub const DEFAULT_SVD_REL_TOL: f64 = 1e-12;

/// Regularized Gram matrices with a larger condition estimate are rejected.
pub const MAX_CONDITION: f64 = 1e14;

/// Thin SVD `M = left * diag(singular_values) * right^T` truncated to the
/// numerically nonzero singular values.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors {
    left: DenseMatrix,
    singular_values: DVector<f64>,
    right: DenseMatrix,
}

impl SvdFactors {
    /// Assembles factors from parts. Used by deserialization and tests; no
    /// orthonormality check is made beyond shapes and ordering.
    pub fn from_parts(left: DenseMatrix, singular_values: DVector<f64>, right: DenseMatrix) -> Result<Self> {
        let m = singular_values.len();
        if m == 0 || left.ncols() != m || right.ncols() != m {
            return Err(Error::dims(format!(
                "left has {} columns, right {}, {} singular values",
                left.ncols(),
                right.ncols(),
                m
            )));
        }
        if singular_values.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::invalid("singular values must be finite and positive"));
        }
        if singular_values.as_slice().windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::invalid("singular values must be non-increasing"));
        }
        Ok(Self {
            left,
            singular_values,
            right,
        })
    }

    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// Number of rows of the factored matrix (state dimension).
    pub fn nrows(&self) -> usize {
        self.left.nrows()
    }

    /// Number of columns of the factored matrix (snapshot count).
    pub fn ncols(&self) -> usize {
        self.right.nrows()
    }

    pub fn left(&self) -> &DenseMatrix {
        &self.left
    }

    pub fn singular_values(&self) -> &DVector<f64> {
        &self.singular_values
    }

    pub fn right(&self) -> &DenseMatrix {
        &self.right
    }

    /// `diag(singular_values) * right^T`, i.e. the data expressed in the
    /// left singular basis (rank x k).
    pub fn scaled_right_t(&self) -> DenseMatrix {
        let mut out = self.right.transpose();
        for (mut row, s) in out.row_iter_mut().zip(self.singular_values.iter()) {
            row *= *s;
        }
        out
    }

    /// Reassembles `left * diag(singular_values) * right^T`.
    pub fn reconstruct(&self) -> DenseMatrix {
        &self.left * self.scaled_right_t()
    }
}

/// Rejects empty matrices and non-finite entries.
pub fn check_finite(m: &DenseMatrix, what: &str) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::invalid(format!("{what} is empty")));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("{what} has non-finite entries")));
    }
    Ok(())
}

/// Thin SVD truncated to singular values `>= rel_tol * sigma_1`.
///
/// Tall inputs go through a Householder QR followed by an SVD of the small
/// triangular factor; wide inputs are handled by transposition. This keeps
/// the trailing singular triplets accurate, which the Gram-matrix route
/// cannot do once `sigma_j / sigma_1` drops below the square root of machine
/// precision.
pub fn thin_svd(m: &DenseMatrix, rel_tol: f64) -> Result<SvdFactors> {
    check_finite(m, "matrix")?;
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::invalid(format!("rel_tol must lie in (0, 1), got {rel_tol}")));
    }
    if m.nrows() < m.ncols() {
        let t = thin_svd(&m.transpose(), rel_tol)?;
        return Ok(SvdFactors {
            left: t.right,
            singular_values: t.singular_values,
            right: t.left,
        });
    }

    let qr = m.clone().qr();
    let r = qr.r();
    let q = qr.q();
    let svd = r.svd(true, true);
    let u_small = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma_max = svd.singular_values[order[0]];
    if !(sigma_max > 0.0) {
        return Err(Error::ZeroMatrix);
    }
    let keep: Vec<usize> = order
        .into_iter()
        .take_while(|&j| svd.singular_values[j] >= rel_tol * sigma_max)
        .collect();

    let u_kept = u_small.select_columns(&keep);
    let left = &q * u_kept;
    let right = v_t.select_rows(&keep).transpose();
    let singular_values = DVector::from_iterator(keep.len(), keep.iter().map(|&j| svd.singular_values[j]));
    Ok(SvdFactors {
        left,
        singular_values,
        right,
    })
}

/// One column block of the regressor matrix and its Tikhonov weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RidgeBlock {
    pub size: usize,
    pub gamma: f64,
}

impl RidgeBlock {
    pub fn new(size: usize, gamma: f64) -> Self {
        Self { size, gamma }
    }
}

/// Cholesky factorization of `B B^T + diag(gamma_g I)`.
#[derive(Debug, Clone)]
pub struct RegularizedGram {
    chol: Cholesky<f64, Dyn>,
    condition: f64,
}

impl RegularizedGram {
    /// Builds and factors `B B^T + Gamma` for a `d x k` regressor matrix.
    pub fn new(regressors: &DenseMatrix, blocks: &[RidgeBlock]) -> Result<Self> {
        let d = regressors.nrows();
        let total: usize = blocks.iter().map(|b| b.size).sum();
        if total != d {
            return Err(Error::dims(format!(
                "ridge blocks cover {total} rows but the regressor matrix has {d}"
            )));
        }
        if blocks.iter().any(|b| !(b.gamma >= 0.0 && b.gamma.is_finite())) {
            return Err(Error::invalid("regularization weights must be finite and >= 0"));
        }
        let mut gram = regressors * regressors.transpose();
        let mut offset = 0;
        for block in blocks {
            for i in offset..offset + block.size {
                gram[(i, i)] += block.gamma;
            }
            offset += block.size;
        }
        Self::factor(gram)
    }

    /// Factors an already assembled symmetric matrix.
    pub fn factor(gram: DenseMatrix) -> Result<Self> {
        if gram.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("regularized Gram matrix".into()));
        }
        let chol = Cholesky::new(gram).ok_or(Error::Singular {
            condition: f64::INFINITY,
        })?;
        // diag(L)^2 ratio is a cheap lower bound on the 2-norm condition number.
        let diag = chol.l_dirty().diagonal();
        let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| {
            (lo.min(v.abs()), hi.max(v.abs()))
        });
        let condition = if lo > 0.0 { (hi / lo).powi(2) } else { f64::INFINITY };
        if !(condition <= MAX_CONDITION) {
            return Err(Error::Singular { condition });
        }
        Ok(Self { chol, condition })
    }

    pub fn condition_estimate(&self) -> f64 {
        self.condition
    }

    /// Solves `X (B B^T + Gamma) = cross` for `X`, where `cross = C B^T`.
    pub fn solve_right(&self, cross: &DenseMatrix) -> DenseMatrix {
        self.chol.solve(&cross.transpose()).transpose()
    }

    /// `tr(cross (B B^T + Gamma)^{-1} cross^T)`: the decrease of the ridge
    /// objective from its value at `X = 0`.
    pub fn explained_energy(&self, cross: &DenseMatrix) -> f64 {
        let l = self.chol.l();
        let y = l
            .solve_lower_triangular(&cross.transpose())
            .expect("Cholesky factor has a nonzero diagonal");
        y.norm_squared()
    }
}

/// Minimizes `||X B - C||_F^2 + sum_g gamma_g ||X_g||_F^2`, with `X_g` the
/// column blocks of `X` laid out according to `blocks`.
///
/// `B` is `d x k`, `C` is `m x k` and the result is `m x d`.
pub fn blockwise_ridge(regressors: &DenseMatrix, targets: &DenseMatrix, blocks: &[RidgeBlock]) -> Result<DenseMatrix> {
    if regressors.ncols() != targets.ncols() {
        return Err(Error::dims(format!(
            "regressors have {} samples, targets {}",
            regressors.ncols(),
            targets.ncols()
        )));
    }
    let gram = RegularizedGram::new(regressors, blocks)?;
    let cross = targets * regressors.transpose();
    Ok(gram.solve_right(&cross))
}

/// Optimal value of the ridge objective from [`blockwise_ridge`] given only
/// the cross product `C B^T` and `||C||_F^2`.
pub fn ridge_minimum(gram: &RegularizedGram, cross: &DenseMatrix, target_norm_sq: f64) -> f64 {
    (target_norm_sq - gram.explained_energy(cross)).max(0.0)
}
