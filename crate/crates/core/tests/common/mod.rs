#![allow(dead_code)]

use nalgebra::DMatrix;
use qmrom::numerics::DenseMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries uniform on [-1, 1).
pub fn uniform(rng: &mut impl Rng, rows: usize, cols: usize) -> DenseMatrix {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Singular values and left singular vectors sorted by decreasing singular
/// value, straight from nalgebra's SVD of the full matrix.
pub fn reference_svd(s: &DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    let svd = s.clone().svd(true, false);
    let u = svd.u.expect("left vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma = order.iter().map(|&j| svd.singular_values[j]).collect();
    (sigma, u.select_columns(&order))
}

/// All pairwise products `x_i x_j`, `i <= j`, listed column by column in
/// the order (i, j) = (0,0), (1,0), (1,1), (2,0), ... which differs from the
/// library's ordering on purpose.
pub fn products(z: &DenseMatrix) -> DenseMatrix {
    let r = z.nrows();
    let mut out = DMatrix::zeros(r * (r + 1) / 2, z.ncols());
    for c in 0..z.ncols() {
        let mut row = 0;
        for i in 0..r {
            for j in 0..=i {
                out[(row, c)] = z[(i, c)] * z[(j, c)];
                row += 1;
            }
        }
    }
    out
}

/// `min_W ||R - W H||^2 + gamma ||W||^2` through the explicit normal
/// equations `W (H H^T + gamma I) = R H^T`.
pub fn ridge_objective(r: &DenseMatrix, h: &DenseMatrix, gamma: f64) -> f64 {
    let p = h.nrows();
    let gram = h * h.transpose() + DMatrix::identity(p, p) * gamma;
    let rhs = h * r.transpose();
    let w_t = gram.lu().solve(&rhs).expect("regularized Gram matrix is invertible");
    let w = w_t.transpose();
    (r - &w * h).norm_squared() + gamma * w.norm_squared()
}

/// Dense reconstruction objective for isotropic coordinates built from the
/// left singular vectors listed in `indices`.
pub fn dense_objective(s: &DenseMatrix, indices: &[usize], gamma: f64) -> f64 {
    let (sigma, u) = reference_svd(s);
    let u_in = u.select_columns(indices);
    let mut z = u_in.transpose() * s;
    for (row, &j) in indices.iter().enumerate() {
        z.row_mut(row).scale_mut(1.0 / sigma[j]);
    }
    let residual = s - &u_in * (u_in.transpose() * s);
    ridge_objective(&residual, &products(&z), gamma)
}
