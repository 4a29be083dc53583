//! Quadratic manifolds: a linear encoder paired with a linear-plus-quadratic
//! decoder `g(z) = V z + W h(z)`, where `h` is the condensed Kronecker
//! product of the reduced coordinates.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::numerics::{blockwise_ridge, check_finite, DenseMatrix, RidgeBlock, SvdFactors};

/// Number of condensed quadratic features of an `r`-dimensional vector.
pub fn feature_count(r: usize) -> usize {
    r * (r + 1) / 2
}

/// Position of the product `x_i * x_j` (`i <= j`, zero-based) in the
/// condensed Kronecker feature vector.
pub fn feature_position(r: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < r);
    i * r - i * i.saturating_sub(1) / 2 + (j - i)
}

/// `[x1 x1, x1 x2, ..., x1 xr, x2 x2, ..., xr xr]`.
pub fn quad_features(x: &[f64]) -> Vec<f64> {
    let r = x.len();
    let mut out = Vec::with_capacity(feature_count(r));
    for i in 0..r {
        for j in i..r {
            out.push(x[i] * x[j]);
        }
    }
    out
}

/// Applies [`quad_features`] to every column.
pub fn quad_features_matrix(x: &DenseMatrix) -> DenseMatrix {
    let r = x.nrows();
    let mut out = DenseMatrix::zeros(feature_count(r), x.ncols());
    for (c, col) in x.column_iter().enumerate() {
        let mut row = 0;
        for i in 0..r {
            let xi = col[i];
            for j in i..r {
                out[(row, c)] = xi * col[j];
                row += 1;
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ManifoldKind {
    /// Plain subspace: `W = 0`.
    Linear,
    Quadratic,
}

impl ManifoldKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ManifoldKind::Linear => "linear",
            ManifoldKind::Quadratic => "quadratic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ManifoldKind::Linear),
            "quadratic" => Ok(ManifoldKind::Quadratic),
            other => Err(Error::invalid(format!("unknown manifold kind `{other}`"))),
        }
    }
}

/// Scaling of the reduced coordinates.
///
/// `Isotropic` divides each selected left singular vector by its singular
/// value in the encoder (and multiplies in the decoder), so every row of the
/// encoded training trajectory has unit 2-norm. `Unscaled` uses the plain
/// orthonormal singular vectors on both sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Coordinates {
    #[default]
    Isotropic,
    Unscaled,
}

impl Coordinates {
    pub fn as_str(self) -> &'static str {
        match self {
            Coordinates::Isotropic => "isotropic",
            Coordinates::Unscaled => "unscaled",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "isotropic" => Ok(Coordinates::Isotropic),
            "unscaled" => Ok(Coordinates::Unscaled),
            other => Err(Error::invalid(format!("unknown coordinate scaling `{other}`"))),
        }
    }

    /// Factor by which singular vector `j` is scaled in the encoded
    /// training trajectory relative to the corresponding row of `right^T`.
    pub(crate) fn row_scale(self, sigma: f64) -> f64 {
        match self {
            Coordinates::Isotropic => 1.0,
            Coordinates::Unscaled => sigma,
        }
    }
}

/// Encoded states, one reduced state per column.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedTrajectory {
    states: DenseMatrix,
}

impl ReducedTrajectory {
    pub fn new(states: DenseMatrix) -> Result<Self> {
        check_finite(&states, "reduced trajectory")?;
        Ok(Self { states })
    }

    pub fn states(&self) -> &DenseMatrix {
        &self.states
    }

    pub fn into_inner(self) -> DenseMatrix {
        self.states
    }

    /// Reduced dimension `r`.
    pub fn dim(&self) -> usize {
        self.states.nrows()
    }

    /// Number of time steps.
    pub fn len(&self) -> usize {
        self.states.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.states.ncols() == 0
    }

    pub fn column(&self, j: usize) -> DVector<f64> {
        self.states.column(j).into_owned()
    }

    /// Largest 2-norm over the columns.
    pub fn max_column_norm(&self) -> f64 {
        self.states.column_iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// Encoder/decoder pair built from selected left singular vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticManifold {
    indices: Vec<usize>,
    encoder_basis: DenseMatrix,
    decoder_basis: DenseMatrix,
    coeffs: DenseMatrix,
    gamma: f64,
    kind: ManifoldKind,
    coordinates: Coordinates,
}

impl QuadraticManifold {
    /// Assembles a manifold from stored parts, checking shapes.
    pub fn from_parts(
        indices: Vec<usize>,
        encoder_basis: DenseMatrix,
        decoder_basis: DenseMatrix,
        coeffs: DenseMatrix,
        gamma: f64,
        kind: ManifoldKind,
        coordinates: Coordinates,
    ) -> Result<Self> {
        let r = indices.len();
        if r == 0 {
            return Err(Error::invalid("a manifold needs at least one basis vector"));
        }
        check_distinct(&indices)?;
        let n = encoder_basis.nrows();
        if encoder_basis.shape() != (n, r) || decoder_basis.shape() != (n, r) {
            return Err(Error::dims(format!(
                "bases must be {n}x{r}, got {:?} and {:?}",
                encoder_basis.shape(),
                decoder_basis.shape()
            )));
        }
        if coeffs.shape() != (n, feature_count(r)) {
            return Err(Error::dims(format!(
                "coefficient matrix must be {n}x{}, got {:?}",
                feature_count(r),
                coeffs.shape()
            )));
        }
        if kind == ManifoldKind::Linear && coeffs.iter().any(|v| *v != 0.0) {
            return Err(Error::invalid("linear manifolds must have zero coefficients"));
        }
        if !(gamma >= 0.0) {
            return Err(Error::invalid("gamma must be nonnegative"));
        }
        Ok(Self {
            indices,
            encoder_basis,
            decoder_basis,
            coeffs,
            gamma,
            kind,
            coordinates,
        })
    }

    /// Linear subspace spanned by the selected left singular vectors.
    pub fn linear(svd: &SvdFactors, indices: &[usize], coordinates: Coordinates) -> Result<Self> {
        let (encoder_basis, decoder_basis) = build_bases(svd, indices, coordinates)?;
        let coeffs = DenseMatrix::zeros(svd.nrows(), feature_count(indices.len()));
        Ok(Self {
            indices: indices.to_vec(),
            encoder_basis,
            decoder_basis,
            coeffs,
            gamma: 0.0,
            kind: ManifoldKind::Linear,
            coordinates,
        })
    }

    /// Quadratic manifold on the selected singular vectors with `W` fitted
    /// by ridge regression at weight `gamma`.
    pub fn quadratic(svd: &SvdFactors, indices: &[usize], gamma: f64, coordinates: Coordinates) -> Result<Self> {
        let (encoder_basis, decoder_basis) = build_bases(svd, indices, coordinates)?;
        let coeffs = fit_coeffs(svd, indices, gamma, coordinates)?;
        Ok(Self {
            indices: indices.to_vec(),
            encoder_basis,
            decoder_basis,
            coeffs,
            gamma,
            kind: ManifoldKind::Quadratic,
            coordinates,
        })
    }

    /// Zero-based singular-vector indices in selection order.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn state_dim(&self) -> usize {
        self.encoder_basis.nrows()
    }

    pub fn encoder_basis(&self) -> &DenseMatrix {
        &self.encoder_basis
    }

    pub fn decoder_basis(&self) -> &DenseMatrix {
        &self.decoder_basis
    }

    pub fn coeffs(&self) -> &DenseMatrix {
        &self.coeffs
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn coordinates(&self) -> Coordinates {
        self.coordinates
    }

    /// `encoder_basis^T * S`.
    pub fn encode(&self, snapshots: &DenseMatrix) -> Result<ReducedTrajectory> {
        if snapshots.nrows() != self.state_dim() {
            return Err(Error::dims(format!(
                "snapshots have dimension {}, manifold expects {}",
                snapshots.nrows(),
                self.state_dim()
            )));
        }
        ReducedTrajectory::new(self.encoder_basis.tr_mul(snapshots))
    }

    pub fn encode_state(&self, state: &DVector<f64>) -> Result<DVector<f64>> {
        if state.len() != self.state_dim() {
            return Err(Error::dims(format!(
                "state has dimension {}, manifold expects {}",
                state.len(),
                self.state_dim()
            )));
        }
        Ok(self.encoder_basis.tr_mul(state))
    }

    /// `decoder_basis * Z + W * h(Z)`.
    pub fn decode(&self, reduced: &ReducedTrajectory) -> Result<DenseMatrix> {
        self.decode_states(reduced.states())
    }

    pub(crate) fn decode_states(&self, z: &DenseMatrix) -> Result<DenseMatrix> {
        if z.nrows() != self.dim() {
            return Err(Error::dims(format!(
                "reduced states have dimension {}, manifold has {}",
                z.nrows(),
                self.dim()
            )));
        }
        let mut out = &self.decoder_basis * z;
        if self.kind == ManifoldKind::Quadratic {
            out += &self.coeffs * quad_features_matrix(z);
        }
        Ok(out)
    }

    /// `||decode(encode(S)) - S||_F / ||S||_F`.
    pub fn recon_error(&self, snapshots: &DenseMatrix) -> Result<f64> {
        let norm = snapshots.norm();
        if norm == 0.0 {
            return Err(Error::invalid("relative error of a zero snapshot matrix"));
        }
        let reduced = self.encode(snapshots)?;
        let decoded = self.decode(&reduced)?;
        Ok((decoded - snapshots).norm() / norm)
    }
}

fn check_distinct(indices: &[usize]) -> Result<()> {
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid(format!("repeated singular-vector index in {indices:?}")));
    }
    Ok(())
}

pub(crate) fn check_indices(svd: &SvdFactors, indices: &[usize]) -> Result<()> {
    if indices.is_empty() {
        return Err(Error::invalid("no singular vectors selected"));
    }
    if let Some(&bad) = indices.iter().find(|&&j| j >= svd.rank()) {
        return Err(Error::invalid(format!(
            "singular-vector index {bad} out of range for rank {}",
            svd.rank()
        )));
    }
    check_distinct(indices)
}

/// Encoder and decoder bases for the selected (zero-based) indices.
///
/// With isotropic coordinates, encoder column `i` is `phi_j / sigma_j` and
/// decoder column `i` is `sigma_j * phi_j`.
pub fn build_bases(
    svd: &SvdFactors,
    indices: &[usize],
    coordinates: Coordinates,
) -> Result<(DenseMatrix, DenseMatrix)> {
    check_indices(svd, indices)?;
    let mut encoder = svd.left().select_columns(indices);
    let mut decoder = encoder.clone();
    if coordinates == Coordinates::Isotropic {
        for (c, &j) in indices.iter().enumerate() {
            let sigma = svd.singular_values()[j];
            encoder.column_mut(c).unscale_mut(sigma);
            decoder.column_mut(c).scale_mut(sigma);
        }
    }
    Ok((encoder, decoder))
}

/// Encoded training trajectory of the factored snapshots, computed from the
/// right singular vectors alone (`r x k`).
pub fn training_coordinates(svd: &SvdFactors, indices: &[usize], coordinates: Coordinates) -> DenseMatrix {
    let right = svd.right();
    let sigma = svd.singular_values();
    DenseMatrix::from_fn(indices.len(), right.nrows(), |i, t| {
        let j = indices[i];
        coordinates.row_scale(sigma[j]) * right[(t, j)]
    })
}

/// Complement of `indices` in `0..rank`, ascending.
pub(crate) fn complement(rank: usize, indices: &[usize]) -> Vec<usize> {
    let mut selected = vec![false; rank];
    for &j in indices {
        selected[j] = true;
    }
    (0..rank).filter(|&j| !selected[j]).collect()
}

/// Ridge fit of the quadratic coefficient matrix `W` (`n x r(r+1)/2`).
///
/// `W` is defined by the decoder convention `g(z) = V z + W h(z)`, i.e. it
/// regresses the linear residual `S - V V_enc^T S` on the quadratic
/// features. The residual equals `Phi_out Sigma_out Psi_out^T`, so the
/// solve runs on the `(rank - r) x k` right-factor representation and is
/// lifted back with `Phi_out` afterwards.
pub fn fit_coeffs(svd: &SvdFactors, indices: &[usize], gamma: f64, coordinates: Coordinates) -> Result<DenseMatrix> {
    check_indices(svd, indices)?;
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::invalid(format!("gamma must be finite and >= 0, got {gamma}")));
    }
    let p = feature_count(indices.len());
    let out = complement(svd.rank(), indices);
    if out.is_empty() {
        return Ok(DenseMatrix::zeros(svd.nrows(), p));
    }
    let features = quad_features_matrix(&training_coordinates(svd, indices, coordinates));
    let sigma = svd.singular_values();
    let right = svd.right();
    let residual = DenseMatrix::from_fn(out.len(), right.nrows(), |i, t| sigma[out[i]] * right[(t, out[i])]);
    let w_out = blockwise_ridge(&features, &residual, &[RidgeBlock::new(p, gamma)])?;
    Ok(svd.left().select_columns(&out) * w_out)
}
