//! Discrete-time quadratic reduced models fitted by operator inference:
//! `z_{j+1} = A z_j + H h(z_j)`.

use std::cmp::Ordering;
use std::fmt;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::manifold::{feature_count, quad_features, quad_features_matrix, QuadraticManifold, ReducedTrajectory};
use crate::numerics::{blockwise_ridge, check_finite, DenseMatrix, RidgeBlock};

/// Factor applied to the largest training-state norm to obtain the default
/// divergence guard of a rollout.
pub const GUARD_FACTOR: f64 = 1e6;

/// An error or objective value that is either finite or the divergence
/// sentinel. `Diverged` compares greater than every finite value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Score {
    Finite(f64),
    Diverged,
}

impl Score {
    pub fn value(self) -> Option<f64> {
        match self {
            Score::Finite(v) => Some(v),
            Score::Diverged => None,
        }
    }

    pub fn is_diverged(self) -> bool {
        matches!(self, Score::Diverged)
    }

    /// Finite value or `f64::INFINITY`, for reporting only.
    pub fn to_f64(self) -> f64 {
        self.value().unwrap_or(f64::INFINITY)
    }

    pub fn total_cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Score::Finite(a), Score::Finite(b)) => a.total_cmp(b),
            (Score::Finite(_), Score::Diverged) => Ordering::Less,
            (Score::Diverged, Score::Finite(_)) => Ordering::Greater,
            (Score::Diverged, Score::Diverged) => Ordering::Equal,
        }
    }

    /// Parses the textual form written by `Display`.
    pub fn parse(s: &str) -> Result<Self> {
        if s == "inf" {
            return Ok(Score::Diverged);
        }
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Score::Finite)
            .ok_or_else(|| Error::Format(format!("bad score `{s}`")))
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Score::Finite(v) => write!(f, "{v:?}"),
            Score::Diverged => f.write_str("inf"),
        }
    }
}

/// Linear and quadratic operators of a discrete-time reduced model.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedModel {
    a: DenseMatrix,
    h: DenseMatrix,
    gamma_a: f64,
    gamma_h: f64,
}

impl ReducedModel {
    pub fn new(a: DenseMatrix, h: DenseMatrix, gamma_a: f64, gamma_h: f64) -> Result<Self> {
        let r = a.nrows();
        if r == 0 || a.ncols() != r || h.shape() != (r, feature_count(r)) {
            return Err(Error::dims(format!(
                "operators must be r x r and r x r(r+1)/2, got {:?} and {:?}",
                a.shape(),
                h.shape()
            )));
        }
        check_finite(&a, "linear operator")?;
        check_finite(&h, "quadratic operator")?;
        Ok(Self { a, h, gamma_a, gamma_h })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn linear(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn quadratic(&self) -> &DenseMatrix {
        &self.h
    }

    pub fn gamma_a(&self) -> f64 {
        self.gamma_a
    }

    pub fn gamma_h(&self) -> f64 {
        self.gamma_h
    }

    /// One step `A z + H h(z)`.
    pub fn step(&self, z: &DVector<f64>) -> DVector<f64> {
        let features = DVector::from_vec(quad_features(z.as_slice()));
        &self.a * z + &self.h * features
    }
}

/// Least-squares fit of `[A H]` to consecutive pairs of a reduced trajectory,
/// with Tikhonov weights `gamma_a` on `A` and `gamma_h` on `H`.
pub fn fit(trajectory: &ReducedTrajectory, gamma_a: f64, gamma_h: f64) -> Result<ReducedModel> {
    let k = trajectory.len();
    if k < 2 {
        return Err(Error::invalid("operator inference needs at least two snapshots"));
    }
    let states = trajectory.states();
    let r = states.nrows();
    let p = feature_count(r);
    let previous = states.columns(0, k - 1).into_owned();
    let next = states.columns(1, k - 1).into_owned();

    let mut regressors = DenseMatrix::zeros(r + p, k - 1);
    regressors.rows_mut(0, r).copy_from(&previous);
    regressors.rows_mut(r, p).copy_from(&quad_features_matrix(&previous));

    let blocks = [RidgeBlock::new(r, gamma_a), RidgeBlock::new(p, gamma_h)];
    let operators = blockwise_ridge(&regressors, &next, &blocks)?;
    ReducedModel::new(
        operators.columns(0, r).into_owned(),
        operators.columns(r, p).into_owned(),
        gamma_a,
        gamma_h,
    )
}

/// Default divergence guard for rollouts of a model trained on `trajectory`.
pub fn default_guard(trajectory: &ReducedTrajectory) -> f64 {
    GUARD_FACTOR * trajectory.max_column_norm()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutResult {
    /// Predicted states, initial state first. Truncated at divergence.
    pub trajectory: DenseMatrix,
    pub diverged_at: Option<usize>,
}

impl RolloutResult {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }
}

/// Iterates the model from `initial` and returns `steps` states including
/// the initial one. The rollout stops at the first state whose norm exceeds
/// `guard` or that is not finite; that state and all later ones are absent.
pub fn rollout(model: &ReducedModel, initial: &DVector<f64>, steps: usize, guard: f64) -> RolloutResult {
    let r = model.dim();
    assert_eq!(initial.len(), r, "initial state has the wrong dimension");
    let mut trajectory = DenseMatrix::zeros(r, steps);
    if steps == 0 {
        return RolloutResult {
            trajectory,
            diverged_at: None,
        };
    }
    let mut features = DVector::zeros(feature_count(r));
    let mut state = initial.clone();
    let mut next = DVector::zeros(r);
    trajectory.set_column(0, &state);
    for j in 1..steps {
        let mut pos = 0;
        for a in 0..r {
            for b in a..r {
                features[pos] = state[a] * state[b];
                pos += 1;
            }
        }
        next.gemv(1.0, &model.a, &state, 0.0);
        next.gemv(1.0, &model.h, &features, 1.0);
        let norm = next.norm();
        if !(norm.is_finite() && norm <= guard) {
            return RolloutResult {
                trajectory: trajectory.columns(0, j).into_owned(),
                diverged_at: Some(j),
            };
        }
        std::mem::swap(&mut state, &mut next);
        trajectory.set_column(j, &state);
    }
    RolloutResult {
        trajectory,
        diverged_at: None,
    }
}

/// Relative error of the decoded rollout started from the encoded first
/// test snapshot: `||g(Z_hat) - S||_F / ||S||_F`. The encoded initial state
/// is the first compared column.
pub fn prediction_error(
    model: &ReducedModel,
    manifold: &QuadraticManifold,
    snapshots: &DenseMatrix,
    guard: f64,
) -> Result<Score> {
    let norm = snapshots.norm();
    if norm == 0.0 {
        return Err(Error::invalid("relative error of a zero snapshot matrix"));
    }
    if model.dim() != manifold.dim() {
        return Err(Error::dims(format!(
            "model dimension {} differs from manifold dimension {}",
            model.dim(),
            manifold.dim()
        )));
    }
    let initial = manifold.encode_state(&snapshots.column(0).into_owned())?;
    let result = rollout(model, &initial, snapshots.ncols(), guard);
    if result.diverged() {
        return Ok(Score::Diverged);
    }
    let decoded = manifold.decode_states(&result.trajectory)?;
    let err = (decoded - snapshots).norm() / norm;
    Ok(if err.is_finite() {
        Score::Finite(err)
    } else {
        Score::Diverged
    })
}

/// Fits one model per `(gamma_a, gamma_h)` pair and keeps the one with the
/// smallest score. Ties go to the lexicographically smallest pair.
/// Grid points are evaluated in parallel; the result does not depend on
/// scheduling.
pub fn grid_fit<F>(
    trajectory: &ReducedTrajectory,
    grid_a: &[f64],
    grid_h: &[f64],
    score: F,
) -> Result<(ReducedModel, Score)>
where
    F: Fn(&ReducedModel) -> Result<Score> + Sync,
{
    if grid_a.is_empty() || grid_h.is_empty() {
        return Err(Error::invalid("regularization grids must not be empty"));
    }
    let mut pairs: Vec<(f64, f64)> = grid_a
        .iter()
        .flat_map(|&a| grid_h.iter().map(move |&h| (a, h)))
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    pairs.dedup();

    let results: Vec<Result<(ReducedModel, Score)>> = pairs
        .par_iter()
        .map(|&(ga, gh)| {
            let model = fit(trajectory, ga, gh)?;
            let s = score(&model)?;
            Ok((model, s))
        })
        .collect();

    let mut best: Option<(ReducedModel, Score)> = None;
    for result in results {
        let (model, s) = result?;
        let better = match &best {
            None => true,
            Some((_, current)) => s.total_cmp(current) == Ordering::Less,
        };
        if better {
            best = Some((model, s));
        }
    }
    Ok(best.expect("grid is nonempty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::Coordinates;
    use crate::numerics::{thin_svd, DEFAULT_SVD_REL_TOL};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn traj(m: DenseMatrix) -> ReducedTrajectory {
        ReducedTrajectory::new(m).unwrap()
    }

    fn simulate(a: &DenseMatrix, h: &DenseMatrix, z0: &[f64], k: usize) -> DenseMatrix {
        let model = ReducedModel::new(a.clone(), h.clone(), 0.0, 0.0).unwrap();
        let mut out = DenseMatrix::zeros(z0.len(), k);
        let mut z = DVector::from_column_slice(z0);
        for j in 0..k {
            out.set_column(j, &z);
            z = model.step(&z);
        }
        out
    }

    #[test]
    fn zero_trajectory_gives_zero_operators() {
        let m = fit(&traj(DenseMatrix::zeros(3, 6)), 1e-3, 1e-3).unwrap();
        assert_eq!(m.linear(), &DenseMatrix::zeros(3, 3));
        assert_eq!(m.quadratic(), &DenseMatrix::zeros(3, 6));
    }

    #[test]
    fn recovers_linear_dynamics() {
        let a0 = DenseMatrix::from_row_slice(2, 2, &[0.95, -0.2, 0.2, 0.95]);
        let s = simulate(&a0, &DenseMatrix::zeros(2, 3), &[1.0, 0.3], 20);
        let m = fit(&traj(s), 1e-12, 1e-12).unwrap();
        assert!((m.linear() - &a0).amax() <= 1e-6);
    }

    #[test]
    fn scalar_two_regressor_closed_form() {
        let s = DenseMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let m = fit(&traj(s), 1.0, 1.0).unwrap();
        assert_relative_eq!(m.linear()[(0, 0)], 2.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(m.quadratic()[(0, 0)], 2.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn fit_needs_two_columns() {
        assert!(fit(&traj(DenseMatrix::zeros(2, 1)), 1.0, 1.0).is_err());
    }

    #[test]
    fn rollout_fixed_point_and_zero_map() {
        let s0 = DVector::from_vec(vec![0.5, -1.0]);
        let id = ReducedModel::new(DenseMatrix::identity(2, 2), DenseMatrix::zeros(2, 3), 0.0, 0.0).unwrap();
        let out = rollout(&id, &s0, 5, 1e6);
        assert!(!out.diverged());
        for c in out.trajectory.column_iter() {
            assert_eq!(c, s0);
        }
        let zero = ReducedModel::new(DenseMatrix::zeros(2, 2), DenseMatrix::zeros(2, 3), 0.0, 0.0).unwrap();
        let out = rollout(&zero, &s0, 4, 1e6);
        assert_eq!(out.trajectory.column(0), s0);
        assert_eq!(out.trajectory.columns(1, 3), DenseMatrix::zeros(2, 3));
    }

    #[test]
    fn rollout_scalar_recurrence() {
        let m = ReducedModel::new(
            DenseMatrix::from_element(1, 1, 0.5),
            DenseMatrix::from_element(1, 1, 0.1),
            0.0,
            0.0,
        )
        .unwrap();
        let out = rollout(&m, &DVector::from_element(1, 1.0), 4, 1e6);
        let mut z: f64 = 1.0;
        for j in 0..4 {
            assert_relative_eq!(out.trajectory[(0, j)], z, epsilon = 1e-15);
            z = 0.5 * z + 0.1 * z * z;
        }
        assert_relative_eq!(out.trajectory[(0, 1)], 0.6);
        assert_relative_eq!(out.trajectory[(0, 2)], 0.336);
    }

    #[test]
    fn rollout_truncates_on_divergence() {
        let m = ReducedModel::new(DenseMatrix::identity(1, 1) * 2.0, DenseMatrix::zeros(1, 1), 0.0, 0.0).unwrap();
        let out = rollout(&m, &DVector::from_element(1, 1.0), 100, 1e3);
        assert_eq!(out.diverged_at, Some(10));
        assert_eq!(out.trajectory.ncols(), 10);
    }

    fn random_snapshots(n: usize, k: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn exact_model_has_zero_prediction_error() {
        // Data in the span of two orthonormal directions with exactly linear
        // dynamics in the encoded coordinates.
        let s = random_snapshots(10, 2, 1);
        let svd = thin_svd(&s, DEFAULT_SVD_REL_TOL).unwrap();
        let manifold = QuadraticManifold::linear(&svd, &[0, 1], Coordinates::Isotropic).unwrap();
        let a0 = DenseMatrix::from_row_slice(2, 2, &[0.9, -0.3, 0.3, 0.9]);
        let z = simulate(&a0, &DenseMatrix::zeros(2, 3), &[0.7, 0.1], 15);
        let snapshots = manifold.decoder_basis() * &z;
        let model = ReducedModel::new(a0, DenseMatrix::zeros(2, 3), 0.0, 0.0).unwrap();
        let err = prediction_error(&model, &manifold, &snapshots, 1e6).unwrap();
        assert!(err.to_f64() <= 1e-12);
    }

    #[test]
    fn diverging_model_reports_sentinel() {
        let s = random_snapshots(6, 3, 2);
        let svd = thin_svd(&s, DEFAULT_SVD_REL_TOL).unwrap();
        let manifold = QuadraticManifold::linear(&svd, &[0, 1], Coordinates::Isotropic).unwrap();
        let model = ReducedModel::new(DenseMatrix::identity(2, 2) * 2.0, DenseMatrix::zeros(2, 3), 0.0, 0.0).unwrap();
        let long = random_snapshots(6, 200, 3);
        let guard = default_guard(&manifold.encode(&s).unwrap());
        assert_eq!(
            prediction_error(&model, &manifold, &long, guard).unwrap(),
            Score::Diverged
        );
        assert!(prediction_error(&model, &manifold, &DenseMatrix::zeros(6, 4), guard).is_err());
    }

    #[test]
    fn prediction_error_is_scale_invariant_for_linear_models() {
        let s = random_snapshots(8, 12, 4);
        let svd = thin_svd(&s, DEFAULT_SVD_REL_TOL).unwrap();
        let manifold = QuadraticManifold::linear(&svd, &[0, 1, 2], Coordinates::Isotropic).unwrap();
        let t = manifold.encode(&s).unwrap();
        let model = fit(&t, 1e-2, 1e-2).unwrap();
        let model = ReducedModel::new(model.linear().clone(), DenseMatrix::zeros(3, 6), 1e-2, 1e-2).unwrap();
        let test = random_snapshots(8, 9, 5);
        let e1 = prediction_error(&model, &manifold, &test, f64::INFINITY)
            .unwrap()
            .to_f64();
        let e2 = prediction_error(&model, &manifold, &(test * 37.5), f64::INFINITY)
            .unwrap()
            .to_f64();
        assert_relative_eq!(e1, e2, max_relative = 1e-12);
    }

    #[test]
    fn grid_fit_singleton_and_ties() {
        let t = traj(random_snapshots(2, 10, 6));
        let (m, s) = grid_fit(&t, &[1e-2], &[1e-3], |_| Ok(Score::Finite(0.5))).unwrap();
        assert_eq!(m, fit(&t, 1e-2, 1e-3).unwrap());
        assert_eq!(s, Score::Finite(0.5));

        let (m, _) = grid_fit(&t, &[1e-1, 1e-3, 1e-2], &[1e-2, 1e-4], |_| Ok(Score::Finite(1.0))).unwrap();
        assert_eq!((m.gamma_a(), m.gamma_h()), (1e-3, 1e-4));

        let (m, s) = grid_fit(&t, &[1e-1, 1e-3], &[1e-2], |_| Ok(Score::Diverged)).unwrap();
        assert_eq!((m.gamma_a(), s), (1e-3, Score::Diverged));

        assert!(grid_fit(&t, &[], &[1.0], |_| Ok(Score::Finite(0.0))).is_err());
    }

    #[test]
    fn grid_fit_picks_minimum() {
        let t = traj(random_snapshots(2, 10, 7));
        let (m, s) = grid_fit(&t, &[1e-4, 1e-3, 1e-2, 1e-1], &[1e-4, 1e-3, 1e-2, 1e-1], |m| {
            Ok(Score::Finite(
                (m.gamma_a().log10() + 2.0).abs() + (m.gamma_h().log10() + 3.0).abs(),
            ))
        })
        .unwrap();
        assert_eq!((m.gamma_a(), m.gamma_h()), (1e-2, 1e-3));
        assert_eq!(s, Score::Finite(0.0));
    }

    #[test]
    fn score_ordering_and_text() {
        assert_eq!(Score::Finite(1e300).total_cmp(&Score::Diverged), Ordering::Less);
        assert_eq!(Score::Diverged.to_string(), "inf");
        assert_eq!(Score::parse("inf").unwrap(), Score::Diverged);
        let v = 0.1 + 0.2;
        assert_eq!(Score::parse(&Score::Finite(v).to_string()).unwrap(), Score::Finite(v));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn recovers_known_operators(r in 1usize..=3, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = feature_count(r);
            // Damped orthogonal linear part keeps the trajectory from
            // settling, so the regression stays well conditioned.
            let q = DenseMatrix::from_fn(r, r, |_, _| rng.random_range(-1.0..1.0)).qr().q();
            let a0 = q * 0.97;
            let h0 = DenseMatrix::from_fn(r, p, |_, _| rng.random_range(-0.1..0.1));
            let z0: Vec<f64> = (0..r).map(|_| rng.random_range(-1.0..1.0)).collect();
            let k = 4 * (r + p) + 4;
            let s = simulate(&a0, &h0, &z0, k);
            prop_assume!(s.iter().all(|v| v.is_finite() && v.abs() < 10.0));
            // The operators are identifiable only when the states and their
            // products are linearly independent along the trajectory.
            let prev = s.columns(0, k - 1).into_owned();
            let regressors = DenseMatrix::from_fn(r + p, k - 1, |i, j| {
                if i < r { prev[(i, j)] } else { quad_features_matrix(&prev)[(i - r, j)] }
            });
            let smallest = regressors.singular_values().min();
            prop_assume!(smallest > 1e-3);
            let m = fit(&traj(s.clone()), 1e-12, 1e-12).map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert!((m.linear() - &a0).amax() <= 1e-5);
            prop_assert!((m.quadratic() - &h0).amax() <= 1e-5);
        }

        #[test]
        fn one_step_fit_beats_zero_operators(r in 1usize..=4, k in 8usize..30, seed in any::<u64>()) {
            let s = random_snapshots(r, k, seed);
            let g = 1e-3;
            let m = fit(&traj(s.clone()), g, g).unwrap();
            let prev = s.columns(0, k - 1).into_owned();
            let next = s.columns(1, k - 1).into_owned();
            let pred = m.linear() * &prev + m.quadratic() * quad_features_matrix(&prev);
            let objective = (next.clone() - pred).norm_squared()
                + g * m.linear().norm_squared() + g * m.quadratic().norm_squared();
            prop_assert!(objective <= next.norm_squared() + 1e-12);

            // blockwise normal equations
            let p = feature_count(r);
            let mut b = DenseMatrix::zeros(r + p, k - 1);
            b.rows_mut(0, r).copy_from(&prev);
            b.rows_mut(r, p).copy_from(&quad_features_matrix(&prev));
            let mut x = DenseMatrix::zeros(r, r + p);
            x.columns_mut(0, r).copy_from(m.linear());
            x.columns_mut(r, p).copy_from(m.quadratic());
            let reg = &b * b.transpose() + DenseMatrix::identity(r + p, r + p) * g;
            let cbt = &next * b.transpose();
            prop_assert!((x * reg - &cbt).norm() <= 1e-9 * cbt.norm().max(1e-300));
        }
    }
}
