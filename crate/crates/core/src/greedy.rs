//! Greedy selection of left singular vectors for quadratic manifolds, with
//! either the reconstruction-only objective or the objective that also
//! penalizes the rollout error of an operator-inference model fitted to the
//! candidate embedding.
//!
//! All objectives are evaluated in right-singular-vector coordinates, so the
//! cost per candidate depends on the rank and the number of snapshots but
//! not on the state dimension.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::manifold::{
    check_indices, complement, quad_features_matrix, training_coordinates, Coordinates, QuadraticManifold,
    ReducedTrajectory,
};
use crate::numerics::{ridge_minimum, DenseMatrix, RegularizedGram, RidgeBlock, SvdFactors};
use crate::opinf::{self, Score};

/// Which objective drives the selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    ReconstructionOnly,
    #[default]
    OiAware,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::ReconstructionOnly => "reconstruction_only",
            Mode::OiAware => "oi_aware",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "reconstruction_only" => Ok(Mode::ReconstructionOnly),
            "oi_aware" => Ok(Mode::OiAware),
            _ => Err(Error::invalid(format!("unknown selection mode `{s}`"))),
        }
    }
}

/// Trajectory the in-loop operator-inference model is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InLoopModel {
    /// Embedding with the candidate appended. The model error then differs
    /// between candidates.
    #[default]
    Augmented,
    /// Embedding from the previous iteration's basis. The model error is the
    /// same for every candidate of an iteration, so it only matters through
    /// divergence; kept for comparison.
    Previous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyConfig {
    pub r: usize,
    /// Candidate pool size; `None` means `min(5 r, rank)`.
    pub q: Option<usize>,
    pub gamma: f64,
    pub gamma_op: f64,
    pub opinf_gamma_a: f64,
    pub opinf_gamma_h: f64,
    pub mode: Mode,
    pub coordinates: Coordinates,
    pub in_loop: InLoopModel,
}

impl GreedyConfig {
    pub const DEFAULT_OPINF_GAMMA: f64 = 1e-3;

    /// OI-aware configuration with `gamma_op = 1` and default in-loop
    /// regularization.
    pub fn new(r: usize, gamma: f64) -> Self {
        Self {
            r,
            q: None,
            gamma,
            gamma_op: 1.0,
            opinf_gamma_a: Self::DEFAULT_OPINF_GAMMA,
            opinf_gamma_h: Self::DEFAULT_OPINF_GAMMA,
            mode: Mode::OiAware,
            coordinates: Coordinates::Isotropic,
            in_loop: InLoopModel::Augmented,
        }
    }

    pub fn reconstruction_only(r: usize, gamma: f64) -> Self {
        Self {
            mode: Mode::ReconstructionOnly,
            ..Self::new(r, gamma)
        }
    }

    /// Pool size actually used for a factorization of the given rank.
    pub fn pool_size(&self, rank: usize) -> usize {
        self.q.unwrap_or_else(|| (5 * self.r).min(rank))
    }

    fn validate(&self, rank: usize) -> Result<usize> {
        let q = self.pool_size(rank);
        if self.r == 0 {
            return Err(Error::invalid("reduced dimension r must be at least 1"));
        }
        if self.r > q {
            return Err(Error::invalid(format!(
                "r = {} exceeds the candidate pool q = {q}",
                self.r
            )));
        }
        if q > rank {
            return Err(Error::invalid(format!("q = {q} exceeds the snapshot rank {rank}")));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.gamma_op >= 0.0 && self.gamma_op.is_finite()) {
            return Err(Error::invalid(format!("gamma_op must be >= 0, got {}", self.gamma_op)));
        }
        if !(self.opinf_gamma_a >= 0.0 && self.opinf_gamma_h >= 0.0) {
            return Err(Error::invalid("in-loop regularization must be >= 0"));
        }
        Ok(q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateScore {
    pub index: usize,
    pub rec: f64,
    pub total: Score,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub scores: Vec<CandidateScore>,
    pub chosen: usize,
    /// Every candidate diverged and the reconstruction objective decided.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SelectionTrace {
    pub iterations: Vec<IterationRecord>,
}

/// Shared per-factorization data: rows `sigma_j psi_j^T`.
struct Workspace<'a> {
    svd: &'a SvdFactors,
    scaled_right_t: DenseMatrix,
}

impl<'a> Workspace<'a> {
    fn new(svd: &'a SvdFactors) -> Self {
        Self {
            svd,
            scaled_right_t: svd.scaled_right_t(),
        }
    }

    fn rec(&self, indices: &[usize], gamma: f64, coordinates: Coordinates) -> Result<f64> {
        let out = complement(self.svd.rank(), indices);
        if out.is_empty() {
            return Ok(0.0);
        }
        let sigma = self.svd.singular_values();
        let target_norm_sq: f64 = out.iter().map(|&j| sigma[j] * sigma[j]).sum();
        let features = quad_features_matrix(&training_coordinates(self.svd, indices, coordinates));
        let gram = RegularizedGram::new(&features, &[RidgeBlock::new(features.nrows(), gamma)])?;
        let cross = self.scaled_right_t.select_rows(&out) * features.transpose();
        Ok(ridge_minimum(&gram, &cross, target_norm_sq))
    }
}

/// Squared rollout error `||Z - Z_hat||_F^2` of a model fitted to `Z`.
fn model_error(z: DenseMatrix, gamma_a: f64, gamma_h: f64) -> Result<Score> {
    let trajectory = ReducedTrajectory::new(z)?;
    let model = match opinf::fit(&trajectory, gamma_a, gamma_h) {
        Ok(m) => m,
        // An unfittable embedding is treated like an unusable model.
        Err(Error::Singular { .. }) => return Ok(Score::Diverged),
        Err(e) => return Err(e),
    };
    let guard = opinf::default_guard(&trajectory);
    let result = opinf::rollout(&model, &trajectory.column(0), trajectory.len(), guard);
    if result.diverged() {
        return Ok(Score::Diverged);
    }
    let err = (result.trajectory - trajectory.states()).norm_squared();
    Ok(if err.is_finite() {
        Score::Finite(err)
    } else {
        Score::Diverged
    })
}

fn with_candidate(in_idx: &[usize], cand: usize) -> Result<Vec<usize>> {
    if in_idx.contains(&cand) {
        return Err(Error::invalid(format!("candidate {cand} is already selected")));
    }
    let mut indices = in_idx.to_vec();
    indices.push(cand);
    Ok(indices)
}

/// Reconstruction objective after appending `cand` to `in_idx`:
/// `min_W' ||Sigma_out Psi_out^T - W' h(Z)||_F^2 + gamma ||W'||_F^2`, where
/// `Z` is the training embedding on the enlarged index set.
pub fn objective_rec(
    svd: &SvdFactors,
    in_idx: &[usize],
    cand: usize,
    gamma: f64,
    coordinates: Coordinates,
) -> Result<f64> {
    let indices = with_candidate(in_idx, cand)?;
    check_indices(svd, &indices)?;
    Workspace::new(svd).rec(&indices, gamma, coordinates)
}

/// Reconstruction objective plus `gamma_op` times the squared rollout error
/// of the in-loop model fitted to the candidate-augmented embedding.
pub fn objective_total(svd: &SvdFactors, in_idx: &[usize], cand: usize, cfg: &GreedyConfig) -> Result<Score> {
    let indices = with_candidate(in_idx, cand)?;
    check_indices(svd, &indices)?;
    let rec = Workspace::new(svd).rec(&indices, cfg.gamma, cfg.coordinates)?;
    if cfg.gamma_op == 0.0 {
        return Ok(Score::Finite(rec));
    }
    let z = training_coordinates(svd, &indices, cfg.coordinates);
    Ok(match model_error(z, cfg.opinf_gamma_a, cfg.opinf_gamma_h)? {
        Score::Finite(e) => Score::Finite(rec + cfg.gamma_op * e),
        Score::Diverged => Score::Diverged,
    })
}

fn argmin<T: Copy>(
    scores: &[CandidateScore],
    key: impl Fn(&CandidateScore) -> T,
    cmp: impl Fn(&T, &T) -> Ordering,
) -> usize {
    // Candidates are listed in ascending index order, so keeping the first
    // strict minimum breaks ties toward the lowest index.
    let mut best = 0;
    for (pos, s) in scores.iter().enumerate().skip(1) {
        if cmp(&key(s), &key(&scores[best])) == Ordering::Less {
            best = pos;
        }
    }
    scores[best].index
}

/// Greedy selection of `cfg.r` indices from the first `q` singular vectors.
pub fn select(svd: &SvdFactors, cfg: &GreedyConfig) -> Result<(Vec<usize>, SelectionTrace)> {
    let q = cfg.validate(svd.rank())?;
    let ws = Workspace::new(svd);
    let oi_aware = cfg.mode == Mode::OiAware && cfg.gamma_op > 0.0;
    let mut selected: Vec<usize> = Vec::with_capacity(cfg.r);
    let mut trace = SelectionTrace::default();

    for iteration in 0..cfg.r {
        let candidates: Vec<usize> = (0..q).filter(|j| !selected.contains(j)).collect();

        // Model error shared by all candidates in the previous-basis variant.
        let shared = if oi_aware && cfg.in_loop == InLoopModel::Previous && !selected.is_empty() {
            let z = training_coordinates(svd, &selected, cfg.coordinates);
            Some(model_error(z, cfg.opinf_gamma_a, cfg.opinf_gamma_h)?)
        } else if oi_aware && cfg.in_loop == InLoopModel::Previous {
            Some(Score::Finite(0.0))
        } else {
            None
        };

        let scores: Vec<CandidateScore> = candidates
            .par_iter()
            .map(|&cand| {
                let mut indices = selected.clone();
                indices.push(cand);
                let rec = ws.rec(&indices, cfg.gamma, cfg.coordinates)?;
                let model = if !oi_aware {
                    Score::Finite(0.0)
                } else if let Some(s) = shared {
                    s
                } else {
                    let z = training_coordinates(svd, &indices, cfg.coordinates);
                    model_error(z, cfg.opinf_gamma_a, cfg.opinf_gamma_h)?
                };
                let total = match model {
                    Score::Finite(e) => Score::Finite(rec + cfg.gamma_op * e),
                    Score::Diverged => Score::Diverged,
                };
                Ok(CandidateScore {
                    index: cand,
                    rec,
                    total,
                })
            })
            .collect::<Result<_>>()?;

        let fallback = oi_aware && scores.iter().all(|s| s.total.is_diverged());
        let chosen = if fallback || !oi_aware {
            argmin(&scores, |s| s.rec, |a, b| a.total_cmp(b))
        } else {
            argmin(&scores, |s| s.total, |a, b| a.total_cmp(b))
        };
        selected.push(chosen);
        trace.iterations.push(IterationRecord {
            iteration,
            scores,
            chosen,
            fallback,
        });
    }
    Ok((selected, trace))
}

/// Runs [`select`] and fits the quadratic coefficients on the result.
pub fn train_with_trace(svd: &SvdFactors, cfg: &GreedyConfig) -> Result<(QuadraticManifold, SelectionTrace)> {
    let (indices, trace) = select(svd, cfg)?;
    let manifold = QuadraticManifold::quadratic(svd, &indices, cfg.gamma, cfg.coordinates)?;
    Ok((manifold, trace))
}

pub fn train(svd: &SvdFactors, cfg: &GreedyConfig) -> Result<QuadraticManifold> {
    train_with_trace(svd, cfg).map(|(m, _)| m)
}

fn leading(svd: &SvdFactors, r: usize) -> Result<Vec<usize>> {
    if r == 0 || r > svd.rank() {
        return Err(Error::invalid(format!("r = {r} must lie in 1..={}", svd.rank())));
    }
    Ok((0..r).collect())
}

/// Quadratic manifold on the leading `r` singular vectors.
pub fn train_leading(svd: &SvdFactors, r: usize, gamma: f64, coordinates: Coordinates) -> Result<QuadraticManifold> {
    QuadraticManifold::quadratic(svd, &leading(svd, r)?, gamma, coordinates)
}

/// Linear subspace of the leading `r` singular vectors (`W = 0`).
pub fn train_linear(svd: &SvdFactors, r: usize, coordinates: Coordinates) -> Result<QuadraticManifold> {
    QuadraticManifold::linear(svd, &leading(svd, r)?, coordinates)
}
