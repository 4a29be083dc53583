//! Library side of the `qmrom` command-line tool: train/test splitting,
//! training pipelines, evaluation, benchmark sweeps, embeddings and grid
//! slices. Every `cmd_*` function reads and writes files; the pipelines
//! underneath work on in-memory matrices.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::format::{format_f64, read_snapshots, write_snapshots, Method, ModelFile, ModelMeta};
use crate::greedy::{self, GreedyConfig, InLoopModel, SelectionTrace};
use crate::manifold::{Coordinates, QuadraticManifold};
use crate::numerics::{thin_svd, DenseMatrix, SvdFactors, DEFAULT_SVD_REL_TOL};
use crate::opinf::{self, ReducedModel, Score};
use crate::report::{ExperimentReport, Outcome, ReportRow};
use crate::transport::{self, TransportConfig};

/// Environment variable that caps the number of worker threads.
pub const THREADS_ENV: &str = "QMROM_THREADS";

/// Default regularization grid for `gamma_A` and `gamma_H`.
pub const DEFAULT_GRID: [f64; 4] = [1e-4, 1e-3, 1e-2, 1e-1];

/// Sizes the global thread pool from `QMROM_THREADS` if it is set.
pub fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t >= 1)
        .ok_or_else(|| Error::invalid(format!("{THREADS_ENV} must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::invalid(format!("cannot configure thread pool: {e}")))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(File::create(path)?))
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Format(format!("{other:?}")),
    }
}

/// Writes the transport snapshots for `cfg` and returns their shape.
pub fn cmd_generate(cfg: &TransportConfig, out: &Path) -> Result<(usize, usize)> {
    let snapshots = transport::generate(cfg)?;
    write_snapshots(out, &snapshots)?;
    Ok(snapshots.shape())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitScheme {
    /// First `ceil(k / 2)` columns for training, the rest for testing.
    Contiguous,
    /// Columns 0, 2, 4, .. for training and 1, 3, .. for testing.
    Interleave,
}

impl SplitScheme {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitScheme::Contiguous => "contiguous",
            SplitScheme::Interleave => "interleave",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "contiguous" => Ok(SplitScheme::Contiguous),
            "interleave" => Ok(SplitScheme::Interleave),
            _ => Err(Error::invalid(format!("unknown split scheme `{s}`"))),
        }
    }
}

pub fn split_columns(snapshots: &DenseMatrix, scheme: SplitScheme) -> Result<(DenseMatrix, DenseMatrix)> {
    let k = snapshots.ncols();
    if k < 2 {
        return Err(Error::invalid("splitting needs at least two snapshots"));
    }
    let (train, test): (Vec<usize>, Vec<usize>) = match scheme {
        SplitScheme::Contiguous => {
            let cut = k.div_ceil(2);
            ((0..cut).collect(), (cut..k).collect())
        }
        SplitScheme::Interleave => (0..k).partition(|j| j % 2 == 0),
    };
    Ok((snapshots.select_columns(&train), snapshots.select_columns(&test)))
}

pub fn cmd_split(input: &Path, scheme: SplitScheme, out_train: &Path, out_test: &Path) -> Result<(usize, usize)> {
    let snapshots = read_snapshots(input)?;
    let (train, test) = split_columns(&snapshots, scheme)?;
    write_snapshots(out_train, &train)?;
    write_snapshots(out_test, &test)?;
    Ok((train.ncols(), test.ncols()))
}

/// Splits off the trailing `ceil(fraction * k)` columns for validation.
pub fn holdout_split(snapshots: &DenseMatrix, fraction: f64) -> Result<(DenseMatrix, DenseMatrix)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!(
            "holdout fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let k = snapshots.ncols();
    let held = (fraction * k as f64).ceil() as usize;
    if held + 2 > k {
        return Err(Error::invalid(format!(
            "holdout of {held} columns leaves fewer than two of {k} for training"
        )));
    }
    let cut = k - held;
    Ok((
        snapshots.columns(0, cut).into_owned(),
        snapshots.columns(cut, held).into_owned(),
    ))
}

/// Manifold-training settings shared by `train` and `benchmark`.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldOptions {
    pub method: Method,
    pub r: usize,
    pub q: Option<usize>,
    pub gamma: f64,
    pub gamma_op: f64,
    /// Regularization of the in-loop operator-inference fits.
    pub in_loop_gamma_a: f64,
    pub in_loop_gamma_h: f64,
    pub coordinates: Coordinates,
    pub in_loop: InLoopModel,
}

impl ManifoldOptions {
    pub fn new(method: Method, r: usize) -> Self {
        Self {
            method,
            r,
            q: None,
            gamma: 1e-4,
            gamma_op: 1.0,
            in_loop_gamma_a: GreedyConfig::DEFAULT_OPINF_GAMMA,
            in_loop_gamma_h: GreedyConfig::DEFAULT_OPINF_GAMMA,
            coordinates: Coordinates::Isotropic,
            in_loop: InLoopModel::Augmented,
        }
    }

    fn greedy_config(&self) -> GreedyConfig {
        GreedyConfig {
            r: self.r,
            q: self.q,
            gamma: self.gamma,
            gamma_op: self.gamma_op,
            opinf_gamma_a: self.in_loop_gamma_a,
            opinf_gamma_h: self.in_loop_gamma_h,
            mode: self.method.mode().unwrap_or_default(),
            coordinates: self.coordinates,
            in_loop: self.in_loop,
        }
    }

    fn meta(&self, svd: &SvdFactors, guard: f64) -> ModelMeta {
        let greedy = self.method.mode().is_some();
        ModelMeta {
            method: self.method,
            q: greedy.then(|| self.greedy_config().pool_size(svd.rank())),
            gamma_op: if self.method == Method::QmOiAware {
                self.gamma_op
            } else {
                0.0
            },
            in_loop: self.in_loop,
            guard,
        }
    }
}

/// Runs the trainer selected by `opts.method`.
pub fn train_manifold(svd: &SvdFactors, opts: &ManifoldOptions) -> Result<(QuadraticManifold, Option<SelectionTrace>)> {
    match opts.method {
        Method::Linear => Ok((greedy::train_linear(svd, opts.r, opts.coordinates)?, None)),
        Method::QmLeading => Ok((greedy::train_leading(svd, opts.r, opts.gamma, opts.coordinates)?, None)),
        Method::QmGreedy | Method::QmOiAware => {
            let (m, trace) = greedy::train_with_trace(svd, &opts.greedy_config())?;
            Ok((m, Some(trace)))
        }
    }
}

/// How the downstream operator-inference regularization is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSelection {
    Fixed { gamma_a: f64, gamma_h: f64 },
    Grid { grid_a: Vec<f64>, grid_h: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub manifold: ManifoldOptions,
    pub selection: ModelSelection,
    /// Fraction of trailing training columns used to score grid points;
    /// without it grid points are scored on the training trajectory.
    pub holdout: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub file: ModelFile,
    pub trace: Option<SelectionTrace>,
    /// Score of the chosen grid point, if a grid was searched.
    pub selection_score: Option<Score>,
}

/// SVD, manifold training and the downstream operator-inference fit.
pub fn train_model(snapshots: &DenseMatrix, opts: &TrainOptions) -> Result<Trained> {
    let (fit_part, validation) = match opts.holdout {
        Some(f) => {
            let (a, b) = holdout_split(snapshots, f)?;
            (a, Some(b))
        }
        None => (snapshots.clone(), None),
    };
    let svd = thin_svd(&fit_part, DEFAULT_SVD_REL_TOL)?;
    let (manifold, trace) = train_manifold(&svd, &opts.manifold)?;
    let reduced = manifold.encode(&fit_part)?;
    let guard = opinf::default_guard(&reduced);
    let (model, selection_score) = match &opts.selection {
        ModelSelection::Fixed { gamma_a, gamma_h } => (opinf::fit(&reduced, *gamma_a, *gamma_h)?, None),
        ModelSelection::Grid { grid_a, grid_h } => {
            let target = validation.as_ref().unwrap_or(&fit_part);
            let (model, score) = opinf::grid_fit(&reduced, grid_a, grid_h, |m| {
                opinf::prediction_error(m, &manifold, target, guard)
            })?;
            (model, Some(score))
        }
    };
    let meta = opts.manifold.meta(&svd, guard);
    Ok(Trained {
        file: ModelFile { manifold, model, meta },
        trace,
        selection_score,
    })
}

/// Path of the selection trace written next to a model file.
pub fn trace_path(model_path: &Path) -> PathBuf {
    let mut name = model_path.as_os_str().to_owned();
    name.push(".trace.csv");
    PathBuf::from(name)
}

/// Writes one row per (iteration, candidate) with zero-based iteration and
/// one-based candidate indices.
pub fn write_trace(trace: &SelectionTrace, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["iteration", "candidate", "rec", "total", "chosen", "fallback"])
        .map_err(csv_io)?;
    for it in &trace.iterations {
        for c in &it.scores {
            w.write_record([
                it.iteration.to_string(),
                (c.index + 1).to_string(),
                format_f64(c.rec),
                c.total.to_string(),
                (c.index == it.chosen).to_string(),
                it.fallback.to_string(),
            ])
            .map_err(csv_io)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Trains on a snapshot file and writes the model file and, for greedy
/// methods, the selection trace next to it.
pub fn cmd_train(train_path: &Path, opts: &TrainOptions, out_model: &Path) -> Result<Trained> {
    let snapshots = read_snapshots(train_path)?;
    let trained = train_model(&snapshots, opts)?;
    trained.file.write(out_model)?;
    if let Some(trace) = &trained.trace {
        write_trace(trace, &trace_path(out_model))?;
    }
    Ok(trained)
}

/// Decoded rollout from the encoded first column of `reference`, with as
/// many columns as `reference`. Truncated if the rollout diverges.
pub fn predict(file: &ModelFile, reference: &DenseMatrix) -> Result<DenseMatrix> {
    let initial = file.manifold.encode_state(&reference.column(0).into_owned())?;
    let rollout = opinf::rollout(&file.model, &initial, reference.ncols(), file.meta.guard);
    file.manifold
        .decode(&crate::manifold::ReducedTrajectory::new(rollout.trajectory)?)
}

/// Test reconstruction and prediction errors of a stored model.
pub fn evaluate(file: &ModelFile, test: &DenseMatrix) -> Result<(f64, Score)> {
    let recon = file.manifold.recon_error(test)?;
    let pred = opinf::prediction_error(&file.model, &file.manifold, test, file.meta.guard)?;
    Ok((recon, pred))
}

/// Evaluates a model file on a test file and appends one report row.
pub fn cmd_eval(model_path: &Path, test_path: &Path, csv_out: &Path) -> Result<ReportRow> {
    let start = Instant::now();
    let file = ModelFile::read(model_path)?;
    let test = read_snapshots(test_path)?;
    let (recon, pred) = evaluate(&file, &test)?;
    let row = ReportRow {
        method: file.meta.method.as_str().to_string(),
        r: file.manifold.dim(),
        gamma: file.manifold.gamma(),
        gamma_a: Some(file.model.gamma_a()),
        gamma_h: Some(file.model.gamma_h()),
        outcome: Outcome::Computed { recon, pred },
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    ExperimentReport {
        rows: vec![row.clone()],
    }
    .append(csv_out)?;
    Ok(row)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkOptions {
    pub methods: Vec<Method>,
    pub r_list: Vec<usize>,
    pub gamma_list: Vec<f64>,
    pub grid_a: Vec<f64>,
    pub grid_h: Vec<f64>,
    pub gamma_op: f64,
    pub q: Option<usize>,
    pub in_loop_gamma_a: f64,
    pub in_loop_gamma_h: f64,
    pub coordinates: Coordinates,
    pub in_loop: InLoopModel,
    /// Choose `(gamma_A, gamma_H)` on a validation split of the training
    /// data instead of on the test data.
    pub holdout: Option<f64>,
}

impl BenchmarkOptions {
    /// All four methods, the default regularization grid and `gamma_op = 1`.
    pub fn new(r_list: Vec<usize>, gamma_list: Vec<f64>) -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            r_list,
            gamma_list,
            grid_a: DEFAULT_GRID.to_vec(),
            grid_h: DEFAULT_GRID.to_vec(),
            gamma_op: 1.0,
            q: None,
            in_loop_gamma_a: GreedyConfig::DEFAULT_OPINF_GAMMA,
            in_loop_gamma_h: GreedyConfig::DEFAULT_OPINF_GAMMA,
            coordinates: Coordinates::Isotropic,
            in_loop: InLoopModel::Augmented,
            holdout: None,
        }
    }

    fn manifold_options(&self, method: Method, r: usize, gamma: f64) -> ManifoldOptions {
        ManifoldOptions {
            method,
            r,
            q: self.q,
            gamma,
            gamma_op: self.gamma_op,
            in_loop_gamma_a: self.in_loop_gamma_a,
            in_loop_gamma_h: self.in_loop_gamma_h,
            coordinates: self.coordinates,
            in_loop: self.in_loop,
        }
    }
}

fn benchmark_cell(
    svd: &SvdFactors,
    fit_part: &DenseMatrix,
    validation: Option<&DenseMatrix>,
    test: &DenseMatrix,
    opts: &ManifoldOptions,
    bench: &BenchmarkOptions,
) -> Result<(f64, Score, ReducedModel)> {
    let (manifold, _) = train_manifold(svd, opts)?;
    let recon = manifold.recon_error(test)?;
    let reduced = manifold.encode(fit_part)?;
    let guard = opinf::default_guard(&reduced);
    let selector = validation.unwrap_or(test);
    let (model, score) = opinf::grid_fit(&reduced, &bench.grid_a, &bench.grid_h, |m| {
        opinf::prediction_error(m, &manifold, selector, guard)
    })?;
    let pred = match validation {
        Some(_) => opinf::prediction_error(&model, &manifold, test, guard)?,
        None => score,
    };
    Ok((recon, pred, model))
}

/// Full sweep over methods, dimensions and manifold regularization. Each
/// row reports the `(gamma_A, gamma_H)` grid point with the lowest
/// prediction error on the test data (or on the validation split when
/// `holdout` is set). Failed configurations are reported, not fatal.
pub fn run_benchmark(train: &DenseMatrix, test: &DenseMatrix, opts: &BenchmarkOptions) -> Result<ExperimentReport> {
    if train.nrows() != test.nrows() {
        return Err(Error::dims(format!(
            "training data has dimension {}, test data {}",
            train.nrows(),
            test.nrows()
        )));
    }
    if opts.grid_a.is_empty() || opts.grid_h.is_empty() {
        return Err(Error::invalid("regularization grids must not be empty"));
    }
    let (fit_part, validation) = match opts.holdout {
        Some(f) => {
            let (a, b) = holdout_split(train, f)?;
            (a, Some(b))
        }
        None => (train.clone(), None),
    };
    let svd = thin_svd(&fit_part, DEFAULT_SVD_REL_TOL)?;
    let mut report = ExperimentReport::default();
    for &method in &opts.methods {
        for &r in &opts.r_list {
            for &gamma in &opts.gamma_list {
                let start = Instant::now();
                let mopts = opts.manifold_options(method, r, gamma);
                let result = benchmark_cell(&svd, &fit_part, validation.as_ref(), test, &mopts, opts);
                let wall_time_s = start.elapsed().as_secs_f64();
                let row = match result {
                    Ok((recon, pred, model)) => ReportRow {
                        method: method.as_str().to_string(),
                        r,
                        gamma,
                        gamma_a: Some(model.gamma_a()),
                        gamma_h: Some(model.gamma_h()),
                        outcome: Outcome::Computed { recon, pred },
                        wall_time_s,
                    },
                    Err(_) => ReportRow {
                        method: method.as_str().to_string(),
                        r,
                        gamma,
                        gamma_a: None,
                        gamma_h: None,
                        outcome: Outcome::Failed,
                        wall_time_s,
                    },
                };
                report.rows.push(row);
            }
        }
    }
    Ok(report)
}

pub fn cmd_benchmark(
    train_path: &Path,
    test_path: &Path,
    opts: &BenchmarkOptions,
    csv_out: &Path,
) -> Result<ExperimentReport> {
    let train = read_snapshots(train_path)?;
    let test = read_snapshots(test_path)?;
    let report = run_benchmark(&train, &test, opts)?;
    report.write(csv_out)?;
    Ok(report)
}

/// Encodes each snapshot; writes a header `z1,..,zr` and one row per time
/// step.
pub fn cmd_embed(model_path: &Path, snapshots_path: &Path, csv_out: &Path) -> Result<DenseMatrix> {
    let file = ModelFile::read(model_path)?;
    let snapshots = read_snapshots(snapshots_path)?;
    let reduced = file.manifold.encode(&snapshots)?.into_inner();
    let mut w = csv_writer(csv_out)?;
    w.write_record((1..=reduced.nrows()).map(|i| format!("z{i}")))
        .map_err(csv_io)?;
    for col in reduced.column_iter() {
        w.write_record(col.iter().map(|v| format_f64(*v))).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(reduced)
}

/// Axis held fixed by a slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceAxis {
    X1,
    X2,
}

impl SliceAxis {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "x1" => Ok(SliceAxis::X1),
            "x2" => Ok(SliceAxis::X2),
            _ => Err(Error::invalid(format!("unknown axis `{s}`, expected x1 or x2"))),
        }
    }
}

/// Line through snapshot grids: each column is read as an `N x M` grid
/// with `x1` fastest, both axes spanning `[lo, hi)` uniformly.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceSpec {
    pub n: usize,
    pub axis: SliceAxis,
    pub position: f64,
    pub domain: (f64, f64),
}

impl SliceSpec {
    pub fn new(n: usize, axis: SliceAxis, position: f64) -> Self {
        Self {
            n,
            axis,
            position,
            domain: (-std::f64::consts::PI, std::f64::consts::PI),
        }
    }
}

fn uniform_points((lo, hi): (f64, f64), count: usize) -> Vec<f64> {
    (0..count).map(|i| lo + (hi - lo) * i as f64 / count as f64).collect()
}

/// Returns the coordinates along the free axis and one row of values per
/// snapshot.
pub fn slice_snapshots(snapshots: &DenseMatrix, spec: &SliceSpec) -> Result<(Vec<f64>, DenseMatrix)> {
    let (lo, hi) = spec.domain;
    if !(lo < hi) {
        return Err(Error::invalid("slice domain must satisfy lo < hi"));
    }
    let rows = snapshots.nrows();
    if spec.n == 0 || !rows.is_multiple_of(spec.n) {
        return Err(Error::dims(format!(
            "snapshot length {rows} is not a multiple of N = {}",
            spec.n
        )));
    }
    if !(spec.position >= lo && spec.position < hi) {
        return Err(Error::invalid(format!(
            "slice position {} lies outside [{lo}, {hi})",
            spec.position
        )));
    }
    let n = spec.n;
    let m = rows / n;
    let (fixed_count, free_count) = match spec.axis {
        SliceAxis::X1 => (n, m),
        SliceAxis::X2 => (m, n),
    };
    let fixed = uniform_points(spec.domain, fixed_count);
    let at = (0..fixed_count)
        .min_by(|&a, &b| {
            (fixed[a] - spec.position)
                .abs()
                .total_cmp(&(fixed[b] - spec.position).abs())
        })
        .expect("nonempty grid");
    let coords = uniform_points(spec.domain, free_count);
    let values = DenseMatrix::from_fn(snapshots.ncols(), free_count, |t, f| {
        let (i, j) = match spec.axis {
            SliceAxis::X1 => (at, f),
            SliceAxis::X2 => (f, at),
        };
        snapshots[(i + j * n, t)]
    });
    Ok((coords, values))
}

/// Writes a slice as CSV: header of free-axis coordinates, one row per
/// snapshot.
pub fn cmd_slice(input: &Path, spec: &SliceSpec, csv_out: &Path) -> Result<DenseMatrix> {
    let snapshots = read_snapshots(input)?;
    let (coords, values) = slice_snapshots(&snapshots, spec)?;
    let mut w = csv_writer(csv_out)?;
    w.write_record(coords.iter().map(|c| format_f64(*c))).map_err(csv_io)?;
    for row in values.row_iter() {
        w.write_record(row.iter().map(|v| format_f64(*v))).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn tagged(k: usize) -> DenseMatrix {
        DenseMatrix::from_fn(3, k, |i, j| (10 * j + i) as f64)
    }

    #[test]
    fn contiguous_and_interleaved_splits() {
        let s = tagged(4);
        let (a, b) = split_columns(&s, SplitScheme::Contiguous).unwrap();
        assert_eq!((a[(0, 0)], a[(0, 1)], b[(0, 0)], b[(0, 1)]), (0.0, 10.0, 20.0, 30.0));
        let (a, b) = split_columns(&s, SplitScheme::Interleave).unwrap();
        assert_eq!((a[(0, 0)], a[(0, 1)], b[(0, 0)], b[(0, 1)]), (0.0, 20.0, 10.0, 30.0));
        let (a, b) = split_columns(&tagged(2000), SplitScheme::Contiguous).unwrap();
        assert_eq!((a.ncols(), b.ncols()), (1000, 1000));
        let (a, b) = split_columns(&tagged(5), SplitScheme::Contiguous).unwrap();
        assert_eq!((a.ncols(), b.ncols()), (3, 2));
        assert!(split_columns(&tagged(1), SplitScheme::Interleave).is_err());
    }

    #[test]
    fn holdout_bounds() {
        let (a, b) = holdout_split(&tagged(10), 0.25).unwrap();
        assert_eq!((a.ncols(), b.ncols()), (7, 3));
        assert_eq!(b[(0, 0)], 70.0);
        assert!(holdout_split(&tagged(3), 0.5).is_err());
        assert!(holdout_split(&tagged(10), 1.0).is_err());
    }

    #[test]
    fn linear_method_ignores_manifold_regularization() {
        let s = random(20, 15, 1);
        let mut opts = TrainOptions {
            manifold: ManifoldOptions::new(Method::Linear, 3),
            selection: ModelSelection::Fixed {
                gamma_a: 1e-3,
                gamma_h: 1e-3,
            },
            holdout: None,
        };
        opts.manifold.gamma = 0.5;
        let trained = train_model(&s, &opts).unwrap();
        let m = &trained.file.manifold;
        assert_eq!(m.kind(), crate::manifold::ManifoldKind::Linear);
        assert!(m.coeffs().iter().all(|v| *v == 0.0));
        assert!(trained.trace.is_none());
        assert_eq!(trained.file.meta.q, None);
    }

    #[test]
    fn oiaware_without_model_term_matches_greedy() {
        let s = random(25, 18, 2);
        let mk = |method| TrainOptions {
            manifold: ManifoldOptions {
                gamma_op: 0.0,
                ..ManifoldOptions::new(method, 4)
            },
            selection: ModelSelection::Fixed {
                gamma_a: 1e-3,
                gamma_h: 1e-3,
            },
            holdout: None,
        };
        let a = train_model(&s, &mk(Method::QmGreedy)).unwrap();
        let b = train_model(&s, &mk(Method::QmOiAware)).unwrap();
        assert_eq!(a.file.manifold.indices(), b.file.manifold.indices());
    }

    #[test]
    fn grid_search_scores_training_or_holdout() {
        let s = random(20, 24, 3);
        let grid = ModelSelection::Grid {
            grid_a: vec![1e-2, 1e-1],
            grid_h: vec![1e-2, 1e-1],
        };
        let mut opts = TrainOptions {
            manifold: ManifoldOptions::new(Method::QmLeading, 3),
            selection: grid,
            holdout: None,
        };
        let trained = train_model(&s, &opts).unwrap();
        let f = &trained.file;
        let direct = opinf::prediction_error(&f.model, &f.manifold, &s, f.meta.guard).unwrap();
        assert_eq!(trained.selection_score, Some(direct));
        opts.holdout = Some(0.25);
        assert!(train_model(&s, &opts).unwrap().selection_score.is_some());
    }

    #[test]
    fn benchmark_marks_failures_and_keeps_order() {
        let train = random(20, 12, 4);
        let test = random(20, 8, 5);
        let mut opts = BenchmarkOptions::new(vec![2, 50], vec![1e-4]);
        opts.grid_a = vec![1e-2];
        opts.grid_h = vec![1e-2];
        let report = run_benchmark(&train, &test, &opts).unwrap();
        let keys: Vec<(String, usize)> = report.rows.iter().map(|r| (r.method.clone(), r.r)).collect();
        assert_eq!(keys.len(), 8);
        assert_eq!(keys[0], ("linear".to_string(), 2));
        assert_eq!(keys[1], ("linear".to_string(), 50));
        assert_eq!(keys[7], ("qm-oiaware".to_string(), 50));
        for row in &report.rows {
            assert_eq!(row.r == 50, row.outcome == Outcome::Failed);
        }
        assert!(report.to_csv_string().contains(",failed,failed,failed,failed,"));
    }

    #[test]
    fn slice_picks_nearest_grid_line() {
        // 4 x 2 grid, x1 fastest
        let s = DenseMatrix::from_column_slice(8, 1, &[0.0, 1.0, 2.0, 3.0, 10.0, 11.0, 12.0, 13.0]);
        let spec = SliceSpec {
            domain: (0.0, 4.0),
            ..SliceSpec::new(4, SliceAxis::X1, 2.2)
        };
        let (coords, v) = slice_snapshots(&s, &spec).unwrap();
        assert_eq!(coords, vec![0.0, 2.0]);
        assert_eq!(v.row(0).iter().copied().collect::<Vec<_>>(), vec![2.0, 12.0]);
        let spec = SliceSpec {
            axis: SliceAxis::X2,
            position: 2.1,
            ..spec
        };
        let (coords, v) = slice_snapshots(&s, &spec).unwrap();
        assert_eq!(coords, vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(
            v.row(0).iter().copied().collect::<Vec<_>>(),
            vec![10.0, 11.0, 12.0, 13.0]
        );
        let outside = SliceSpec { position: 4.0, ..spec };
        assert!(slice_snapshots(&s, &outside).is_err());
    }

    #[test]
    fn constant_field_slices_are_constant() {
        let s = DenseMatrix::from_element(64, 3, 2.5);
        let (_, v) = slice_snapshots(&s, &SliceSpec::new(8, SliceAxis::X2, 0.3)).unwrap();
        assert!(v.iter().all(|x| *x == 2.5));
    }

    #[test]
    fn trace_file_lists_every_candidate() {
        let s = random(15, 12, 6);
        let svd = thin_svd(&s, DEFAULT_SVD_REL_TOL).unwrap();
        let mut cfg = GreedyConfig::new(2, 1e-4);
        cfg.q = Some(5);
        let (_, trace) = greedy::select(&svd, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_trace(&trace, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1 + 5 + 4);
        assert_eq!(text.lines().filter(|l| l.contains(",true,")).count(), 2);
        assert_eq!(trace_path(Path::new("a/m.qmrm")), PathBuf::from("a/m.qmrm.trace.csv"));
    }
}
