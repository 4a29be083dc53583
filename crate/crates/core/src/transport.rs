//! Snapshot generator for the rotating-Gaussian transport problem
//! `u_t = x1 u_{x2} - x2 u_{x1}` on the periodic square `[-pi, pi)^2`,
//! discretized with Fourier pseudo-spectral derivatives and classical RK4.
//!
//! Grid fields are `N x N` matrices whose row index runs over `x1` and
//! column index over `x2`, so the column-major flattening has `x1` fastest.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DVector;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct TransportConfig {
    pub modes_per_dim: usize,
    pub dt: f64,
    pub steps: usize,
    pub gaussian_center: (f64, f64),
    pub gaussian_sharpness: f64,
}

impl TransportConfig {
    pub const DEFAULT_DT: f64 = 2.0 * PI * 1e-3;

    pub fn new(modes_per_dim: usize, steps: usize) -> Self {
        Self {
            modes_per_dim,
            dt: Self::DEFAULT_DT,
            steps,
            gaussian_center: (1.0, 0.0),
            gaussian_sharpness: 80.0,
        }
    }

    /// 64 modes per dimension and 1000 steps.
    pub fn desk() -> Self {
        Self::new(64, 1000)
    }

    /// 128 modes per dimension and 2000 steps.
    pub fn full_scale() -> Self {
        Self::new(128, 2000)
    }

    pub fn state_dim(&self) -> usize {
        self.modes_per_dim * self.modes_per_dim
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.modes_per_dim;
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::invalid(format!(
                "modes per dimension must be a power of two >= 8, got {n}"
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("time step must be positive, got {}", self.dt)));
        }
        if self.steps < 2 {
            return Err(Error::invalid("at least two time steps are required"));
        }
        if !(self.gaussian_sharpness > 0.0) {
            return Err(Error::invalid("Gaussian sharpness must be positive"));
        }
        Ok(())
    }
}

/// Grid coordinates `-pi + 2 pi m / N`, `m = 0..N`.
pub fn grid_points(n: usize) -> Vec<f64> {
    (0..n).map(|m| -PI + 2.0 * PI * m as f64 / n as f64).collect()
}

/// Samples of a field on the uniform `N x N` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    values: DenseMatrix,
}

impl GridField {
    pub fn new(values: DenseMatrix) -> Result<Self> {
        if values.nrows() != values.ncols() || values.nrows() == 0 {
            return Err(Error::dims(format!(
                "grid field must be square, got {:?}",
                values.shape()
            )));
        }
        crate::numerics::check_finite(&values, "grid field")?;
        Ok(Self { values })
    }

    /// Evaluates `f(x1, x2)` on the grid.
    pub fn from_fn(n: usize, f: impl Fn(f64, f64) -> f64) -> Self {
        let x = grid_points(n);
        Self {
            values: DenseMatrix::from_fn(n, n, |i, j| f(x[i], x[j])),
        }
    }

    /// Reshapes a snapshot column (`x1` fastest).
    pub fn from_column(n: usize, column: &[f64]) -> Result<Self> {
        if column.len() != n * n {
            return Err(Error::dims(format!(
                "snapshot of length {} is not a {n}x{n} grid",
                column.len()
            )));
        }
        Self::new(DenseMatrix::from_column_slice(n, n, column))
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DenseMatrix {
        &self.values
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice()
    }

    pub fn to_column(&self) -> DVector<f64> {
        DVector::from_column_slice(self.values.as_slice())
    }

    pub fn norm(&self) -> f64 {
        self.values.norm()
    }
}

fn gaussian(cfg: &TransportConfig, x1: f64, x2: f64) -> f64 {
    let (c1, c2) = cfg.gaussian_center;
    (-cfg.gaussian_sharpness * ((x1 - c1).powi(2) + (x2 - c2).powi(2))).exp()
}

/// `u0(x) = exp(-80 ((x1 - 1)^2 + x2^2))` (center and sharpness from `cfg`).
pub fn initial_condition(cfg: &TransportConfig) -> GridField {
    GridField::from_fn(cfg.modes_per_dim, |x1, x2| gaussian(cfg, x1, x2))
}

/// Exact solution at time `t`: the initial condition rotated clockwise by
/// angle `t`, i.e. `u(t, x) = u0(cos t x1 - sin t x2, sin t x1 + cos t x2)`.
/// Periodic images are ignored, which is exact to double precision for the
/// default Gaussian.
pub fn exact_solution(cfg: &TransportConfig, t: f64) -> GridField {
    let (s, c) = t.sin_cos();
    GridField::from_fn(cfg.modes_per_dim, |x1, x2| {
        gaussian(cfg, c * x1 - s * x2, s * x1 + c * x2)
    })
}

/// Pseudo-spectral right-hand side with reusable FFT plans and buffers.
pub struct Solver {
    n: usize,
    x: Vec<f64>,
    wavenumbers: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    line: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

impl Solver {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        // Integer wavenumbers 0, 1, .., N/2 - 1, -N/2, .., -1 with the
        // Nyquist mode zeroed, since its derivative is not real.
        let wavenumbers = (0..n)
            .map(|m| {
                if 2 * m < n {
                    m as f64
                } else if 2 * m == n {
                    0.0
                } else {
                    m as f64 - n as f64
                }
            })
            .collect();
        Self {
            n,
            x: grid_points(n),
            wavenumbers,
            forward,
            inverse,
            line: vec![Complex::default(); n],
            scratch: vec![Complex::default(); scratch_len],
            d1: vec![0.0; n * n],
            d2: vec![0.0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Differentiates one line of samples in place of `self.line`.
    fn differentiate_line(&mut self) {
        let n = self.n;
        self.forward.process_with_scratch(&mut self.line, &mut self.scratch);
        let scale = 1.0 / n as f64;
        for (c, &k) in self.line.iter_mut().zip(&self.wavenumbers) {
            // multiply by i k, normalize the inverse transform
            *c = Complex::new(-k * c.im, k * c.re) * scale;
        }
        self.inverse.process_with_scratch(&mut self.line, &mut self.scratch);
    }

    /// Writes `x1 du/dx2 - x2 du/dx1` for a flattened field into `out`.
    pub fn rhs_into(&mut self, u: &[f64], out: &mut [f64]) {
        let n = self.n;
        assert_eq!(u.len(), n * n);
        assert_eq!(out.len(), n * n);
        // d/dx1 runs along contiguous columns.
        for j in 0..n {
            for i in 0..n {
                self.line[i] = Complex::new(u[i + j * n], 0.0);
            }
            self.differentiate_line();
            for i in 0..n {
                self.d1[i + j * n] = self.line[i].re;
            }
        }
        // d/dx2 runs along strided rows.
        for i in 0..n {
            for j in 0..n {
                self.line[j] = Complex::new(u[i + j * n], 0.0);
            }
            self.differentiate_line();
            for j in 0..n {
                self.d2[i + j * n] = self.line[j].re;
            }
        }
        for j in 0..n {
            for i in 0..n {
                let idx = i + j * n;
                out[idx] = self.x[i] * self.d2[idx] - self.x[j] * self.d1[idx];
            }
        }
    }

    pub fn rhs(&mut self, u: &GridField) -> GridField {
        let mut out = vec![0.0; self.n * self.n];
        self.rhs_into(u.as_slice(), &mut out);
        GridField {
            values: DenseMatrix::from_vec(self.n, self.n, out),
        }
    }

    /// One classical RK4 step of size `dt`, in place.
    pub fn rk4_step_in_place(&mut self, u: &mut [f64], dt: f64, work: &mut Rk4Work) {
        let len = u.len();
        work.resize(len);
        let Rk4Work { k1, k2, k3, k4, stage } = work;
        self.rhs_into(u, k1);
        for i in 0..len {
            stage[i] = u[i] + 0.5 * dt * k1[i];
        }
        self.rhs_into(stage, k2);
        for i in 0..len {
            stage[i] = u[i] + 0.5 * dt * k2[i];
        }
        self.rhs_into(stage, k3);
        for i in 0..len {
            stage[i] = u[i] + dt * k3[i];
        }
        self.rhs_into(stage, k4);
        for i in 0..len {
            u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }

    pub fn rk4_step(&mut self, u: &GridField, dt: f64) -> GridField {
        let mut values = u.values.clone();
        let mut work = Rk4Work::default();
        self.rk4_step_in_place(values.as_mut_slice(), dt, &mut work);
        GridField { values }
    }
}

/// Stage buffers for [`Solver::rk4_step_in_place`].
#[derive(Debug, Default)]
pub struct Rk4Work {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    stage: Vec<f64>,
}

impl Rk4Work {
    fn resize(&mut self, len: usize) {
        for v in [&mut self.k1, &mut self.k2, &mut self.k3, &mut self.k4, &mut self.stage] {
            v.resize(len, 0.0);
        }
    }
}

pub fn rhs(u: &GridField) -> GridField {
    Solver::new(u.n()).rhs(u)
}

pub fn rk4_step(u: &GridField, dt: f64) -> GridField {
    Solver::new(u.n()).rk4_step(u, dt)
}

/// Snapshot matrix with `N^2` rows and `cfg.steps` columns; column `j`
/// holds the state after `j + 1` time steps.
pub fn generate(cfg: &TransportConfig) -> Result<DenseMatrix> {
    cfg.validate()?;
    let n = cfg.modes_per_dim;
    let mut solver = Solver::new(n);
    let mut work = Rk4Work::default();
    let mut u = initial_condition(cfg).values.as_slice().to_vec();
    let mut snapshots = DenseMatrix::zeros(n * n, cfg.steps);
    for step in 0..cfg.steps {
        solver.rk4_step_in_place(&mut u, cfg.dt, &mut work);
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("transport state after step {}", step + 1)));
        }
        snapshots.column_mut(step).copy_from_slice(&u);
    }
    Ok(snapshots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rel(a: &GridField, b: &GridField) -> f64 {
        (a.values() - b.values()).norm() / b.norm()
    }

    #[test]
    fn initial_condition_samples() {
        let cfg = TransportConfig::new(64, 2);
        let u = initial_condition(&cfg);
        let x = grid_points(64);
        // grid point nearest (1, 0)
        let i = (0..64)
            .min_by(|&a, &b| (x[a] - 1.0).abs().total_cmp(&(x[b] - 1.0).abs()))
            .unwrap();
        let j = 32;
        assert_eq!(x[j], 0.0);
        let expected = (-80.0 * (x[i] - 1.0).powi(2)).exp();
        assert_relative_eq!(u.values()[(i, j)], expected, epsilon = 1e-15);
        assert!((u.values()[(i, j)] - 1.0).abs() <= 0.2);
        assert!(u.values()[(0, 0)] <= 1e-100);
    }

    #[test]
    fn initial_mass_matches_gaussian_integral() {
        // At N = 64 the spacing exceeds the Gaussian width and the
        // trapezoidal sum is off by about 8e-6; N = 128 resolves it.
        let u = initial_condition(&TransportConfig::new(128, 2));
        let h = 2.0 * PI / 128.0;
        let mass: f64 = u.values().iter().sum::<f64>() * h * h;
        assert_relative_eq!(mass, PI / 80.0, max_relative = 1e-6);
    }

    #[test]
    fn peak_is_near_one_on_fine_grid() {
        // At N = 128 the nearest node sits 0.0179 from x1 = 1.
        let u = initial_condition(&TransportConfig::new(128, 2));
        assert!((u.values().max() - 1.0).abs() <= 0.03);
    }

    #[test]
    fn constant_field_has_zero_rhs() {
        let u = GridField::from_fn(16, |_, _| 3.5);
        assert!(rhs(&u).values().amax() <= 1e-13);
    }

    #[test]
    fn single_mode_derivative() {
        let u = GridField::from_fn(32, |x1, _| x1.sin());
        let exact = GridField::from_fn(32, |x1, x2| -x2 * x1.cos());
        assert!((rhs(&u).values() - exact.values()).amax() <= 1e-10);
        let u = GridField::from_fn(32, |_, x2| (3.0 * x2).cos());
        let exact = GridField::from_fn(32, |x1, x2| -3.0 * x1 * (3.0 * x2).sin());
        assert!((rhs(&u).values() - exact.values()).amax() <= 1e-10);
    }

    #[test]
    fn radial_field_does_not_rotate() {
        let u = GridField::from_fn(64, |x1, x2| (-5.0 * (x1 * x1 + x2 * x2)).exp());
        assert!(rhs(&u).norm() <= 1e-8 * u.norm());
    }

    #[test]
    fn zero_step_is_identity() {
        let u = initial_condition(&TransportConfig::new(32, 2));
        assert_eq!(rk4_step(&u, 0.0), u);
    }

    #[test]
    fn one_step_preserves_norm() {
        // RK4 damps a purely oscillatory mode by about (w dt)^6 / 144 per
        // step, so the loss depends on how much energy sits at high
        // wavenumbers. The sharp Gaussian loses about 4e-9 per step.
        let cfg = TransportConfig::new(64, 2);
        let u = initial_condition(&cfg);
        let v = rk4_step(&u, cfg.dt);
        assert_relative_eq!(v.norm(), u.norm(), max_relative = 1e-8);
        let smooth = GridField::from_fn(32, |x1, x2| (x1.cos() * x2.sin()).exp());
        let w = rk4_step(&smooth, cfg.dt);
        assert_relative_eq!(w.norm(), smooth.norm(), max_relative = 1e-10);
    }

    #[test]
    fn rk4_local_error_is_fifth_order() {
        // Smooth, well resolved field so that the time error dominates.
        let u = GridField::from_fn(32, |x1, x2| (x1.cos() + (2.0 * x2).sin()).exp());
        let mut solver = Solver::new(32);
        let defect = |dt: f64, solver: &mut Solver| {
            let one = solver.rk4_step(&u, dt);
            let half = solver.rk4_step(&u, dt / 2.0);
            let two = solver.rk4_step(&half, dt / 2.0);
            (one.values() - two.values()).norm()
        };
        let d1 = defect(0.04, &mut solver);
        let d2 = defect(0.02, &mut solver);
        let ratio = d1 / d2;
        assert!((24.0..40.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn rotation_direction_matches_exact_solution() {
        let cfg = TransportConfig::new(64, 250);
        let snaps = generate(&cfg).unwrap();
        let t = 250.0 * cfg.dt;
        let last = GridField::from_column(64, snaps.column(249).as_slice()).unwrap();
        let forward = rel(&last, &exact_solution(&cfg, t));
        let backward = rel(&last, &exact_solution(&cfg, -t));
        assert!(forward < 0.1, "error {forward}");
        assert!(backward > 0.5);
    }

    #[test]
    fn spectral_convergence_in_space() {
        // Quarter rotation; the time error is far below the spatial error at
        // both resolutions.
        let err = |n: usize| {
            let mut cfg = TransportConfig::new(n, 250);
            cfg.dt = PI / 2.0 / 250.0;
            let snaps = generate(&cfg).unwrap();
            let last = GridField::from_column(n, snaps.column(249).as_slice()).unwrap();
            rel(&last, &exact_solution(&cfg, PI / 2.0))
        };
        let coarse = err(64);
        let fine = err(128);
        assert!(fine * 100.0 <= coarse, "64: {coarse}, 128: {fine}");
    }

    #[test]
    fn smooth_field_is_conserved_over_many_steps() {
        let u0 = GridField::from_fn(32, |x1, x2| (x1.cos() * x2.sin()).exp());
        let mut solver = Solver::new(32);
        let mut work = Rk4Work::default();
        let mut u = u0.as_slice().to_vec();
        for _ in 0..2000 {
            solver.rk4_step_in_place(&mut u, TransportConfig::DEFAULT_DT, &mut work);
        }
        let norm = DVector::from_vec(u).norm();
        assert!((norm - u0.norm()).abs() <= 1e-7 * u0.norm());
    }

    #[test]
    fn generate_shapes_and_validation() {
        let cfg = TransportConfig::new(16, 4);
        let s = generate(&cfg).unwrap();
        assert_eq!(s.shape(), (256, 4));
        let first = rk4_step(&initial_condition(&cfg), cfg.dt);
        assert_eq!(s.column(0).as_slice(), first.as_slice());
        assert!(generate(&TransportConfig::new(12, 4)).is_err());
        assert!(generate(&TransportConfig::new(16, 1)).is_err());
    }

    #[test]
    fn column_roundtrip() {
        let u = GridField::from_fn(8, |x1, x2| x1 + 10.0 * x2);
        let back = GridField::from_column(8, u.to_column().as_slice()).unwrap();
        assert_eq!(back, u);
        // x1 is the fastest index
        let x = grid_points(8);
        assert_eq!(u.as_slice()[1], x[1] + 10.0 * x[0]);
    }
}
