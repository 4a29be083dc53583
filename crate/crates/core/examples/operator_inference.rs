//! Fits a quadratic reduced model to a known discrete-time system and
//! compares the recovered operators and rollout with the truth.

use nalgebra::DVector;
use qmrom::manifold::ReducedTrajectory;
use qmrom::numerics::DenseMatrix;
use qmrom::opinf::{default_guard, fit, rollout, ReducedModel};

fn main() -> qmrom::Result<()> {
    let (s, c) = 0.2f64.sin_cos();
    let a0 = DenseMatrix::from_row_slice(2, 2, &[0.99 * c, -0.99 * s, 0.99 * s, 0.99 * c]);
    let h0 = DenseMatrix::from_row_slice(2, 3, &[0.05, 0.0, -0.02, 0.0, 0.03, 0.0]);
    let truth = ReducedModel::new(a0.clone(), h0.clone(), 0.0, 0.0)?;

    let mut z = DVector::from_vec(vec![1.0, 0.2]);
    let mut states = DenseMatrix::zeros(2, 60);
    for j in 0..60 {
        states.set_column(j, &z);
        z = truth.step(&z);
    }
    let trajectory = ReducedTrajectory::new(states)?;

    for gamma in [1e-12, 1e-6, 1e-2] {
        let model = fit(&trajectory, gamma, gamma)?;
        let out = rollout(
            &model,
            &trajectory.column(0),
            trajectory.len(),
            default_guard(&trajectory),
        );
        let err = (out.trajectory - trajectory.states()).norm() / trajectory.states().norm();
        println!(
            "gamma {gamma:>7.0e}: |A - A0| = {:.2e}, |H - H0| = {:.2e}, rollout error {err:.2e}",
            (model.linear() - &a0).amax(),
            (model.quadratic() - &h0).amax(),
        );
    }
    Ok(())
}
