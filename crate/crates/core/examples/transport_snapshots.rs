//! Simulates one full rotation of the Gaussian and compares the result with
//! the exact solution at a few times.
//!
//!     cargo run --release --example transport_snapshots -- 128

use std::f64::consts::PI;

use qmrom::transport::{exact_solution, generate, initial_condition, GridField, TransportConfig};

fn main() -> qmrom::Result<()> {
    let n: usize = std::env::args()
        .nth(1)
        .map_or(Ok(64), |s| s.parse())
        .expect("N must be an integer");
    let cfg = TransportConfig::new(n, 1000);
    let snapshots = generate(&cfg)?;
    let u0 = initial_condition(&cfg);

    println!("N = {n}, dt = {:.6}, {} steps", cfg.dt, cfg.steps);
    println!("{:>8} {:>14} {:>14}", "step", "rel. error", "norm drift");
    for step in [250, 500, 750, 1000] {
        let u = GridField::from_column(n, snapshots.column(step - 1).as_slice())?;
        let exact = exact_solution(&cfg, step as f64 * cfg.dt);
        let err = (u.values() - exact.values()).norm() / exact.norm();
        let drift = (u.norm() - u0.norm()).abs() / u0.norm();
        println!("{step:>8} {err:>14.3e} {drift:>14.3e}");
    }
    println!(
        "period 2 pi = {:.6}, elapsed time = {:.6}",
        2.0 * PI,
        cfg.steps as f64 * cfg.dt
    );
    Ok(())
}
