//! Thin SVD of a snapshot matrix and the energy captured by leading modes.

use qmrom::numerics::{thin_svd, DEFAULT_SVD_REL_TOL};
use qmrom::transport::{generate, TransportConfig};

fn main() -> qmrom::Result<()> {
    let snapshots = generate(&TransportConfig::new(32, 500))?;
    let svd = thin_svd(&snapshots, DEFAULT_SVD_REL_TOL)?;
    let sigma = svd.singular_values();
    let total: f64 = sigma.iter().map(|s| s * s).sum();

    println!(
        "{} x {} snapshots, numerical rank {}",
        svd.nrows(),
        svd.ncols(),
        svd.rank()
    );
    let mut captured = 0.0;
    for (j, s) in sigma.iter().enumerate().take(30) {
        captured += s * s;
        println!("{:>3} {:>12.4e} {:>10.6}", j + 1, s, captured / total);
    }
    let err = (svd.reconstruct() - &snapshots).norm() / snapshots.norm();
    println!("reconstruction error {err:.2e}");
    Ok(())
}
