//! Rotating-Gaussian benchmark: generate snapshots, split them in time,
//! train every method and report test reconstruction and prediction errors.
//!
//!     cargo run --release --example transport_benchmark -- --n 64 --steps 2000 --r 20 --gamma 1e-4

use std::time::Instant;

use clap::Parser;
use qmrom::cli::{run_benchmark, split_columns, BenchmarkOptions, SplitScheme};
use qmrom::format::Method;
use qmrom::manifold::Coordinates;
use qmrom::transport::{generate, TransportConfig};

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 64)]
    n: usize,
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    #[arg(long, value_delimiter = ',', default_value = "20")]
    r: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1e-4")]
    gamma: Vec<f64>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    gamma_op: f64,
    /// Fit the manifold penalty in unscaled coordinates.
    #[arg(long)]
    unscaled: bool,
}

fn main() -> qmrom::Result<()> {
    let args = Args::parse();
    let start = Instant::now();
    let snapshots = generate(&TransportConfig::new(args.n, args.steps))?;
    let (train, test) = split_columns(&snapshots, SplitScheme::Contiguous)?;
    println!(
        "generated {} x {} snapshots in {:.1} s",
        snapshots.nrows(),
        snapshots.ncols(),
        start.elapsed().as_secs_f64()
    );

    let mut opts = BenchmarkOptions::new(args.r, args.gamma);
    opts.methods = Method::ALL.to_vec();
    opts.q = args.q;
    opts.gamma_op = args.gamma_op;
    if args.unscaled {
        opts.coordinates = Coordinates::Unscaled;
    }
    let report = run_benchmark(&train, &test, &opts)?;
    print!("{}", report.to_csv_string());
    Ok(())
}
