//! Greedy selection of singular vectors with and without the model-error
//! term, printing the chosen indices and the per-iteration best scores.

use qmrom::greedy::{select, GreedyConfig};
use qmrom::numerics::{thin_svd, DEFAULT_SVD_REL_TOL};
use qmrom::transport::{generate, TransportConfig};

fn main() -> qmrom::Result<()> {
    let snapshots = generate(&TransportConfig::new(32, 400))?;
    let svd = thin_svd(&snapshots, DEFAULT_SVD_REL_TOL)?;

    for cfg in [GreedyConfig::reconstruction_only(8, 1e-4), GreedyConfig::new(8, 1e-4)] {
        let (indices, trace) = select(&svd, &cfg)?;
        let one_based: Vec<usize> = indices.iter().map(|j| j + 1).collect();
        println!("{}: {:?}", cfg.mode.as_str(), one_based);
        for it in &trace.iterations {
            let best = it
                .scores
                .iter()
                .find(|c| c.index == it.chosen)
                .expect("chosen candidate is scored");
            println!(
                "  iteration {:>2}: picked {:>3}  rec {:.4e}  total {}{}",
                it.iteration + 1,
                it.chosen + 1,
                best.rec,
                best.total,
                if it.fallback { "  (fallback)" } else { "" }
            );
        }
    }
    Ok(())
}
