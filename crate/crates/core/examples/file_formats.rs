//! Writes and reads snapshot and model files and checks that the bytes
//! survive a round trip unchanged.

use qmrom::format::{read_snapshots, write_snapshots, Method, ModelFile, ModelMeta};
use qmrom::greedy::{train, GreedyConfig, InLoopModel};
use qmrom::numerics::{thin_svd, DEFAULT_SVD_REL_TOL};
use qmrom::opinf::{default_guard, fit};
use qmrom::transport::{generate, TransportConfig};

fn main() -> qmrom::Result<()> {
    let dir = std::env::temp_dir().join("qmrom-file-formats");
    std::fs::create_dir_all(&dir)?;

    let snapshots = generate(&TransportConfig::new(16, 40))?;
    let snap_path = dir.join("snapshots.qmsm");
    write_snapshots(&snap_path, &snapshots)?;
    let back = read_snapshots(&snap_path)?;
    println!(
        "{}: {} bytes, identical = {}",
        snap_path.display(),
        std::fs::metadata(&snap_path)?.len(),
        back == snapshots
    );

    let svd = thin_svd(&snapshots, DEFAULT_SVD_REL_TOL)?;
    let cfg = GreedyConfig::new(4, 1e-4);
    let manifold = train(&svd, &cfg)?;
    let reduced = manifold.encode(&snapshots)?;
    let file = ModelFile {
        model: fit(&reduced, 1e-3, 1e-3)?,
        meta: ModelMeta {
            method: Method::QmOiAware,
            q: Some(cfg.pool_size(svd.rank())),
            gamma_op: cfg.gamma_op,
            in_loop: InLoopModel::Augmented,
            guard: default_guard(&reduced),
        },
        manifold,
    };
    let model_path = dir.join("model.qmrm");
    file.write(&model_path)?;
    let bytes = std::fs::read(&model_path)?;
    let header_end = bytes.windows(2).position(|w| w == b"\n\n").expect("header terminator");
    println!("{} header:", model_path.display());
    print!("{}", String::from_utf8_lossy(&bytes[8..header_end + 1]));
    let reread = ModelFile::read(&model_path)?;
    println!("identical after re-encoding = {}", reread.to_bytes() == bytes);
    Ok(())
}
