//! Trains an OI-aware manifold, writes the reduced coordinates of the
//! training data and a slice of the predicted fields through x1 = 1.

use qmrom::cli::{
    cmd_embed, cmd_slice, cmd_split, cmd_train, predict, ManifoldOptions, ModelSelection, SliceAxis, SliceSpec,
    SplitScheme, TrainOptions,
};
use qmrom::format::{read_snapshots, write_snapshots, Method};
use qmrom::transport::{generate, TransportConfig};

fn main() -> qmrom::Result<()> {
    let dir = std::env::temp_dir().join("qmrom-embed");
    std::fs::create_dir_all(&dir)?;
    let all = dir.join("all.qmsm");
    let (train, test) = (dir.join("train.qmsm"), dir.join("test.qmsm"));
    write_snapshots(&all, &generate(&TransportConfig::new(32, 400))?)?;
    cmd_split(&all, SplitScheme::Contiguous, &train, &test)?;

    let opts = TrainOptions {
        manifold: ManifoldOptions::new(Method::QmOiAware, 6),
        selection: ModelSelection::Grid {
            grid_a: vec![1e-4, 1e-3, 1e-2, 1e-1],
            grid_h: vec![1e-4, 1e-3, 1e-2, 1e-1],
        },
        holdout: None,
    };
    let model = dir.join("model.qmrm");
    let trained = cmd_train(&train, &opts, &model)?;

    let z = cmd_embed(&model, &train, &dir.join("embedding.csv"))?;
    let row_norms: Vec<String> = z.row_iter().map(|r| format!("{:.6}", r.norm())).collect();
    println!("reduced coordinate norms over training data: {}", row_norms.join(" "));

    let predicted = predict(&trained.file, &read_snapshots(&test)?)?;
    let pred_path = dir.join("prediction.qmsm");
    write_snapshots(&pred_path, &predicted)?;
    let slice = cmd_slice(
        &pred_path,
        &SliceSpec::new(32, SliceAxis::X1, 1.0),
        &dir.join("slice.csv"),
    )?;
    println!(
        "wrote {} slices of {} points to {}",
        slice.nrows(),
        slice.ncols(),
        dir.join("slice.csv").display()
    );
    Ok(())
}
