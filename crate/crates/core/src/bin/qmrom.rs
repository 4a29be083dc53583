use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qmrom::cli::{
    self, BenchmarkOptions, ManifoldOptions, ModelSelection, SliceAxis, SliceSpec, SplitScheme, TrainOptions,
};
use qmrom::format::Method;
use qmrom::greedy::InLoopModel;
use qmrom::manifold::Coordinates;
use qmrom::transport::TransportConfig;
use qmrom::{Error, Result};

#[derive(Parser)]
#[command(
    name = "qmrom",
    version,
    about = "Quadratic manifolds and operator-inference reduced models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the rotating Gaussian and write its snapshots.
    Generate(GenerateArgs),
    /// Split a snapshot file into training and test files.
    Split(SplitArgs),
    /// Train a manifold and a reduced model on a snapshot file.
    Train(TrainArgs),
    /// Append test reconstruction and prediction errors of a model to a CSV file.
    Eval(EvalArgs),
    /// Sweep methods, dimensions and regularization; write a CSV report.
    Benchmark(BenchmarkArgs),
    /// Write the reduced coordinates of each snapshot as CSV.
    Embed(EmbedArgs),
    /// Write a line through each snapshot grid as CSV.
    Slice(SliceArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Fourier modes per dimension [default: 64, or 128 with --paper-scale]
    #[arg(long)]
    n: Option<usize>,
    /// Time step [default: 2*pi*1e-3]
    #[arg(long)]
    dt: Option<f64>,
    /// Number of time steps [default: 1000, or 2000 with --paper-scale]
    #[arg(long)]
    steps: Option<usize>,
    /// Use the full-scale configuration (N = 128, 2000 steps).
    #[arg(long = "paper-scale")]
    full_scale: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Contiguous,
    Interleave,
}

#[derive(Args)]
struct SplitArgs {
    input: PathBuf,
    #[arg(long, value_enum, default_value = "contiguous")]
    scheme: SchemeArg,
    /// Training and test output files.
    #[arg(long, num_args = 2, value_names = ["TRAIN", "TEST"])]
    out: Vec<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Linear,
    QmLeading,
    QmGreedy,
    QmOiaware,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Linear => Method::Linear,
            MethodArg::QmLeading => Method::QmLeading,
            MethodArg::QmGreedy => Method::QmGreedy,
            MethodArg::QmOiaware => Method::QmOiAware,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CoordinatesArg {
    Isotropic,
    Unscaled,
}

#[derive(Clone, Copy, ValueEnum)]
enum InLoopArg {
    Augmented,
    Previous,
}

/// Options shared by `train` and `benchmark`.
#[derive(Args)]
struct Common {
    /// Candidate pool size for greedy selection [default: min(5r, rank)]
    #[arg(long)]
    q: Option<usize>,
    /// Weight of the model error in the OI-aware objective.
    #[arg(long, default_value_t = 1.0)]
    gamma_op: f64,
    /// Linear-operator regularization (in-loop fits, and the final fit when no grid is given).
    #[arg(long, default_value_t = 1e-3)]
    gamma_a: f64,
    /// Quadratic-operator regularization (in-loop fits, and the final fit when no grid is given).
    #[arg(long, default_value_t = 1e-3)]
    gamma_h: f64,
    /// Grid of linear-operator regularization values, comma separated.
    #[arg(long, value_delimiter = ',')]
    grid_a: Option<Vec<f64>>,
    /// Grid of quadratic-operator regularization values, comma separated.
    #[arg(long, value_delimiter = ',')]
    grid_h: Option<Vec<f64>>,
    /// Choose grid points on this trailing fraction of the training data.
    #[arg(long)]
    holdout: Option<f64>,
    #[arg(long, value_enum, default_value = "isotropic")]
    coordinates: CoordinatesArg,
    /// Trajectory the in-loop model is fitted to.
    #[arg(long, value_enum, default_value = "augmented")]
    in_loop: InLoopArg,
}

impl Common {
    fn coordinates(&self) -> Coordinates {
        match self.coordinates {
            CoordinatesArg::Isotropic => Coordinates::Isotropic,
            CoordinatesArg::Unscaled => Coordinates::Unscaled,
        }
    }

    fn in_loop(&self) -> InLoopModel {
        match self.in_loop {
            InLoopArg::Augmented => InLoopModel::Augmented,
            InLoopArg::Previous => InLoopModel::Previous,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    input: PathBuf,
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long)]
    r: usize,
    /// Regularization of the quadratic coefficients.
    #[arg(long, default_value_t = 1e-4)]
    gamma: f64,
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    model: PathBuf,
    test: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    train: PathBuf,
    test: PathBuf,
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "linear,qm-leading,qm-greedy,qm-oiaware"
    )]
    method: Vec<MethodArg>,
    #[arg(long, value_delimiter = ',', default_value = "5,10,15,20")]
    r: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1e-6,1e-4,1e-2")]
    gamma: Vec<f64>,
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EmbedArgs {
    model: PathBuf,
    snapshots: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    X1,
    X2,
}

#[derive(Args)]
struct SliceArgs {
    input: PathBuf,
    /// Grid points along x1; the x2 count is the snapshot length over N.
    #[arg(long)]
    n: usize,
    /// Axis held fixed.
    #[arg(long, value_enum)]
    axis: AxisArg,
    /// Coordinate of the fixed axis; the nearest grid line is used.
    #[arg(long, allow_negative_numbers = true)]
    position: f64,
    /// Domain bounds shared by both axes.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    domain: Option<Vec<f64>>,
    #[arg(long)]
    out: PathBuf,
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate(a) => {
            let mut cfg = if a.full_scale {
                TransportConfig::full_scale()
            } else {
                TransportConfig::desk()
            };
            if let Some(n) = a.n {
                cfg.modes_per_dim = n;
            }
            if let Some(steps) = a.steps {
                cfg.steps = steps;
            }
            if let Some(dt) = a.dt {
                cfg.dt = dt;
            }
            let (n, k) = cli::cmd_generate(&cfg, &a.out)?;
            println!("wrote {} (n = {n}, k = {k})", a.out.display());
        }
        Command::Split(a) => {
            let scheme = match a.scheme {
                SchemeArg::Contiguous => SplitScheme::Contiguous,
                SchemeArg::Interleave => SplitScheme::Interleave,
            };
            let (train, test) = cli::cmd_split(&a.input, scheme, &a.out[0], &a.out[1])?;
            println!("train: {train} snapshots, test: {test} snapshots");
        }
        Command::Train(a) => {
            let c = &a.common;
            let selection = match (&c.grid_a, &c.grid_h) {
                (None, None) => ModelSelection::Fixed {
                    gamma_a: c.gamma_a,
                    gamma_h: c.gamma_h,
                },
                (ga, gh) => ModelSelection::Grid {
                    grid_a: ga.clone().unwrap_or_else(|| vec![c.gamma_a]),
                    grid_h: gh.clone().unwrap_or_else(|| vec![c.gamma_h]),
                },
            };
            let opts = TrainOptions {
                manifold: ManifoldOptions {
                    method: a.method.into(),
                    r: a.r,
                    q: c.q,
                    gamma: a.gamma,
                    gamma_op: c.gamma_op,
                    in_loop_gamma_a: c.gamma_a,
                    in_loop_gamma_h: c.gamma_h,
                    coordinates: c.coordinates(),
                    in_loop: c.in_loop(),
                },
                selection,
                holdout: c.holdout,
            };
            let trained = cli::cmd_train(&a.input, &opts, &a.out)?;
            let indices: Vec<String> = trained
                .file
                .manifold
                .indices()
                .iter()
                .map(|j| (j + 1).to_string())
                .collect();
            println!("indices: {}", indices.join(","));
            println!(
                "gamma_a = {}, gamma_h = {}",
                trained.file.model.gamma_a(),
                trained.file.model.gamma_h()
            );
            if let Some(score) = trained.selection_score {
                println!("selection error: {score}");
            }
        }
        Command::Eval(a) => {
            let row = cli::cmd_eval(&a.model, &a.test, &a.out)?;
            if let (Some(recon), Some(pred)) = (row.recon_error(), row.pred_error()) {
                println!("recon_error_test = {recon}, pred_error_test = {pred}");
            }
        }
        Command::Benchmark(a) => {
            let c = &a.common;
            let mut opts = BenchmarkOptions::new(a.r.clone(), a.gamma.clone());
            opts.methods = a.method.iter().map(|&m| m.into()).collect();
            if let Some(g) = &c.grid_a {
                opts.grid_a = g.clone();
            }
            if let Some(g) = &c.grid_h {
                opts.grid_h = g.clone();
            }
            opts.gamma_op = c.gamma_op;
            opts.q = c.q;
            opts.in_loop_gamma_a = c.gamma_a;
            opts.in_loop_gamma_h = c.gamma_h;
            opts.coordinates = c.coordinates();
            opts.in_loop = c.in_loop();
            opts.holdout = c.holdout;
            let report = cli::cmd_benchmark(&a.train, &a.test, &opts, &a.out)?;
            print!("{}", report.to_csv_string());
        }
        Command::Embed(a) => {
            let z = cli::cmd_embed(&a.model, &a.snapshots, &a.out)?;
            println!("wrote {} rows of {} coordinates", z.ncols(), z.nrows());
        }
        Command::Slice(a) => {
            let axis = match a.axis {
                AxisArg::X1 => SliceAxis::X1,
                AxisArg::X2 => SliceAxis::X2,
            };
            let mut spec = SliceSpec::new(a.n, axis, a.position);
            if let Some(d) = a.domain {
                spec.domain = (d[0], d[1]);
            }
            let values = cli::cmd_slice(&a.input, &spec, &a.out)?;
            println!("wrote {} rows of {} values", values.nrows(), values.ncols());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = match Cli::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = cli::configure_threads().and_then(|()| run(args.command));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    e.exit_code() as u8
}
