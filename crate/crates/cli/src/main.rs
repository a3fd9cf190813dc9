use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use complabel_cli::bounds::{bound_table, format_table, Complexity};
use complabel_cli::manifest::{methods_from_lists, parse_class_list, Command, DatasetSource, RunManifest};
use complabel_cli::{run_bench, run_combine, CheckSuite};
use complabel_core::{lipschitz_constant, synth_gaussian, write_csv, Architecture, BinaryLossKind};

#[derive(Parser)]
#[command(name = "complabel", version, about = "Learning from complementary labels")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Run the invariant suite; exits nonzero if any property fails.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train on complementary labels only and compare methods.
    Bench(RunArgs),
    /// Compare ordinary, complementary and combined supervision.
    Combine(RunArgs),
    /// Print estimation-error bounds for a sweep of sample sizes.
    Bounds(BoundsArgs),
    /// Write a synthetic Gaussian dataset as CSV.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON manifest; flags given on the command line override its fields.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// CSV path or `synth:k=3,d=2,sep=4`.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    label_col: Option<String>,
    /// 1-based class subset, e.g. `1,2,3` or `1-3`.
    #[arg(long)]
    classes: Option<String>,
    /// Comma-separated schemes: ova, pc, ml, pl.
    #[arg(long)]
    scheme: Option<String>,
    /// One binary loss for every scheme, or one per scheme.
    #[arg(long)]
    loss: Option<String>,
    #[arg(long)]
    model: Option<Architecture>,
    /// Weight of the ordinary term in the combined column (`combine` only).
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Comma-separated weight-decay values.
    #[arg(long, value_delimiter = ',')]
    lambda_grid: Option<Vec<f64>>,
    #[arg(long)]
    eval_stride: Option<usize>,
    #[arg(long)]
    train_per_class: Option<usize>,
    #[arg(long)]
    test_per_class: Option<usize>,
    /// Results CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    history_dir: Option<PathBuf>,
    #[arg(long)]
    models_dir: Option<PathBuf>,
}

impl RunArgs {
    fn into_manifest(self, command: Command) -> anyhow::Result<RunManifest> {
        let mut m = match (&self.manifest, &self.dataset) {
            (Some(path), _) => {
                let m = RunManifest::load(path)?;
                if m.command != command {
                    bail!("manifest {} is for `{}`", path.display(), m.command);
                }
                m
            }
            (None, Some(dataset)) => RunManifest::new(command, dataset.parse()?),
            (None, None) => bail!("give --dataset or --manifest"),
        };
        if let (Some(_), Some(dataset)) = (&self.manifest, &self.dataset) {
            m.dataset = dataset.parse()?;
        }
        if let Some(col) = self.label_col {
            match &mut m.dataset {
                DatasetSource::Csv { label_col, .. } => *label_col = col,
                DatasetSource::Synth { .. } => bail!("--label-col applies to CSV datasets only"),
            }
        }
        if let Some(classes) = self.classes {
            m.classes = Some(parse_class_list(&classes)?);
        }
        match (self.scheme, self.loss) {
            (None, None) => {}
            (scheme, loss) => {
                m.methods = methods_from_lists(scheme.as_deref().unwrap_or("pc"), loss.as_deref().unwrap_or("sigmoid"))?
            }
        }
        if let Some(model) = self.model {
            m.model = model;
        }
        if self.alpha.is_some() {
            m.alpha = self.alpha;
        }
        let t = &mut m.training;
        t.iterations = self.iterations.unwrap_or(t.iterations);
        t.batch_size = self.batch.unwrap_or(t.batch_size);
        t.learning_rate = self.lr.unwrap_or(t.learning_rate);
        t.eval_stride = self.eval_stride.unwrap_or(t.eval_stride);
        if self.lambda_grid.is_some() {
            t.lambda_grid = self.lambda_grid;
        }
        m.trials = self.trials.unwrap_or(m.trials);
        m.seed = self.seed.unwrap_or(m.seed);
        m.train_per_class = self.train_per_class.unwrap_or(m.train_per_class);
        m.test_per_class = self.test_per_class.unwrap_or(m.test_per_class);
        m.out = self.out.or(m.out);
        m.history_dir = self.history_dir.or(m.history_dir);
        m.models_dir = self.models_dir.or(m.models_dir);
        Ok(m)
    }
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Binary loss whose Lipschitz constant is used.
    #[arg(long, default_value = "sigmoid", conflicts_with = "lipschitz")]
    loss: BinaryLossKind,
    #[arg(long)]
    lipschitz: Option<f64>,
    /// Fixed Rademacher complexity; otherwise C_w C_phi / sqrt(n).
    #[arg(long, conflicts_with_all = ["cw", "cphi"])]
    rademacher: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    cw: f64,
    #[arg(long, default_value_t = 1.0)]
    cphi: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', default_value = "100,1000,10000,100000")]
    n: Vec<u64>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 1000)]
    per_class: usize,
    #[arg(long, default_value_t = 4.0)]
    separation: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn run_experiment(args: RunArgs, command: Command) -> anyhow::Result<()> {
    let manifest = args.into_manifest(command)?;
    let table = match command {
        Command::Bench => run_bench(&manifest)?,
        Command::Combine => run_combine(&manifest)?,
    };
    print!("{}", table.to_markdown());
    if let Some(out) = &manifest.out {
        println!("results written to {}", out.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Sub::Check { seed } => {
            let report = CheckSuite { seed, ..CheckSuite::default() }.run();
            for r in &report.results {
                println!("{r}");
            }
            println!("{}", report.summary());
            if !report.all_passed() {
                eprintln!("failed: {}", report.failed().join(", "));
                return ExitCode::FAILURE;
            }
            Ok(())
        }
        Sub::Bench(args) => run_experiment(args, Command::Bench),
        Sub::Combine(args) => run_experiment(args, Command::Combine),
        Sub::Bounds(args) => (|| {
            let lipschitz = match args.lipschitz {
                Some(l) => l,
                None => lipschitz_constant(args.loss)?,
            };
            let complexity = match args.rademacher {
                Some(r) => Complexity::Fixed(r),
                None => Complexity::Linear { c_w: args.cw, c_phi: args.cphi },
            };
            let rows = bound_table(args.k, lipschitz, complexity, args.delta, &args.n)?;
            print!("{}", format_table(&rows));
            Ok(())
        })(),
        Sub::Synth(args) => (|| {
            let data = synth_gaussian(args.k, args.dim, args.per_class, args.separation, args.seed)?;
            write_csv(&args.out, &data).with_context(|| format!("writing {}", args.out.display()))?;
            println!("wrote {} rows to {}", args.k * args.per_class, args.out.display());
            Ok(())
        })(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
