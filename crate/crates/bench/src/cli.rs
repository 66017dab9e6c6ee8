//! Command-line driver.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use echo_core::data::{gen_quadratic, save_records, write_libsvm, QuadraticSpec};
use echo_core::loss::BinaryParameterization;
use echo_core::optim::{Algorithm, StepBudget};
use echo_core::theory::suite::run_all;

use crate::config::merge_config_args;
use crate::datasets::{
    prepare, synthetic_logistic, DatasetChoice, PrepareOptions, Prepared, ThresholdSource,
};
use crate::experiment::{run_fixed, tune, CandidateStatus, ExperimentSpec, DEFAULT_STEP_CAP};
use crate::grid::GridSpec;
use crate::plot::emit_plots;
use crate::stopping::StoppingRule;
use crate::sweep::{summarize, sweep, CellSummary, SweepSpec};

const SUBCOMMANDS: [&str; 5] = ["run", "grid", "sweep", "verify", "datagen"];

#[derive(Debug, Parser)]
#[command(
    name = "echo-bench",
    version,
    about = "Data-echoing convergence experiments",
    args_override_self = true
)]
pub struct Cli {
    /// Base random seed; run seeds are `seed, seed+1, ...`.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// `key = value` file whose keys mirror flags; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Measure convergence time at one (B, K), with a fixed or tuned step size.
    Run(RunArgs),
    /// Tune the step size at one (B, K) and report every grid candidate.
    Grid(RunArgs),
    /// Tune every (B, K) cell and emit records, cell summaries and plots.
    Sweep(SweepArgs),
    /// Run the theory oracle suite.
    Verify(VerifyArgs),
    /// Write a synthetic problem.
    Datagen(DatagenArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Binary {
    PerClass,
    Single,
}

impl From<Binary> for BinaryParameterization {
    fn from(b: Binary) -> Self {
        match b {
            Binary::PerClass => BinaryParameterization::PerClass,
            Binary::Single => BinaryParameterization::SingleVector,
        }
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// `covtype`, `mnist`, `synthetic` or a LIBSVM file path.
    #[arg(long, default_value = "synthetic")]
    pub dataset: DatasetChoice,
    /// Uniform subsample size; 0 trains on everything. Defaults to 50000
    /// for CoverType and 10000 for MNIST.
    #[arg(long)]
    pub subsample: Option<usize>,
    /// Convergence threshold; defaults to the published level on full data
    /// and 1.01 times the optimum otherwise.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, value_enum, default_value_t = Binary::PerClass)]
    pub binary: Binary,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, default_value = "gd")]
    pub algorithm: Algorithm,
    /// Prox strength for `prox`.
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
    /// Number of seeds per cell.
    #[arg(long, default_value_t = 20)]
    pub seeds: u64,
    #[arg(long, default_value_t = DEFAULT_STEP_CAP)]
    pub step_cap: u64,
    /// Inner steps between full training-loss evaluations.
    #[arg(long, default_value_t = 10)]
    pub eval_every: usize,
    /// Evaluations averaged by the stopping rule.
    #[arg(long, default_value_t = 10)]
    pub window: usize,
    #[arg(long, default_value_t = 0.01)]
    pub grid_lo: f64,
    #[arg(long, default_value_t = 10.0)]
    pub grid_hi: f64,
    #[arg(long, default_value_t = 20)]
    pub per_decade: u32,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long = "B", default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long = "K", conflicts_with = "k_schedule")]
    pub k: Option<usize>,
    /// Cycled per-batch echoing factors, e.g. `2,3,5`.
    #[arg(long = "K-schedule")]
    pub k_schedule: Option<StepBudget>,
    /// Fixed step size; tuned over the grid when absent.
    #[arg(long)]
    pub eta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long = "B", value_delimiter = ',', default_values_t = [16usize, 256, 4096])]
    pub batch_sizes: Vec<usize>,
    #[arg(long = "K", value_delimiter = ',', default_values_t = [1usize, 2, 4, 8, 16])]
    pub ks: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Random instances per oracle.
    #[arg(long, default_value_t = 500)]
    pub instances: usize,
    /// Seeds per Monte-Carlo excess-risk estimate.
    #[arg(long, default_value_t = 50)]
    pub mc_seeds: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProblemKind {
    Quadratic,
    Logistic,
}

#[derive(Debug, Args)]
pub struct DatagenArgs {
    #[arg(long, value_enum, default_value_t = ProblemKind::Quadratic)]
    pub kind: ProblemKind,
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    #[arg(long, default_value_t = 10_000)]
    pub count: usize,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 1.0)]
    pub distance: f64,
}

impl TrainArgs {
    fn grid(&self) -> GridSpec {
        GridSpec {
            lo: self.grid_lo,
            hi: self.grid_hi,
            per_decade: self.per_decade,
        }
    }

    fn spec(
        &self,
        dataset: &str,
        threshold: f64,
        batch_size: usize,
        budget: StepBudget,
        seed: u64,
    ) -> ExperimentSpec {
        ExperimentSpec {
            dataset: dataset.to_string(),
            algorithm: self.algorithm,
            batch_size,
            budget,
            gamma: self.gamma,
            stopping: StoppingRule {
                threshold,
                window: self.window,
                eval_every: self.eval_every,
            },
            step_cap: self.step_cap,
            seeds: (0..self.seeds).map(|i| seed.wrapping_add(i)).collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.seeds == 0 || self.step_cap == 0 || self.eval_every == 0 || self.window == 0 {
            bail!("--seeds, --step-cap, --eval-every and --window must be positive");
        }
        if !(self.grid_lo > 0.0 && self.grid_hi >= self.grid_lo && self.per_decade > 0) {
            bail!("grid needs 0 < grid-lo <= grid-hi and per-decade > 0");
        }
        if self.algorithm == Algorithm::Prox && (self.gamma.is_nan() || self.gamma < 0.0) {
            bail!("--gamma must be >= 0");
        }
        Ok(())
    }
}

fn load(data: &DataArgs, seed: u64) -> Result<Prepared> {
    let opts = PrepareOptions {
        subsample: data.subsample,
        threshold: data.threshold,
        binary: data.binary.into(),
        seed,
        ..PrepareOptions::default()
    };
    let p = prepare(&data.dataset, &opts)?;
    let source = match p.threshold_source {
        ThresholdSource::Fixed => "published level".to_string(),
        ThresholdSource::Optimum { optimum } => format!("1.01 x optimum {optimum:.6}"),
        ThresholdSource::User => "user".to_string(),
    };
    eprintln!(
        "{}: {} examples, {} parameters, threshold {:.6} ({source})",
        p.dataset.name,
        p.dataset.len(),
        p.model.dimension(),
        p.threshold
    );
    Ok(p)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_cells(cells: &[CellSummary], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    for c in cells {
        w.serialize(c)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

fn print_cell(c: &CellSummary) {
    eprintln!(
        "B={} K={} eta={:.4} steps {:.1} ± {:.1} samples {:.1} ± {:.1} converged {}/{}",
        c.batch_size,
        c.k,
        c.eta,
        c.mean_steps,
        c.std_steps,
        c.mean_samples,
        c.std_samples,
        c.converged,
        c.runs
    );
}

fn cmd_run(args: &RunArgs, cli: &Cli, report_grid: bool) -> Result<()> {
    args.train.validate()?;
    let budget = match (&args.k_schedule, args.k) {
        (Some(s), _) => s.clone(),
        (None, k) => StepBudget::Fixed(k.unwrap_or(1)),
    };
    budget.validate().map_err(anyhow::Error::msg)?;
    let p = load(&args.data, cli.seed)?;
    let spec = args.train.spec(
        &p.dataset.name,
        p.threshold,
        args.batch_size,
        budget,
        cli.seed,
    );
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let records = match (args.eta, report_grid) {
        (Some(eta), false) => run_fixed(&p.model, &p.dataset.examples, &spec, eta)?,
        _ => {
            let tuned = tune(&p.model, &p.dataset.examples, &spec, &args.train.grid())?;
            if tuned.all_unconverged {
                eprintln!(
                    "warning: no candidate converged within {} steps",
                    spec.step_cap
                );
            }
            if report_grid {
                let mut w = csv_writer(&cli.out.join("grid.csv"))?;
                w.write_record(["eta", "status", "total_steps"])?;
                for (eta, status) in &tuned.candidates {
                    let (name, total) = match status {
                        CandidateStatus::Completed { total_steps, .. } => {
                            ("completed", total_steps.to_string())
                        }
                        CandidateStatus::Pruned => ("pruned", String::new()),
                    };
                    w.write_record([eta.to_string(), name.to_string(), total])?;
                }
                w.flush()?;
            }
            tuned.records(&spec)
        }
    };
    save_records(&records, cli.out.join("records.csv"))?;
    for c in summarize(&records) {
        print_cell(&c);
    }
    Ok(())
}

fn cmd_sweep(args: &SweepArgs, cli: &Cli) -> Result<()> {
    args.train.validate()?;
    if args.batch_sizes.is_empty()
        || args.ks.is_empty()
        || args.batch_sizes.contains(&0)
        || args.ks.contains(&0)
    {
        bail!("--B and --K need nonempty lists of positive integers");
    }
    let p = load(&args.data, cli.seed)?;
    let spec = SweepSpec {
        base: args.train.spec(
            &p.dataset.name,
            p.threshold,
            1,
            StepBudget::Fixed(1),
            cli.seed,
        ),
        batch_sizes: args.batch_sizes.clone(),
        budgets: args.ks.iter().map(|&k| StepBudget::Fixed(k)).collect(),
        grid: args.train.grid(),
    };
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let result = sweep(&p.model, &p.dataset.examples, &spec, &mut |c| print_cell(c))?;
    save_records(&result.records, cli.out.join("records.csv"))?;
    write_cells(&result.cells, &cli.out.join("cells.csv"))?;
    for path in emit_plots(&result.cells, &cli.out)? {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_verify(args: &VerifyArgs, cli: &Cli) -> Result<bool> {
    let reports = run_all(cli.seed, args.instances, args.mc_seeds)?;
    let mut ok = true;
    for r in &reports {
        println!("{r}");
        if !r.passed() {
            ok = false;
            println!("  worst {} = {:e}", r.metric, r.worst);
        }
    }
    Ok(ok)
}

fn cmd_datagen(args: &DatagenArgs, cli: &Cli) -> Result<()> {
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    match args.kind {
        ProblemKind::Logistic => {
            let d = synthetic_logistic(args.n, args.count, cli.seed);
            let path = cli.out.join("synthetic-logistic.libsvm");
            let mut w = create(&path)?;
            write_libsvm(&d, &mut w)?;
            w.flush()?;
            eprintln!("wrote {}", path.display());
        }
        ProblemKind::Quadratic => {
            let p = gen_quadratic(&QuadraticSpec {
                n: args.n,
                beta: args.beta,
                noise_scale: args.noise,
                count: args.count,
                distance: args.distance,
                seed: cli.seed,
            })?;
            let b: Vec<Vec<f64>> = p
                .dataset
                .examples
                .iter()
                .map(|e| {
                    e.as_quadratic()
                        .expect("quadratic example")
                        .b
                        .iter()
                        .copied()
                        .collect()
                })
                .collect();
            let doc = serde_json::json!({
                "n": args.n,
                "beta": p.beta,
                "rho": p.rho,
                "distance": p.d,
                "a": p.a.row_iter().map(|r| r.iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>(),
                "b_mean": p.b_mean.iter().collect::<Vec<_>>(),
                "w_star": p.w_star.iter().collect::<Vec<_>>(),
                "f_star": p.f_star,
                "w0": p.w0.iter().collect::<Vec<_>>(),
                "b": b,
            });
            let path = cli.out.join("synthetic-quadratic.json");
            let mut w = create(&path)?;
            serde_json::to_writer(&mut w, &doc)?;
            w.flush()?;
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

/// Parses `args` (including the program name), applying any `--config`
/// file, and runs the command. Usage errors exit through clap.
pub fn main_with_args(args: impl IntoIterator<Item = OsString>) -> ExitCode {
    let args = match merge_config_args(args.into_iter().collect(), &SUBCOMMANDS) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a, &cli, false).map(|_| true),
        Command::Grid(a) => cmd_run(a, &cli, true).map(|_| true),
        Command::Sweep(a) => cmd_sweep(a, &cli).map(|_| true),
        Command::Verify(a) => cmd_verify(a, &cli),
        Command::Datagen(a) => cmd_datagen(a, &cli).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
