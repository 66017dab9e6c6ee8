//! Dataset selection, desk-scale subsampling and convergence thresholds.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use echo_core::data::{gen_logistic, load_idx, load_libsvm, Dataset};
use echo_core::loss::{Batch, BinaryParameterization, Example, LossModel};
use echo_core::ParamVector;

pub const COVTYPE_FILE: &str = "covtype.libsvm.binary.scale";
pub const COVTYPE_FEATURES: usize = 54;
pub const MNIST_TRAIN_IMAGES: &str = "mnist/train-images-idx3-ubyte";
pub const MNIST_TRAIN_LABELS: &str = "mnist/train-labels-idx1-ubyte";
pub const MNIST_TEST_IMAGES: &str = "mnist/t10k-images-idx3-ubyte";
pub const MNIST_TEST_LABELS: &str = "mnist/t10k-labels-idx1-ubyte";

pub const COVTYPE_THRESHOLD: f64 = 0.54;
pub const MNIST_THRESHOLD: f64 = 0.3;
pub const COVTYPE_DESK_SIZE: usize = 50_000;
pub const MNIST_DESK_SIZE: usize = 10_000;
/// Subsample thresholds sit this factor above the subsample optimum.
pub const OPTIMUM_SLACK: f64 = 1.01;

#[derive(Clone, Debug, PartialEq)]
pub enum DatasetChoice {
    Covtype,
    Mnist,
    SyntheticLogistic,
    /// A LIBSVM file with ±1 or 1/2 labels.
    Path(PathBuf),
}

impl fmt::Display for DatasetChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetChoice::Covtype => f.write_str("covtype"),
            DatasetChoice::Mnist => f.write_str("mnist"),
            DatasetChoice::SyntheticLogistic => f.write_str("synthetic"),
            DatasetChoice::Path(p) => write!(f, "{}", p.display()),
        }
    }
}

impl FromStr for DatasetChoice {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "covtype" => DatasetChoice::Covtype,
            "mnist" => DatasetChoice::Mnist,
            "synthetic" => DatasetChoice::SyntheticLogistic,
            other => DatasetChoice::Path(PathBuf::from(other)),
        })
    }
}

/// `ECHO_DATA_DIR` if set, else the workspace `data/` directory when it
/// exists, else `./data`.
pub fn data_dir() -> PathBuf {
    if let Some(dir) = std::env::var_os("ECHO_DATA_DIR") {
        return PathBuf::from(dir);
    }
    let workspace = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    workspace
        .canonicalize()
        .unwrap_or_else(|_| PathBuf::from("data"))
}

pub fn load_covtype(dir: &Path) -> Result<Dataset> {
    let path = dir.join(COVTYPE_FILE);
    let mut d = load_libsvm(&path, Some(COVTYPE_FEATURES))
        .context("loading CoverType (run scripts/fetch_data.sh or set ECHO_DATA_DIR)")?;
    d.name = "covtype".into();
    Ok(d)
}

pub fn load_mnist(dir: &Path) -> Result<Dataset> {
    let mut d = load_idx(dir.join(MNIST_TRAIN_IMAGES), dir.join(MNIST_TRAIN_LABELS))
        .context("loading MNIST training split (run scripts/fetch_data.sh or set ECHO_DATA_DIR)")?;
    d.name = "mnist".into();
    Ok(d)
}

pub fn load_mnist_test(dir: &Path) -> Result<Dataset> {
    let mut d = load_idx(dir.join(MNIST_TEST_IMAGES), dir.join(MNIST_TEST_LABELS))
        .context("loading MNIST test split")?;
    d.name = "mnist-test".into();
    Ok(d)
}

pub fn synthetic_logistic(n: usize, count: usize, seed: u64) -> Dataset {
    gen_logistic(n, count, 4.0, seed).expect("valid synthetic spec")
}

/// How the convergence threshold was chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum ThresholdSource {
    /// Fixed published level for the full dataset.
    Fixed,
    /// `OPTIMUM_SLACK` times the computed optimum.
    Optimum { optimum: f64 },
    /// Given on the command line.
    User,
}

#[derive(Clone, Debug)]
pub struct Prepared {
    pub dataset: Dataset,
    pub model: LossModel,
    pub threshold: f64,
    pub threshold_source: ThresholdSource,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrepareOptions {
    /// `Some(0)` disables subsampling; `None` uses the per-dataset default.
    pub subsample: Option<usize>,
    pub threshold: Option<f64>,
    pub binary: BinaryParameterization,
    pub seed: u64,
    pub optimum_iterations: usize,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        PrepareOptions {
            subsample: None,
            threshold: None,
            binary: BinaryParameterization::PerClass,
            seed: 0,
            optimum_iterations: 3000,
        }
    }
}

/// Loads `choice`, applies the subsample and picks a threshold: the fixed
/// level on full CoverType/MNIST, otherwise `OPTIMUM_SLACK` times the
/// full-batch optimum of the data actually trained on.
pub fn prepare(choice: &DatasetChoice, opts: &PrepareOptions) -> Result<Prepared> {
    let dir = data_dir();
    let (full, fixed, default_size) = match choice {
        DatasetChoice::Covtype => (
            load_covtype(&dir)?,
            Some(COVTYPE_THRESHOLD),
            COVTYPE_DESK_SIZE,
        ),
        DatasetChoice::Mnist => (load_mnist(&dir)?, Some(MNIST_THRESHOLD), MNIST_DESK_SIZE),
        DatasetChoice::SyntheticLogistic => (synthetic_logistic(10, 5000, opts.seed), None, 0),
        DatasetChoice::Path(p) => {
            let d = load_libsvm(p, None).with_context(|| format!("loading {}", p.display()))?;
            (d, None, 0)
        }
    };
    let size = opts.subsample.unwrap_or(default_size);
    let dataset = if size > 0 && size < full.len() {
        full.subsample(size, opts.seed)
    } else {
        full.clone()
    };
    let subsampled = dataset.len() < full.len();
    let kind = dataset.loss_kind(opts.binary);
    let model = LossModel::for_examples(kind, dataset.n_features, &dataset.examples, None)?;
    let (threshold, threshold_source) = match (opts.threshold, fixed) {
        (Some(t), _) => (t, ThresholdSource::User),
        (None, Some(t)) if !subsampled => (t, ThresholdSource::Fixed),
        _ => {
            let optimum = full_batch_optimum(&model, &dataset.examples, opts.optimum_iterations)?;
            (
                OPTIMUM_SLACK * optimum,
                ThresholdSource::Optimum { optimum },
            )
        }
    };
    if !(threshold.is_finite() && threshold > 0.0) {
        bail!("threshold must be positive, got {threshold}");
    }
    Ok(Prepared {
        dataset,
        model,
        threshold,
        threshold_source,
    })
}

/// Minimum training loss found by full-batch accelerated gradient descent
/// with backtracking on the curvature estimate and restart on ascent.
pub fn full_batch_optimum(model: &LossModel, data: &[Example], iterations: usize) -> Result<f64> {
    let batch = Batch::from_slice(data);
    let f = |w: &ParamVector| model.batch_loss(w, &batch);
    let n = model.dimension();
    let mut x = ParamVector::zeros(n);
    let mut fx = f(&x)?;
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut lip = model.beta() * 1e-3;
    let mut best = fx;
    for _ in 0..iterations {
        let fy = f(&y)?;
        let gy = model.batch_grad(&y, &batch)?;
        let g_sq = gy.norm_squared();
        if g_sq < 1e-24 {
            break;
        }
        let (next, f_next) = loop {
            let mut cand = y.clone();
            cand.add_scaled(-1.0 / lip, &gy);
            let fc = f(&cand)?;
            if fc <= fy - 0.5 * g_sq / lip + 1e-15 * fy.abs() || lip >= model.beta() {
                break (cand, fc);
            }
            lip = (2.0 * lip).min(model.beta());
        };
        if f_next > fx {
            // restart momentum from the last accepted point
            y = x.clone();
            t = 1.0;
            continue;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let mut y_next = next.clone();
        let mut diff = next.clone();
        diff.add_scaled(-1.0, &x);
        y_next.add_scaled((t - 1.0) / t_next, &diff);
        x = next;
        fx = f_next;
        y = y_next;
        t = t_next;
        lip *= 0.95;
        best = best.min(fx);
    }
    Ok(best)
}
