//! Datasets, file formats, synthetic problems and run records.

mod idx;
mod libsvm;
mod logistic;
mod records;
mod synthetic;

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::loss::{Example, LossError, LossKind};

pub use idx::{
    idx_dataset, load_idx, parse_idx_images, parse_idx_labels, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC,
};
pub use libsvm::{load_libsvm, parse_libsvm, write_libsvm};
pub use logistic::gen_logistic;
pub use records::{
    load_records, read_records, save_records, write_records, ConvergenceRecord, RECORD_COLUMNS,
};
pub use synthetic::{from_parts, gen_quadratic, QuadraticSpec, SyntheticProblem};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{what}: bad magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic {
        what: &'static str,
        expected: u32,
        found: u32,
    },
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("{what}: truncated payload, expected {expected} bytes, found {actual}")]
    Truncated {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("records file is missing column `{0}`")]
    MissingColumn(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("invalid generator request: {0}")]
    InvalidSpec(String),
    #[error("dataset is empty")]
    Empty,
    #[error("example {index}: {message}")]
    InvalidExample { index: usize, message: String },
    #[error(transparent)]
    Loss(#[from] LossError),
}

impl DataError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.into(),
            source,
        }
    }
}

/// A nonempty, validated collection of examples.
///
/// For labelled data `n_features` counts the stored feature slots including
/// the trailing constant bias feature when `has_bias` is set. For quadratic
/// data it is the parameter dimension and `n_classes` is 0.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub examples: Vec<Example>,
    pub n_features: usize,
    pub n_classes: usize,
    pub has_bias: bool,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        examples: Vec<Example>,
        n_features: usize,
        n_classes: usize,
        has_bias: bool,
    ) -> Result<Self, DataError> {
        if examples.is_empty() {
            return Err(DataError::Empty);
        }
        for (index, ex) in examples.iter().enumerate() {
            let bad = |message: String| DataError::InvalidExample { index, message };
            match ex {
                Example::Labeled(l) => {
                    if l.features.extent() > n_features {
                        return Err(bad(format!(
                            "feature index {} exceeds {n_features} features",
                            l.features.extent() - 1
                        )));
                    }
                    let ok = if n_classes == 2 {
                        l.label == 1 || l.label == -1
                    } else {
                        l.label >= 0 && (l.label as usize) < n_classes
                    };
                    if !ok {
                        return Err(bad(format!(
                            "label {} invalid for {n_classes} classes",
                            l.label
                        )));
                    }
                }
                Example::Quadratic(q) => {
                    if n_classes != 0 || q.b.len() != n_features {
                        return Err(bad("quadratic example does not match dataset shape".into()));
                    }
                }
            }
        }
        Ok(Dataset {
            name: name.into(),
            examples,
            n_features,
            n_classes,
            has_bias,
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Natural logistic loss for labelled data.
    pub fn loss_kind(&self, binary: crate::loss::BinaryParameterization) -> LossKind {
        match self.n_classes {
            0 => LossKind::Quadratic,
            2 => LossKind::BinaryLogistic(binary),
            c => LossKind::MulticlassLogistic { classes: c },
        }
    }

    /// Uniform subsample of `count` distinct examples, in original order.
    /// Returns a clone when `count >= len`.
    pub fn subsample(&self, count: usize, seed: u64) -> Dataset {
        if count >= self.len() {
            return self.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = rand::seq::index::sample(&mut rng, self.len(), count).into_vec();
        picked.sort_unstable();
        Dataset {
            name: self.name.clone(),
            examples: picked
                .into_iter()
                .map(|i| self.examples[i].clone())
                .collect(),
            n_features: self.n_features,
            n_classes: self.n_classes,
            has_bias: self.has_bias,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_validation() {
        assert!(matches!(
            Dataset::new("x", vec![], 1, 2, false),
            Err(DataError::Empty)
        ));
        let ok = vec![Example::dense(vec![1.0], 1)];
        assert!(Dataset::new("x", ok.clone(), 1, 2, false).is_ok());
        assert!(Dataset::new("x", ok, 0, 2, false).is_err());
        let bad_label = vec![Example::dense(vec![1.0], 3)];
        assert!(Dataset::new("x", bad_label.clone(), 1, 2, false).is_err());
        assert!(Dataset::new("x", bad_label, 1, 4, false).is_ok());
    }

    #[test]
    fn subsample_is_deterministic_and_distinct() {
        let examples: Vec<Example> = (0..100)
            .map(|i| Example::dense(vec![i as f64], 0))
            .collect();
        let d = Dataset::new("x", examples, 1, 1, false).unwrap();
        let a = d.subsample(10, 3);
        assert_eq!(a, d.subsample(10, 3));
        assert_eq!(a.len(), 10);
        let mut vals: Vec<f64> = a
            .examples
            .iter()
            .map(|e| e.as_labeled().unwrap().features.to_dense(1)[0])
            .collect();
        vals.dedup();
        assert_eq!(vals.len(), 10);
        assert_eq!(d.subsample(1000, 3).len(), 100);
    }
}
