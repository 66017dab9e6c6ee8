//! Per-example convex losses `f(w, ξ)` and their minibatch averages.
//!
//! Three families are supported:
//!
//! * quadratics `f(w, ξ) = ½ wᵀ A_ξ w − b_ξᵀ w` with `A_ξ` symmetric PSD,
//! * binary logistic regression, either with a single weight vector
//!   (`log(1 + exp(−y xᵀw))`) or with one weight vector per class (a
//!   two-class softmax),
//! * multiclass logistic (softmax cross-entropy).
//!
//! Logistic parameters are laid out feature-major: the weight of feature
//! `f` for class `c` lives at `f * classes + c`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::param::ParamVector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("dimension mismatch: model expects {expected} parameters, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("feature index {index} out of range for {n_features} features")]
    FeatureOutOfRange { index: usize, n_features: usize },
    #[error("label {label} is not valid for {kind}")]
    InvalidLabel { label: i32, kind: &'static str },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid sparse vector: {0}")]
    InvalidSparse(String),
    #[error("invalid quadratic example: {0}")]
    InvalidQuadratic(String),
    #[error("{name} must be positive and finite, got {value}")]
    InvalidConstant { name: &'static str, value: f64 },
    #[error("example kind does not match a {0} model")]
    KindMismatch(&'static str),
    #[error("quadratic models need a supplied Lipschitz constant or a bounding region")]
    MissingRho,
}

/// Sparse feature vector with strictly increasing indices.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseVector {
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseVector {
    pub fn new(indices: Vec<u32>, values: Vec<f64>) -> Result<Self, LossError> {
        if indices.len() != values.len() {
            return Err(LossError::InvalidSparse(format!(
                "{} indices but {} values",
                indices.len(),
                values.len()
            )));
        }
        if let Some(pos) = indices.windows(2).position(|w| w[0] >= w[1]) {
            return Err(LossError::InvalidSparse(format!(
                "indices not strictly increasing at position {}: {} then {}",
                pos + 1,
                indices[pos],
                indices[pos + 1]
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(LossError::InvalidSparse(format!("non-finite value {v}")));
        }
        Ok(SparseVector { indices, values })
    }

    pub fn empty() -> Self {
        SparseVector {
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .zip(self.values.iter())
            .map(|(&i, &v)| (i as usize, v))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Features {
    Sparse(SparseVector),
    Dense(Vec<f64>),
}

impl Features {
    #[inline]
    pub fn for_each_entry(&self, mut f: impl FnMut(usize, f64)) {
        match self {
            Features::Sparse(s) => {
                for (i, v) in s.iter() {
                    f(i, v)
                }
            }
            Features::Dense(d) => {
                for (i, &v) in d.iter().enumerate() {
                    f(i, v)
                }
            }
        }
    }

    pub fn norm_sq(&self) -> f64 {
        let mut acc = 0.0;
        self.for_each_entry(|_, v| acc += v * v);
        acc
    }

    /// One past the largest stored index.
    pub fn extent(&self) -> usize {
        match self {
            Features::Sparse(s) => s.indices.last().map_or(0, |&i| i as usize + 1),
            Features::Dense(d) => d.len(),
        }
    }

    /// Dense copy of length `n`.
    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        self.for_each_entry(|i, v| out[i] = v);
        out
    }
}

/// Feature vector with a class label. Binary labels are `±1`, multiclass
/// labels are `0..classes`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledExample {
    pub features: Features,
    pub label: i32,
}

/// Quadratic example `f(w) = ½ wᵀ A w − bᵀ w`. `A` is shared between examples
/// drawn from the same generator.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticExample {
    pub a: Arc<DMatrix<f64>>,
    pub b: DVector<f64>,
}

impl QuadraticExample {
    /// Checks that `a` is square, symmetric and positive semidefinite.
    pub fn new(a: Arc<DMatrix<f64>>, b: DVector<f64>) -> Result<Self, LossError> {
        let n = a.nrows();
        if a.ncols() != n || b.len() != n {
            return Err(LossError::InvalidQuadratic(format!(
                "A is {}x{}, b has length {}",
                a.nrows(),
                a.ncols(),
                b.len()
            )));
        }
        let scale = a.amax().max(1.0);
        if (a.as_ref() - a.transpose()).amax() > 1e-12 * scale {
            return Err(LossError::InvalidQuadratic("A is not symmetric".into()));
        }
        let eig = a.as_ref().clone().symmetric_eigenvalues();
        if eig.min() < -1e-10 * scale {
            return Err(LossError::InvalidQuadratic(format!(
                "A has negative eigenvalue {}",
                eig.min()
            )));
        }
        Ok(QuadraticExample { a, b })
    }

    pub fn spectral_norm(&self) -> f64 {
        self.a.as_ref().clone().symmetric_eigenvalues().amax()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Example {
    Labeled(LabeledExample),
    Quadratic(QuadraticExample),
}

impl Example {
    pub fn labeled(features: Features, label: i32) -> Self {
        Example::Labeled(LabeledExample { features, label })
    }

    pub fn sparse(indices: Vec<u32>, values: Vec<f64>, label: i32) -> Result<Self, LossError> {
        Ok(Example::labeled(
            Features::Sparse(SparseVector::new(indices, values)?),
            label,
        ))
    }

    pub fn dense(values: Vec<f64>, label: i32) -> Self {
        Example::labeled(Features::Dense(values), label)
    }

    pub fn quadratic(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self, LossError> {
        Ok(Example::Quadratic(QuadraticExample::new(Arc::new(a), b)?))
    }

    pub fn as_labeled(&self) -> Option<&LabeledExample> {
        match self {
            Example::Labeled(l) => Some(l),
            _ => None,
        }
    }

    pub fn as_quadratic(&self) -> Option<&QuadraticExample> {
        match self {
            Example::Quadratic(q) => Some(q),
            _ => None,
        }
    }
}

/// A minibatch `ξ = (ξ⁽¹⁾, …, ξ⁽ᴮ⁾)`, borrowed from a dataset.
#[derive(Clone, Debug)]
pub struct Batch<'a> {
    examples: Vec<&'a Example>,
}

impl<'a> Batch<'a> {
    pub fn new(examples: Vec<&'a Example>) -> Self {
        Batch { examples }
    }

    pub fn from_slice(examples: &'a [Example]) -> Self {
        Batch {
            examples: examples.iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn examples(&self) -> &[&'a Example] {
        &self.examples
    }

    /// Copy of the batch with example `index` swapped for `replacement`.
    pub fn with_replaced(&self, index: usize, replacement: &'a Example) -> Batch<'a> {
        let mut examples = self.examples.clone();
        examples[index] = replacement;
        Batch { examples }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryParameterization {
    /// One weight vector; loss `log(1 + exp(−y xᵀw))`.
    SingleVector,
    /// One weight vector per class (two-class softmax), giving
    /// `2 × features` parameters.
    PerClass,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    Quadratic,
    BinaryLogistic(BinaryParameterization),
    MulticlassLogistic { classes: usize },
}

impl LossKind {
    /// Number of weight vectors the parameter is split into.
    pub fn weight_vectors(&self) -> usize {
        match self {
            LossKind::Quadratic => 1,
            LossKind::BinaryLogistic(BinaryParameterization::SingleVector) => 1,
            LossKind::BinaryLogistic(BinaryParameterization::PerClass) => 2,
            LossKind::MulticlassLogistic { classes } => *classes,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Quadratic => "quadratic",
            LossKind::BinaryLogistic(_) => "binary-logistic",
            LossKind::MulticlassLogistic { .. } => "multiclass-logistic",
        }
    }
}

/// How the Lipschitz constant of a quadratic family is obtained.
#[derive(Clone, Debug, PartialEq)]
pub enum QuadraticRho {
    Supplied(f64),
    /// Bound `‖∇f(w, ξ)‖` over the ball `‖w − center‖ ≤ radius`.
    Ball {
        center: DVector<f64>,
        radius: f64,
    },
}

/// A loss family with its dimension, smoothness `beta` and Lipschitz
/// constant `rho`.
#[derive(Clone, Debug, PartialEq)]
pub struct LossModel {
    kind: LossKind,
    dimension: usize,
    beta: f64,
    rho: f64,
}

impl LossModel {
    pub fn new(kind: LossKind, dimension: usize, beta: f64, rho: f64) -> Result<Self, LossError> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(LossError::InvalidConstant {
                name: "beta",
                value: beta,
            });
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(LossError::InvalidConstant {
                name: "rho",
                value: rho,
            });
        }
        if let LossKind::MulticlassLogistic { classes } = kind {
            if classes < 2 {
                return Err(LossError::InvalidLabel {
                    label: classes as i32,
                    kind: "multiclass-logistic class count",
                });
            }
        }
        Ok(LossModel {
            kind,
            dimension,
            beta,
            rho,
        })
    }

    /// Model whose constants are computed from `examples` by [`constants_for`].
    /// For logistic kinds `n_features` counts raw features (bias included).
    pub fn for_examples(
        kind: LossKind,
        n_features: usize,
        examples: &[Example],
        quadratic_rho: Option<QuadraticRho>,
    ) -> Result<Self, LossError> {
        let (beta, rho) = constants_for(&kind, examples, quadratic_rho)?;
        LossModel::new(kind, n_features * kind.weight_vectors(), beta, rho)
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn n_features(&self) -> usize {
        self.dimension / self.kind.weight_vectors()
    }

    /// Same family and dimension with different constants.
    pub fn with_constants(&self, beta: f64, rho: f64) -> Result<Self, LossError> {
        LossModel::new(self.kind, self.dimension, beta, rho)
    }

    fn check_dim(&self, w: &ParamVector) -> Result<(), LossError> {
        if w.len() != self.dimension {
            return Err(LossError::DimensionMismatch {
                expected: self.dimension,
                actual: w.len(),
            });
        }
        Ok(())
    }

    /// `f(w, ξ)`.
    pub fn eval_example(&self, w: &ParamVector, ex: &Example) -> Result<f64, LossError> {
        self.check_dim(w)?;
        let mut scratch = vec![0.0; self.kind.weight_vectors()];
        self.loss_unchecked(w, ex, &mut scratch)
    }

    /// `∇f(w, ξ)`.
    pub fn grad_example(&self, w: &ParamVector, ex: &Example) -> Result<ParamVector, LossError> {
        self.check_dim(w)?;
        let mut out = vec![0.0; self.dimension];
        let mut scratch = vec![0.0; self.kind.weight_vectors()];
        self.accumulate_grad(w, ex, 1.0, &mut out, &mut scratch)?;
        Ok(ParamVector::from_vec(out))
    }

    /// `f̄_ξ(w)`, the mean loss over the batch.
    pub fn batch_loss(&self, w: &ParamVector, batch: &Batch<'_>) -> Result<f64, LossError> {
        if batch.is_empty() {
            return Err(LossError::EmptyBatch);
        }
        self.mean_loss_iter(w, batch.examples().iter().copied())
    }

    /// `∇f̄_ξ(w)`, the mean gradient over the batch.
    pub fn batch_grad(&self, w: &ParamVector, batch: &Batch<'_>) -> Result<ParamVector, LossError> {
        if batch.is_empty() {
            return Err(LossError::EmptyBatch);
        }
        self.check_dim(w)?;
        let mut out = vec![0.0; self.dimension];
        let mut scratch = vec![0.0; self.kind.weight_vectors()];
        for ex in batch.examples() {
            self.accumulate_grad(w, ex, 1.0, &mut out, &mut scratch)?;
        }
        let b = batch.len() as f64;
        for v in out.iter_mut() {
            *v /= b;
        }
        Ok(ParamVector::from_vec(out))
    }

    /// Mean loss over a whole dataset (the training loss).
    pub fn mean_loss(&self, w: &ParamVector, examples: &[Example]) -> Result<f64, LossError> {
        if examples.is_empty() {
            return Err(LossError::EmptyDataset);
        }
        self.mean_loss_iter(w, examples.iter())
    }

    fn mean_loss_iter<'e>(
        &self,
        w: &ParamVector,
        examples: impl ExactSizeIterator<Item = &'e Example>,
    ) -> Result<f64, LossError> {
        self.check_dim(w)?;
        let n = examples.len();
        let mut scratch = vec![0.0; self.kind.weight_vectors()];
        let mut acc = NeumaierSum::default();
        for ex in examples {
            acc.add(self.loss_unchecked(w, ex, &mut scratch)?);
        }
        Ok(acc.value() / n as f64)
    }

    fn logits(&self, w: &[f64], features: &Features, out: &mut [f64]) -> Result<(), LossError> {
        let n_features = self.n_features();
        let extent = features.extent();
        if extent > n_features {
            return Err(LossError::FeatureOutOfRange {
                index: extent - 1,
                n_features,
            });
        }
        let c = out.len();
        out.iter_mut().for_each(|v| *v = 0.0);
        if c == 1 {
            let mut z = 0.0;
            features.for_each_entry(|i, v| z += v * w[i]);
            out[0] = z;
        } else {
            features.for_each_entry(|i, v| {
                let row = &w[i * c..(i + 1) * c];
                for (o, wi) in out.iter_mut().zip(row) {
                    *o += v * wi;
                }
            });
        }
        Ok(())
    }

    fn class_index(&self, label: i32) -> Result<usize, LossError> {
        match self.kind {
            LossKind::BinaryLogistic(p) => match (label, p) {
                (1 | -1, BinaryParameterization::SingleVector) => Ok(0),
                (-1, BinaryParameterization::PerClass) => Ok(0),
                (1, BinaryParameterization::PerClass) => Ok(1),
                _ => Err(LossError::InvalidLabel {
                    label,
                    kind: "binary-logistic (expects ±1)",
                }),
            },
            LossKind::MulticlassLogistic { classes } => {
                if label >= 0 && (label as usize) < classes {
                    Ok(label as usize)
                } else {
                    Err(LossError::InvalidLabel {
                        label,
                        kind: "multiclass-logistic",
                    })
                }
            }
            LossKind::Quadratic => Err(LossError::KindMismatch("quadratic")),
        }
    }

    fn loss_unchecked(
        &self,
        w: &ParamVector,
        ex: &Example,
        scratch: &mut [f64],
    ) -> Result<f64, LossError> {
        match (self.kind, ex) {
            (LossKind::Quadratic, Example::Quadratic(q)) => {
                self.check_quadratic(q)?;
                let aw = q.a.as_ref() * w.as_dvector();
                Ok(0.5 * w.dot(&aw) - q.b.dot(w.as_dvector()))
            }
            (LossKind::Quadratic, _) => Err(LossError::KindMismatch("quadratic")),
            (_, Example::Quadratic(_)) => Err(LossError::KindMismatch(self.kind.name())),
            (kind, Example::Labeled(ex)) => {
                let class = self.class_index(ex.label)?;
                self.logits(w.as_slice(), &ex.features, scratch)?;
                if let LossKind::BinaryLogistic(BinaryParameterization::SingleVector) = kind {
                    Ok(softplus(-(ex.label as f64) * scratch[0]))
                } else {
                    Ok(log_sum_exp(scratch) - scratch[class])
                }
            }
        }
    }

    fn check_quadratic(&self, q: &QuadraticExample) -> Result<(), LossError> {
        if q.b.len() != self.dimension {
            return Err(LossError::DimensionMismatch {
                expected: self.dimension,
                actual: q.b.len(),
            });
        }
        Ok(())
    }

    /// `out += scale * ∇f(w, ξ)`.
    fn accumulate_grad(
        &self,
        w: &ParamVector,
        ex: &Example,
        scale: f64,
        out: &mut [f64],
        scratch: &mut [f64],
    ) -> Result<(), LossError> {
        match (self.kind, ex) {
            (LossKind::Quadratic, Example::Quadratic(q)) => {
                self.check_quadratic(q)?;
                let g = q.a.as_ref() * w.as_dvector() - &q.b;
                for (o, gi) in out.iter_mut().zip(g.iter()) {
                    *o += scale * gi;
                }
                Ok(())
            }
            (LossKind::Quadratic, _) => Err(LossError::KindMismatch("quadratic")),
            (_, Example::Quadratic(_)) => Err(LossError::KindMismatch(self.kind.name())),
            (kind, Example::Labeled(ex)) => {
                let class = self.class_index(ex.label)?;
                self.logits(w.as_slice(), &ex.features, scratch)?;
                if let LossKind::BinaryLogistic(BinaryParameterization::SingleVector) = kind {
                    let y = ex.label as f64;
                    let coef = -y * sigmoid(-y * scratch[0]) * scale;
                    ex.features.for_each_entry(|i, v| out[i] += coef * v);
                } else {
                    let lse = log_sum_exp(scratch);
                    for (c, z) in scratch.iter_mut().enumerate() {
                        let p = (*z - lse).exp();
                        *z = scale * (p - if c == class { 1.0 } else { 0.0 });
                    }
                    let c = scratch.len();
                    ex.features.for_each_entry(|i, v| {
                        let row = &mut out[i * c..(i + 1) * c];
                        for (o, coef) in row.iter_mut().zip(scratch.iter()) {
                            *o += coef * v;
                        }
                    });
                }
                Ok(())
            }
        }
    }
}

/// Smoothness and Lipschitz constants `(beta, rho)` for a loss family over
/// `examples`.
///
/// Logistic bounds use `M = max ‖x‖`:
/// single-vector binary `(M²/4, M)`, per-class binary `(M²/2, √2·M)`,
/// multiclass `(M², √2·M)`. Quadratics use the largest spectral norm of
/// `A_ξ` and either a supplied `rho` or the gradient bound over a ball.
pub fn constants_for(
    kind: &LossKind,
    examples: &[Example],
    quadratic_rho: Option<QuadraticRho>,
) -> Result<(f64, f64), LossError> {
    if examples.is_empty() {
        return Err(LossError::EmptyDataset);
    }
    match kind {
        LossKind::Quadratic => {
            let mut beta: f64 = 0.0;
            let mut quads = Vec::with_capacity(examples.len());
            for ex in examples {
                let q = ex
                    .as_quadratic()
                    .ok_or(LossError::KindMismatch("quadratic"))?;
                quads.push((q, q.spectral_norm()));
                beta = beta.max(quads.last().unwrap().1);
            }
            let rho = match quadratic_rho.ok_or(LossError::MissingRho)? {
                QuadraticRho::Supplied(r) => r,
                QuadraticRho::Ball { center, radius } => quads
                    .iter()
                    .map(|(q, norm)| norm * radius + (q.a.as_ref() * &center - &q.b).norm())
                    .fold(0.0, f64::max),
            };
            Ok((beta.max(f64::MIN_POSITIVE), rho.max(f64::MIN_POSITIVE)))
        }
        _ => {
            let mut max_sq: f64 = 0.0;
            for ex in examples {
                let l = ex
                    .as_labeled()
                    .ok_or(LossError::KindMismatch(kind.name()))?;
                max_sq = max_sq.max(l.features.norm_sq());
            }
            let max_sq = max_sq.max(1e-12);
            let m = max_sq.sqrt();
            Ok(match kind {
                LossKind::BinaryLogistic(BinaryParameterization::SingleVector) => {
                    (0.25 * max_sq, m)
                }
                LossKind::BinaryLogistic(BinaryParameterization::PerClass) => {
                    (0.5 * max_sq, std::f64::consts::SQRT_2 * m)
                }
                _ => (max_sq, std::f64::consts::SQRT_2 * m),
            })
        }
    }
}

/// Compensated (Neumaier) summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

#[inline]
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}
