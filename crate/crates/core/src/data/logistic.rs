//! Synthetic binary classification data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{DataError, Dataset};
use crate::loss::Example;

/// `count` examples with `n` standard-normal features scaled by `1/√n`, a
/// bias slot, and ±1 labels drawn from a logistic model around a random
/// unit-norm separator of strength `margin`.
pub fn gen_logistic(n: usize, count: usize, margin: f64, seed: u64) -> Result<Dataset, DataError> {
    if n == 0 || count == 0 {
        return Err(DataError::InvalidSpec("need n >= 1 and count >= 1".into()));
    }
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(DataError::InvalidSpec(format!(
            "margin must be >= 0, got {margin}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = |rng: &mut ChaCha8Rng| rng.sample::<f64, _>(StandardNormal);
    let mut dir: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
    dir.iter_mut().for_each(|v| *v *= margin / norm);

    let scale = 1.0 / (n as f64).sqrt();
    let examples = (0..count)
        .map(|_| {
            let mut x: Vec<f64> = (0..n).map(|_| normal(&mut rng) * scale).collect();
            let logit: f64 =
                x.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>() * (n as f64).sqrt();
            let p = 1.0 / (1.0 + (-logit).exp());
            let label = if rng.random::<f64>() < p { 1 } else { -1 };
            x.push(1.0);
            Example::dense(x, label)
        })
        .collect();
    Dataset::new("synthetic-logistic", examples, n + 1, 2, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_labels() {
        let d = gen_logistic(4, 300, 2.0, 1).unwrap();
        assert_eq!((d.len(), d.n_features, d.n_classes), (300, 5, 2));
        let pos = d
            .examples
            .iter()
            .filter(|e| e.as_labeled().unwrap().label == 1)
            .count();
        assert!(pos > 60 && pos < 240);
        assert_eq!(d, gen_logistic(4, 300, 2.0, 1).unwrap());
        assert!(gen_logistic(0, 3, 1.0, 0).is_err());
    }
}
