//! Gradient, convexity, smoothness, Lipschitz and batch-mean properties of
//! every loss family on random inputs.

use echo_core::loss::{Batch, BinaryParameterization, Example, LossKind, LossModel, QuadraticRho};
use echo_core::theory::suite::{random_logistic_examples, random_quadratic_examples};
use echo_core::ParamVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn kind_for(tag: u8) -> LossKind {
    match tag % 4 {
        0 => LossKind::Quadratic,
        1 => LossKind::BinaryLogistic(BinaryParameterization::SingleVector),
        2 => LossKind::BinaryLogistic(BinaryParameterization::PerClass),
        _ => LossKind::MulticlassLogistic { classes: 3 },
    }
}

const RADIUS: f64 = 3.0;

/// A model with examples and a point inside the ball of radius `RADIUS`.
fn instance(seed: u64, tag: u8) -> (LossModel, Vec<Example>, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kind = kind_for(tag);
    let n = rng.random_range(1..=6);
    let examples = match kind {
        LossKind::Quadratic => random_quadratic_examples(&mut rng, n, 5),
        _ => random_logistic_examples(&mut rng, kind, n, 5),
    };
    let rho = (kind == LossKind::Quadratic).then(|| QuadraticRho::Ball {
        center: nalgebra::DVector::zeros(n),
        radius: RADIUS,
    });
    let model = LossModel::for_examples(kind, n, &examples, rho).unwrap();
    (model, examples, rng)
}

fn point(rng: &mut ChaCha8Rng, n: usize) -> ParamVector {
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut w = ParamVector::from_vec(v);
    let norm = w.norm();
    let r = RADIUS * rng.random::<f64>();
    if norm > 0.0 {
        w.iter_mut().for_each(|x| *x *= r / norm);
    }
    w
}

fn dot(a: &ParamVector, b: &ParamVector) -> f64 {
    a.dot(b.as_dvector())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gradient_matches_central_differences(seed in any::<u64>(), tag in any::<u8>()) {
        let (model, examples, mut rng) = instance(seed, tag);
        let w = point(&mut rng, model.dimension());
        let ex = &examples[0];
        let g = model.grad_example(&w, ex).unwrap();
        let h = 1e-6;
        for i in 0..w.len() {
            let mut plus = w.clone();
            plus[i] += h;
            let mut minus = w.clone();
            minus[i] -= h;
            let fd = (model.eval_example(&plus, ex).unwrap() - model.eval_example(&minus, ex).unwrap()) / (2.0 * h);
            let err = (fd - g[i]).abs() / g[i].abs().max(1e-2);
            prop_assert!(err <= 1e-4, "component {i}: fd {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn convex_smooth_and_lipschitz(seed in any::<u64>(), tag in any::<u8>()) {
        let (model, examples, mut rng) = instance(seed, tag);
        let n = model.dimension();
        for ex in &examples {
            let w = point(&mut rng, n);
            let v = point(&mut rng, n);
            let fw = model.eval_example(&w, ex).unwrap();
            let fv = model.eval_example(&v, ex).unwrap();
            let g = model.grad_example(&w, ex).unwrap();
            let mut diff = v.clone();
            diff.add_scaled(-1.0, &w);
            let linear = fw + dot(&g, &diff);
            prop_assert!(fv >= linear - 1e-10);
            prop_assert!(fv <= linear + 0.5 * model.beta() * diff.norm_squared() + 1e-10);
            prop_assert!(g.norm() <= model.rho() + 1e-10);
        }
    }

    #[test]
    fn batch_loss_is_mean_of_example_losses(seed in any::<u64>(), tag in any::<u8>()) {
        let (model, examples, mut rng) = instance(seed, tag);
        let w = point(&mut rng, model.dimension());
        let batch = Batch::from_slice(&examples);
        let mean = examples.iter().map(|e| model.eval_example(&w, e).unwrap()).sum::<f64>() / examples.len() as f64;
        let got = model.batch_loss(&w, &batch).unwrap();
        prop_assert!((got - mean).abs() <= 1e-12 * examples.len() as f64 * mean.abs().max(1.0));
    }
}

#[test]
fn lipschitz_bound_holds_over_a_dataset() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for kind in [
        LossKind::BinaryLogistic(BinaryParameterization::SingleVector),
        LossKind::BinaryLogistic(BinaryParameterization::PerClass),
        LossKind::MulticlassLogistic { classes: 4 },
    ] {
        let examples = random_logistic_examples(&mut rng, kind, 7, 200);
        let model = LossModel::for_examples(kind, 7, &examples, None).unwrap();
        for _ in 0..100 {
            let w = point(&mut rng, model.dimension());
            for ex in &examples {
                assert!(model.grad_example(&w, ex).unwrap().norm() <= model.rho() + 1e-10);
            }
        }
    }
}
