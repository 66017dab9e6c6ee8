//! Synthetic quadratic populations with a closed-form optimum.
//!
//! Every example is `f(w, ξ) = ½ wᵀ A w − b_ξᵀ w` with one shared `A` and
//! `b_ξ = b̄ + noise_ξ`. The noise is centred so the dataset mean of `b_ξ` is
//! `b̄`, which makes the finite dataset itself the population: `F(w) =
//! ½ wᵀ A w − b̄ᵀ w`, `w* = A⁻¹ b̄`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{DataError, Dataset};
use crate::loss::{Example, LossKind, LossModel, QuadraticExample};
use crate::param::ParamVector;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticSpec {
    pub n: usize,
    /// Largest eigenvalue of `A`; the spectrum lies in `[beta/10, beta]`.
    pub beta: f64,
    /// Radius of the ball the raw noise vectors are drawn from.
    pub noise_scale: f64,
    pub count: usize,
    /// Distance `‖w0 − w*‖` of the generated starting point.
    pub distance: f64,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct SyntheticProblem {
    pub dataset: Dataset,
    pub a: Arc<DMatrix<f64>>,
    pub b_mean: DVector<f64>,
    pub w_star: ParamVector,
    /// `F(w*) = −½ b̄ᵀ w*`.
    pub f_star: f64,
    pub w0: ParamVector,
    pub beta: f64,
    /// Gradient-norm bound over the ball `‖w − w*‖ ≤ 2D`.
    pub rho: f64,
    pub d: f64,
}

fn unit_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

fn ball_sample(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> DVector<f64> {
    let r: f64 = rng.random::<f64>().powf(1.0 / n as f64);
    unit_vector(rng, n) * (radius * r)
}

pub fn gen_quadratic(spec: &QuadraticSpec) -> Result<SyntheticProblem, DataError> {
    let QuadraticSpec {
        n,
        beta,
        noise_scale,
        count,
        distance,
        seed,
    } = *spec;
    if n == 0 || count == 0 {
        return Err(DataError::InvalidSpec("need n >= 1 and count >= 1".into()));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(DataError::InvalidSpec(format!(
            "beta must be positive, got {beta}"
        )));
    }
    if !(noise_scale >= 0.0 && noise_scale.is_finite()) || !(distance > 0.0 && distance.is_finite())
    {
        return Err(DataError::InvalidSpec(
            "noise scale must be >= 0 and distance > 0".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut eig: Vec<f64> = (0..n)
        .map(|_| rng.random_range(beta / 10.0..=beta))
        .collect();
    eig[0] = beta;
    if n > 1 {
        eig[n - 1] = beta / 10.0;
    }
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = g.qr().q();
    let a = &q * DMatrix::from_diagonal(&DVector::from_vec(eig)) * q.transpose();
    let a = (&a + a.transpose()) * 0.5;

    let w_star_dir = unit_vector(&mut rng, n);
    let b_mean = &a * &w_star_dir;
    from_parts(a, b_mean, noise_scale, count, distance, &mut rng)
}

/// Problem with a given `A` and `b̄`.
pub fn from_parts(
    a: DMatrix<f64>,
    b_mean: DVector<f64>,
    noise_scale: f64,
    count: usize,
    distance: f64,
    rng: &mut ChaCha8Rng,
) -> Result<SyntheticProblem, DataError> {
    let n = b_mean.len();
    let noise: Vec<DVector<f64>> = (0..count)
        .map(|_| ball_sample(rng, n, noise_scale))
        .collect();
    let mut centre = DVector::zeros(n);
    for v in &noise {
        centre += v;
    }
    centre /= count as f64;

    let a = Arc::new(a);
    let probe = QuadraticExample::new(a.clone(), b_mean.clone())?;
    let beta = probe.spectral_norm();
    let w_star = a
        .as_ref()
        .clone()
        .cholesky()
        .ok_or_else(|| DataError::InvalidSpec("A must be positive definite".into()))?
        .solve(&b_mean);

    let mut max_noise: f64 = 0.0;
    let examples = noise
        .into_iter()
        .map(|v| {
            let v = v - &centre;
            max_noise = max_noise.max(v.norm());
            Example::Quadratic(QuadraticExample {
                a: a.clone(),
                b: &b_mean + v,
            })
        })
        .collect();
    let dataset = Dataset::new("synthetic-quadratic", examples, n, 0, false)?;

    let f_star = -0.5 * b_mean.dot(&w_star);
    let w0 = &w_star + unit_vector(rng, n) * distance;
    Ok(SyntheticProblem {
        dataset,
        a,
        b_mean,
        w_star: w_star.into(),
        f_star,
        w0: w0.into(),
        beta,
        // ‖A w − b_ξ‖ ≤ ‖A‖·‖w − w*‖ + ‖noise_ξ‖ on the ball of radius 2D
        rho: beta * 2.0 * distance + max_noise,
        d: distance,
    })
}

impl SyntheticProblem {
    pub fn model(&self) -> LossModel {
        LossModel::new(LossKind::Quadratic, self.b_mean.len(), self.beta, self.rho)
            .expect("generator constants are positive")
    }

    /// `F(w) = ½ wᵀ A w − b̄ᵀ w`.
    pub fn population_loss(&self, w: &ParamVector) -> f64 {
        0.5 * w.dot(&(self.a.as_ref() * w.as_dvector())) - self.b_mean.dot(w.as_dvector())
    }

    /// `F(w) − F(w*) = ½ (w − w*)ᵀ A (w − w*)`, without cancellation.
    pub fn excess_risk(&self, w: &ParamVector) -> f64 {
        let e = w.as_dvector() - self.w_star.as_dvector();
        0.5 * e.dot(&(self.a.as_ref() * &e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::Batch;
    use approx::assert_relative_eq;

    fn spec(n: usize, noise: f64) -> QuadraticSpec {
        QuadraticSpec {
            n,
            beta: 1.0,
            noise_scale: noise,
            count: 500,
            distance: 1.0,
            seed: 42,
        }
    }

    #[test]
    fn generator_shape_and_constants() {
        let p = gen_quadratic(&spec(5, 0.5)).unwrap();
        let eig = p.a.as_ref().clone().symmetric_eigenvalues();
        assert_relative_eq!(eig.max(), 1.0, epsilon = 1e-12);
        assert!(eig.min() >= 0.1 - 1e-12);
        assert_relative_eq!(p.w0.distance(&p.w_star), 1.0, epsilon = 1e-12);
        assert_relative_eq!(p.population_loss(&p.w_star), p.f_star, epsilon = 1e-12);
        let model = p.model();
        assert_relative_eq!(
            model.mean_loss(&p.w_star, &p.dataset.examples).unwrap(),
            p.f_star,
            epsilon = 1e-12
        );
        // gradients stay within rho on the declared ball
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let w = ParamVector::from(
                p.w_star.as_dvector() + unit_vector(&mut rng, 5) * (2.0 * rng.random::<f64>()),
            );
            for ex in p.dataset.examples.iter().take(50) {
                assert!(model.grad_example(&w, ex).unwrap().norm() <= p.rho + 1e-10);
            }
        }
    }

    #[test]
    fn noiseless_batches_share_the_optimum() {
        let p = gen_quadratic(&spec(3, 0.0)).unwrap();
        let model = p.model();
        let batch = Batch::from_slice(&p.dataset.examples[..7]);
        assert!(model.batch_grad(&p.w_star, &batch).unwrap().norm() < 1e-12);
    }

    #[test]
    fn scalar_problem() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = from_parts(
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 1.0),
            0.3,
            10,
            1.0,
            &mut rng,
        )
        .unwrap();
        assert_eq!(p.w_star[0], 1.0);
        assert_eq!(p.f_star, -0.5);
    }

    #[test]
    fn grid_search_matches_closed_form_optimum() {
        let p = gen_quadratic(&QuadraticSpec {
            n: 2,
            ..spec(2, 0.2)
        })
        .unwrap();
        let (cx, cy) = (p.w_star[0], p.w_star[1]);
        let mut best = f64::INFINITY;
        let (mut lo_x, mut lo_y, mut half) = (cx.round() - 4.0, cy.round() - 4.0, 8.0);
        // coarse-to-fine grid refinement
        for _ in 0..12 {
            let steps = 40;
            let h = half / steps as f64;
            let mut arg = (lo_x, lo_y);
            for i in 0..=steps {
                for j in 0..=steps {
                    let w = ParamVector::from_slice(&[lo_x + i as f64 * h, lo_y + j as f64 * h]);
                    let f = p.population_loss(&w);
                    if f < best {
                        best = f;
                        arg = (w[0], w[1]);
                    }
                }
            }
            half /= 4.0;
            lo_x = arg.0 - half / 2.0;
            lo_y = arg.1 - half / 2.0;
        }
        assert!((best - p.f_star).abs() < 1e-6, "{best} vs {}", p.f_star);
    }

    #[test]
    fn single_example_losses_average_to_population() {
        let p = gen_quadratic(&spec(4, 2.0)).unwrap();
        let model = p.model();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let w = ParamVector::from(unit_vector(&mut rng, 4) * 1.5);
            let draws: Vec<f64> = (0..10_000)
                .map(|_| {
                    let ex = &p.dataset.examples[rng.random_range(0..p.dataset.len())];
                    model.eval_example(&w, ex).unwrap()
                })
                .collect();
            let mean = draws.iter().sum::<f64>() / draws.len() as f64;
            let var =
                draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
            let se = (var / draws.len() as f64).sqrt();
            assert!((mean - p.population_loss(&w)).abs() <= 3.0 * se + 1e-12);
        }
    }

    #[test]
    fn rejects_degenerate_requests() {
        assert!(gen_quadratic(&QuadraticSpec {
            n: 0,
            ..spec(1, 0.0)
        })
        .is_err());
        assert!(gen_quadratic(&QuadraticSpec {
            beta: 0.0,
            ..spec(1, 0.0)
        })
        .is_err());
        assert!(gen_quadratic(&QuadraticSpec {
            count: 0,
            ..spec(1, 0.0)
        })
        .is_err());
    }
}
