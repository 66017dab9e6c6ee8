//! Random instance generators and the verification sweeps built on the
//! oracles: regret certificates, stability measurements, the Chebyshev
//! identity, and Monte-Carlo checks of the excess-risk bounds on synthetic
//! quadratics.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::bounds::{theorem_bound, BoundKind};
use super::chebyshev::transfer_power;
use super::regret::{check_regret_agd, check_regret_gd, check_regret_prox, RegretCertificate};
use super::stability::measure_stability;
use super::TheoryError;
use crate::data::SyntheticProblem;
use crate::echo::{make_stream, run_echo, EchoConfig};
use crate::loss::{
    Batch, BinaryParameterization, Example, LossKind, LossModel, QuadraticExample, QuadraticRho,
};
use crate::optim::{
    prox_params, step_size_agd, step_size_gd, AgdState, Algorithm, InnerState, ProxState,
    StepBudget,
};
use crate::param::ParamVector;

/// Outcome of one sweep. `worst` is the smallest certificate slack, or the
/// largest measured/bound ratio, depending on `metric`.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub name: String,
    pub instances: usize,
    pub failures: usize,
    pub metric: &'static str,
    pub worst: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.instances > 0
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {}/{} instances hold, {} = {:.3e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.instances - self.failures,
            self.instances,
            self.metric,
            self.worst
        )
    }
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Random PSD matrix `M Mᵀ + ridge·I` rescaled to spectral norm `norm`.
pub fn random_psd(rng: &mut ChaCha8Rng, n: usize, norm: f64, ridge: f64) -> DMatrix<f64> {
    let rank = rng.random_range(1..=n);
    let m = DMatrix::from_fn(n, rank, |_, _| rng.sample::<f64, _>(StandardNormal));
    let a = &m * m.transpose() + DMatrix::identity(n, n) * ridge;
    let top = a.clone().symmetric_eigenvalues().max();
    let a = a * (norm / top);
    (&a + a.transpose()) * 0.5
}

/// Batch of `b` random quadratic examples in `n` dimensions, each with
/// spectral norm at most 2.
pub fn random_quadratic_examples(rng: &mut ChaCha8Rng, n: usize, b: usize) -> Vec<Example> {
    (0..b)
        .map(|_| {
            let norm = rng.random_range(0.05..2.0);
            let a = random_psd(rng, n, norm, 0.05);
            Example::Quadratic(QuadraticExample {
                a: Arc::new(a),
                b: normal_vec(rng, n, 1.0),
            })
        })
        .collect()
}

fn random_logistic_kind(rng: &mut ChaCha8Rng) -> LossKind {
    match rng.random_range(0..3) {
        0 => LossKind::BinaryLogistic(BinaryParameterization::SingleVector),
        1 => LossKind::BinaryLogistic(BinaryParameterization::PerClass),
        _ => LossKind::MulticlassLogistic {
            classes: rng.random_range(3..=5),
        },
    }
}

fn random_label(rng: &mut ChaCha8Rng, kind: LossKind) -> i32 {
    match kind {
        LossKind::MulticlassLogistic { classes } => rng.random_range(0..classes as i32),
        _ => {
            if rng.random_bool(0.5) {
                1
            } else {
                -1
            }
        }
    }
}

/// Batch of `b` dense labelled examples with `n_features` features.
pub fn random_logistic_examples(
    rng: &mut ChaCha8Rng,
    kind: LossKind,
    n_features: usize,
    b: usize,
) -> Vec<Example> {
    let scale = rng.random_range(0.2..3.0);
    (0..b)
        .map(|_| {
            let x = normal_vec(rng, n_features, scale);
            Example::dense(x.as_slice().to_vec(), random_label(rng, kind))
        })
        .collect()
}

fn batch_minimizer(examples: &[Example]) -> Option<ParamVector> {
    let first = examples.first()?.as_quadratic()?;
    let n = first.b.len();
    let mut a = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    for ex in examples {
        let q = ex.as_quadratic()?;
        a += q.a.as_ref();
        b += &q.b;
    }
    a.cholesky().map(|c| ParamVector::from(c.solve(&b)))
}

struct RegretInstance {
    model: LossModel,
    examples: Vec<Example>,
    w_init: ParamVector,
    w_star: ParamVector,
    k: usize,
}

fn regret_instance(rng: &mut ChaCha8Rng, quadratic: bool) -> Result<RegretInstance, TheoryError> {
    let n_features = rng.random_range(1..=10);
    let b = rng.random_range(1..=8);
    let k = rng.random_range(1..=20);
    let (model, examples) = if quadratic {
        let examples = random_quadratic_examples(rng, n_features, b);
        let model = LossModel::for_examples(
            LossKind::Quadratic,
            n_features,
            &examples,
            Some(QuadraticRho::Supplied(1.0)),
        )?;
        (model, examples)
    } else {
        let kind = random_logistic_kind(rng);
        let examples = random_logistic_examples(rng, kind, n_features, b);
        (
            LossModel::for_examples(kind, n_features, &examples, None)?,
            examples,
        )
    };
    let dim = model.dimension();
    let w_init = ParamVector::from(normal_vec(rng, dim, 2.0));
    let w_star = if quadratic {
        batch_minimizer(&examples).expect("ridge keeps the batch Hessian definite")
    } else {
        ParamVector::from(normal_vec(rng, dim, 2.0))
    };
    Ok(RegretInstance {
        model,
        examples,
        w_init,
        w_star,
        k,
    })
}

/// Step-size fraction in `(0, 1]`, with the boundary value hit often.
fn step_fraction(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random_bool(0.25) {
        1.0
    } else {
        rng.random_range(0.01..1.0)
    }
}

/// `count` random regret certificates for `algorithm`. GD and proximal GD
/// alternate quadratic and logistic batches; AGD uses quadratic batches.
pub fn regret_suite(
    algorithm: Algorithm,
    count: usize,
    seed: u64,
) -> Result<SuiteReport, TheoryError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    let mut worst = f64::INFINITY;
    for i in 0..count {
        let quadratic = algorithm == Algorithm::Agd || i % 2 == 0;
        let inst = regret_instance(&mut rng, quadratic)?;
        let batch = Batch::from_slice(&inst.examples);
        let beta = inst.model.beta();
        let cert: RegretCertificate = match algorithm {
            Algorithm::Gd => {
                let eta = step_fraction(&mut rng) / beta;
                check_regret_gd(&inst.model, &batch, &inst.w_init, eta, inst.k, &inst.w_star)?
            }
            Algorithm::Prox => {
                let gamma = [0.1, 1.0, 10.0][rng.random_range(0..3)];
                let state = ProxState {
                    eta: step_fraction(&mut rng) / (beta + gamma),
                    gamma,
                    pivot: ParamVector::from(normal_vec(&mut rng, inst.model.dimension(), 2.0)),
                };
                check_regret_prox(
                    &inst.model,
                    &batch,
                    &inst.w_init,
                    &state,
                    inst.k,
                    &inst.w_star,
                )?
            }
            Algorithm::Agd => {
                let fresh = rng.random_bool(0.3);
                let state = AgdState {
                    eta: step_fraction(&mut rng) / beta,
                    d: if fresh {
                        ParamVector::zeros(inst.model.dimension())
                    } else {
                        ParamVector::from(normal_vec(&mut rng, inst.model.dimension(), 0.5))
                    },
                    lambda: if fresh {
                        1.0
                    } else {
                        rng.random_range(1.0..200.0)
                    },
                };
                check_regret_agd(
                    &inst.model,
                    &batch,
                    &inst.w_init,
                    &state,
                    inst.k,
                    &inst.w_star,
                )?
            }
        };
        let nonnegative_potentials = cert.potential_init >= -1e-12 && cert.potential_out >= -1e-12;
        if !(cert.precondition_ok && cert.holds() && nonnegative_potentials) {
            failures += 1;
        }
        worst = worst.min(cert.slack / 1f64.max(cert.lhs.abs()).max(cert.rhs.abs()));
    }
    Ok(SuiteReport {
        name: format!("{algorithm} regret certificate"),
        instances: count,
        failures,
        metric: "worst relative slack",
        worst,
    })
}

fn extreme_probes(
    rng: &mut ChaCha8Rng,
    kind: LossKind,
    n_features: usize,
    norm: f64,
    count: usize,
) -> Vec<Example> {
    (0..count)
        .map(|_| {
            let dir = normal_vec(rng, n_features, 1.0);
            let x = &dir * (norm / dir.norm().max(1e-300));
            Example::dense(x.as_slice().to_vec(), random_label(rng, kind))
        })
        .collect()
}

fn max_feature_norm(examples: &[Example]) -> f64 {
    examples
        .iter()
        .filter_map(|e| e.as_labeled())
        .map(|l| l.features.norm_sq().sqrt())
        .fold(0.0, f64::max)
}

/// `count` paired swap-one-example runs. GD and proximal GD use logistic
/// batches with probes made of the batch, the replacement and 100 random
/// points at the largest feature norm; AGD uses quadratic batches.
pub fn stability_suite(
    algorithm: Algorithm,
    count: usize,
    seed: u64,
) -> Result<SuiteReport, TheoryError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let n_features = rng.random_range(1..=10);
        let b = rng.random_range(2..=64);
        let k = rng.random_range(1..=20);
        let swap = rng.random_range(0..b);
        let (measurement, rho) = if algorithm == Algorithm::Agd {
            let examples = random_quadratic_examples(&mut rng, n_features, b);
            let mut extra = random_quadratic_examples(&mut rng, n_features, 11);
            let replacement = extra.pop().unwrap();
            let mut probes = examples.clone();
            probes.push(replacement.clone());
            probes.extend(extra);
            let provisional = LossModel::for_examples(
                LossKind::Quadratic,
                n_features,
                &probes,
                Some(QuadraticRho::Supplied(1.0)),
            )?;
            let state = InnerState::Agd(AgdState {
                eta: step_fraction(&mut rng) / provisional.beta(),
                d: ParamVector::from(normal_vec(&mut rng, n_features, 0.3)),
                lambda: rng.random_range(1.0..50.0),
            });
            let w_init = ParamVector::from(normal_vec(&mut rng, n_features, 1.0));
            let batch = Batch::from_slice(&examples);
            let first = measure_stability(
                &provisional,
                &batch,
                swap,
                &replacement,
                &probes,
                &w_init,
                &state,
                k,
            )?;
            // gradient bound on the ball around 0 holding every iterate
            let model = LossModel::for_examples(
                LossKind::Quadratic,
                n_features,
                &probes,
                Some(QuadraticRho::Ball {
                    center: DVector::zeros(n_features),
                    radius: first.max_iterate_norm,
                }),
            )?;
            let m = measure_stability(
                &model,
                &batch,
                swap,
                &replacement,
                &probes,
                &w_init,
                &state,
                k,
            )?;
            (m, model.rho())
        } else {
            let kind = random_logistic_kind(&mut rng);
            let mut examples = random_logistic_examples(&mut rng, kind, n_features, b + 1);
            let replacement = examples.pop().unwrap();
            let mut probes = examples.clone();
            probes.push(replacement.clone());
            let norm = max_feature_norm(&probes);
            probes.extend(extreme_probes(&mut rng, kind, n_features, norm, 100));
            let model = LossModel::for_examples(kind, n_features, &probes, None)?;
            let dim = model.dimension();
            let w_init = ParamVector::from(normal_vec(&mut rng, dim, 1.0));
            let state = match algorithm {
                Algorithm::Gd => InnerState::gd(step_fraction(&mut rng) / model.beta()),
                _ => {
                    let gamma = [0.1, 1.0, 10.0][rng.random_range(0..3)];
                    InnerState::prox(
                        step_fraction(&mut rng) / (model.beta() + gamma),
                        gamma,
                        ParamVector::from(normal_vec(&mut rng, dim, 1.0)),
                    )
                }
            };
            let batch = Batch::from_slice(&examples);
            let m = measure_stability(
                &model,
                &batch,
                swap,
                &replacement,
                &probes,
                &w_init,
                &state,
                k,
            )?;
            (m, model.rho())
        };
        if !measurement.holds(rho) {
            failures += 1;
        }
        worst = worst.max(measurement.ratio());
    }
    Ok(SuiteReport {
        name: format!("{algorithm} uniform stability"),
        instances: count,
        failures,
        metric: "max divergence/bound",
        worst,
    })
}

/// Direct powers of the transfer matrix against the Chebyshev closed form,
/// and the `2(j+1)` norm bound, over `h ∈ {0, 0.01, …, 1}` and `j ≤ max_j`.
pub fn chebyshev_suite(max_j: u32) -> Result<SuiteReport, TheoryError> {
    let mut failures = 0;
    let mut instances = 0;
    let mut worst: f64 = 0.0;
    for i in 0..=100 {
        let h = i as f64 / 100.0;
        for j in 1..=max_j {
            let p = transfer_power(h, j)?;
            let err = p.max_entry_error();
            let scale = p.direct.amax().max(1.0);
            instances += 1;
            if err > 1e-9 * scale || p.spectral_norm > 2.0 * (j as f64 + 1.0) + 1e-9 {
                failures += 1;
            }
            worst = worst.max(err / scale);
        }
    }
    Ok(SuiteReport {
        name: "transfer matrix Chebyshev identity".into(),
        instances,
        failures,
        metric: "max relative entry error",
        worst,
    })
}

/// Mean and standard error of a sample.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte-Carlo excess risk of an echoed algorithm against its bound.
#[derive(Clone, Debug, PartialEq)]
pub struct ExcessRiskStudy {
    pub algorithm: Algorithm,
    pub batch_size: usize,
    pub outer_steps: usize,
    pub k: usize,
    pub eta: f64,
    pub gamma: f64,
    pub mean: f64,
    pub std_error: f64,
    pub bound: f64,
}

impl ExcessRiskStudy {
    /// Mean excess risk at most the bound plus three standard errors.
    pub fn within_bound(&self) -> bool {
        self.mean <= self.bound + 3.0 * self.std_error
    }
}

impl fmt::Display for ExcessRiskStudy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} B={} T={} K={} eta={:.4e}: excess {:.4e} ± {:.1e} (bound {:.4e})",
            self.algorithm,
            self.batch_size,
            self.outer_steps,
            self.k,
            self.eta,
            self.mean,
            self.std_error,
            self.bound
        )
    }
}

/// Excess risk with echoing at most the unechoed measurement plus three of
/// its standard errors.
pub fn echoing_does_not_hurt(unechoed: &ExcessRiskStudy, echoed: &ExcessRiskStudy) -> bool {
    echoed.mean <= unechoed.mean + 3.0 * unechoed.std_error
}

/// Runs the echoed algorithm with its prescribed step size on `problem`
/// for `seeds` independent batch streams and measures `F(w_out) − F(w*)`.
pub fn excess_risk_study(
    problem: &SyntheticProblem,
    algorithm: Algorithm,
    batch_size: usize,
    outer_steps: usize,
    k: usize,
    seeds: u64,
) -> Result<ExcessRiskStudy, TheoryError> {
    let model = problem.model();
    let (beta, rho, d) = (problem.beta, problem.rho, problem.d);
    let n = model.dimension();
    let (state, kind, gamma) = match algorithm {
        Algorithm::Gd => (
            InnerState::gd(step_size_gd(beta, rho, d, batch_size, outer_steps, k)?),
            BoundKind::Degd,
            0.0,
        ),
        Algorithm::Prox => {
            let (gamma, eta) = prox_params(beta, rho, d, batch_size, outer_steps)?;
            // the first pivot is the starting point
            (
                InnerState::prox(eta, gamma, problem.w0.clone()),
                BoundKind::Depgd,
                gamma,
            )
        }
        Algorithm::Agd => (
            InnerState::agd(step_size_agd(beta, rho, d, batch_size, outer_steps, k)?, n),
            BoundKind::Deagd,
            0.0,
        ),
    };
    let mut excess = Vec::with_capacity(seeds as usize);
    for seed in 0..seeds {
        let mut stream = make_stream(&problem.dataset.examples, batch_size, seed)
            .map_err(|e| TheoryError::InvalidArgument(e.to_string()))?;
        let cfg = EchoConfig::new(
            algorithm,
            batch_size,
            outer_steps,
            StepBudget::Fixed(k),
            seed,
        );
        let run = run_echo(&model, &problem.w0, &state, &mut stream, &cfg)
            .map_err(|e| TheoryError::InvalidArgument(e.to_string()))?;
        excess.push(problem.excess_risk(&run.w_out));
    }
    let (mean, std_error) = mean_and_se(&excess);
    Ok(ExcessRiskStudy {
        algorithm,
        batch_size,
        outer_steps,
        k,
        eta: state.eta(),
        gamma,
        mean,
        std_error,
        bound: theorem_bound(kind, beta, rho, d, batch_size, outer_steps, k)?,
    })
}

/// Every sweep with its default size; the studies use `mc_seeds` streams.
pub fn run_all(
    seed: u64,
    instances: usize,
    mc_seeds: u64,
) -> Result<Vec<SuiteReport>, TheoryError> {
    let mut reports = Vec::new();
    for alg in [Algorithm::Gd, Algorithm::Prox, Algorithm::Agd] {
        reports.push(regret_suite(alg, instances, seed)?);
    }
    for alg in [Algorithm::Gd, Algorithm::Prox, Algorithm::Agd] {
        reports.push(stability_suite(alg, instances, seed.wrapping_add(1))?);
    }
    reports.push(chebyshev_suite(40)?);
    reports.push(lambda_suite(10_000));

    let problem = crate::data::gen_quadratic(&crate::data::QuadraticSpec {
        n: 5,
        beta: 1.0,
        noise_scale: 1.0,
        count: 10_000,
        distance: 1.0,
        seed,
    })
    .map_err(|e| TheoryError::InvalidArgument(e.to_string()))?;
    let plan: [(Algorithm, &[usize], &[usize]); 3] = [
        (Algorithm::Gd, &[1, 4, 16], &[200]),
        (Algorithm::Prox, &[1, 4, 16], &[200]),
        (Algorithm::Agd, &[1, 4], &[20, 50]),
    ];
    let mut gd_studies = Vec::new();
    for (alg, ks, ts) in plan {
        let mut failures = 0;
        let mut instances = 0;
        let mut worst = f64::NEG_INFINITY;
        for &t in ts {
            for &k in ks {
                let study = excess_risk_study(&problem, alg, 50, t, k, mc_seeds)?;
                instances += 1;
                if !study.within_bound() {
                    failures += 1;
                }
                worst = worst.max(study.mean / study.bound);
                if alg == Algorithm::Gd {
                    gd_studies.push(study);
                }
            }
        }
        reports.push(SuiteReport {
            name: format!("{alg} excess-risk bound"),
            instances,
            failures,
            metric: "max excess/bound",
            worst,
        });
    }
    let (first, last) = (&gd_studies[0], &gd_studies[gd_studies.len() - 1]);
    let gap = (last.mean - first.mean) / first.std_error.max(f64::MIN_POSITIVE);
    reports.push(SuiteReport {
        name: format!("gd echoing K={} vs K={}", last.k, first.k),
        instances: 1,
        failures: usize::from(!echoing_does_not_hurt(first, last)),
        metric: "excess gap in standard errors",
        worst: gap,
    });
    Ok(reports)
}

/// `λ_{j+1}² − λ_{j+1} = λ_j²` and `λ_{j+1} ≥ λ_j + ½` from `λ_0 = 1`.
pub fn lambda_suite(steps: usize) -> SuiteReport {
    let mut lambda = 1.0f64;
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..steps {
        let next = crate::optim::next_lambda(lambda);
        let rel = (next * next - next - lambda * lambda).abs() / (next * next);
        worst = worst.max(rel);
        if rel > 1e-12 || next < lambda + 0.5 {
            failures += 1;
        }
        lambda = next;
    }
    SuiteReport {
        name: "AGD momentum sequence".into(),
        instances: steps,
        failures,
        metric: "max relative residual",
        worst,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_sweeps_pass() {
        for alg in [Algorithm::Gd, Algorithm::Prox, Algorithm::Agd] {
            let r = regret_suite(alg, 40, 1).unwrap();
            assert!(r.passed(), "{r}");
            let s = stability_suite(alg, 20, 2).unwrap();
            assert!(s.passed(), "{s}");
        }
        assert!(chebyshev_suite(10).unwrap().passed());
        assert!(lambda_suite(1000).passed());
    }

    #[test]
    fn mean_and_standard_error() {
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }
}
