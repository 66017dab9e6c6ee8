//! Inner-algorithm and echo-loop properties on random problems.

use std::ops::ControlFlow;

use echo_core::echo::{make_stream, run_echo, run_echo_from, EchoCheckpoint, EchoConfig};
use echo_core::loss::{Batch, BinaryParameterization, Example, LossKind, LossModel, QuadraticRho};
use echo_core::optim::{
    agd_run, gd_run, prox_run, AgdState, Algorithm, GdState, InnerState, ProxState, StepBudget,
};
use echo_core::theory::check_regret_prox;
use echo_core::theory::suite::{random_logistic_examples, random_quadratic_examples};
use echo_core::ParamVector;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn logistic(rng: &mut ChaCha8Rng, n: usize, b: usize) -> (LossModel, Vec<Example>) {
    let kind = LossKind::BinaryLogistic(BinaryParameterization::SingleVector);
    let examples = random_logistic_examples(rng, kind, n, b);
    (
        LossModel::for_examples(kind, n, &examples, None).unwrap(),
        examples,
    )
}

fn quadratic(rng: &mut ChaCha8Rng, n: usize, b: usize) -> (LossModel, Vec<Example>) {
    let examples = random_quadratic_examples(rng, n, b);
    let model = LossModel::for_examples(
        LossKind::Quadratic,
        n,
        &examples,
        Some(QuadraticRho::Supplied(1.0)),
    )
    .unwrap();
    (model, examples)
}

fn random_point(rng: &mut ChaCha8Rng, n: usize) -> ParamVector {
    ParamVector::from_vec((0..n).map(|_| rng.random_range(-2.0..2.0)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gd_descends_with_short_steps(seed in any::<u64>(), quad in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=8);
        let (model, examples) = if quad { quadratic(&mut rng, n, 6) } else { logistic(&mut rng, n, 6) };
        let batch = Batch::from_slice(&examples);
        let eta = rng.random_range(0.05..=1.0) / model.beta();
        let w0 = random_point(&mut rng, n);
        let run = gd_run(&model, &w0, &GdState { eta }, &batch, 20, true).unwrap();
        let traj = run.trajectory.unwrap();
        for pair in traj.windows(2) {
            let (a, b) = (model.batch_loss(&pair[0], &batch).unwrap(), model.batch_loss(&pair[1], &batch).unwrap());
            prop_assert!(b <= a + 1e-10);
        }
    }

    #[test]
    fn prox_objective_descends(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=8);
        let (model, examples) = logistic(&mut rng, n, 6);
        let batch = Batch::from_slice(&examples);
        let gamma = [0.1, 1.0, 10.0][rng.random_range(0..3)];
        let state = ProxState {
            eta: rng.random_range(0.05..=1.0) / (model.beta() + gamma),
            gamma,
            pivot: random_point(&mut rng, n),
        };
        let run = prox_run(&model, &random_point(&mut rng, n), &state, &batch, 15, true).unwrap();
        let traj = run.trajectory.unwrap();
        let objective = |w: &ParamVector| {
            model.batch_loss(w, &batch).unwrap() + 0.5 * gamma * w.distance(&state.pivot).powi(2)
        };
        for pair in traj.windows(2) {
            prop_assert!(objective(&pair[1]) <= objective(&pair[0]) + 1e-10);
        }
        // new pivot is the mean of w_0..w_{K-1}
        let mut mean = DVector::zeros(n);
        for w in &traj[..15] {
            mean += w.as_dvector();
        }
        mean /= 15.0;
        prop_assert!((mean - run.state.pivot.as_dvector()).amax() <= 1e-12);
    }

    #[test]
    fn runs_are_deterministic(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=5);
        let (model, examples) = quadratic(&mut rng, n, 4);
        let batch = Batch::from_slice(&examples);
        let w0 = random_point(&mut rng, n);
        let s = AgdState::initial(0.5 / model.beta(), n);
        let a = agd_run(&model, &w0, &s, &batch, 9, true).unwrap();
        let b = agd_run(&model, &w0, &s, &batch, 9, true).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn echo_budget_and_resume(seed in any::<u64>(), alg_tag in 0u8..3, cut in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=5);
        let (model, examples) = quadratic(&mut rng, n, 30);
        let algorithm = [Algorithm::Gd, Algorithm::Prox, Algorithm::Agd][alg_tag as usize];
        let w0 = random_point(&mut rng, n);
        let eta = 0.5 / model.beta();
        let s0 = match algorithm {
            Algorithm::Gd => InnerState::gd(eta),
            Algorithm::Prox => InnerState::prox(eta / 2.0, 1.0, w0.clone()),
            Algorithm::Agd => InnerState::agd(eta, n),
        };
        let schedule: Vec<usize> = (0..rng.random_range(1..5)).map(|_| rng.random_range(1..6)).collect();
        let budget = StepBudget::Schedule(schedule);
        let cfg = EchoConfig::new(algorithm, 4, 12, budget.clone(), seed);
        let mut stream = make_stream(&examples, 4, seed).unwrap();
        let full = run_echo(&model, &w0, &s0, &mut stream, &cfg).unwrap();
        prop_assert_eq!(full.steps_taken, budget.total_steps(12));
        prop_assert_eq!(full.samples_consumed, 48);

        let head_cfg = EchoConfig { outer_steps: cut, ..cfg.clone() };
        let mut head_stream = make_stream(&examples, 4, seed).unwrap();
        let head = run_echo(&model, &w0, &s0, &mut head_stream, &head_cfg).unwrap();
        let mut tail = make_stream(&examples, 4, seed).unwrap().skip_to(cut as u64);
        let resumed = run_echo_from(&model, EchoCheckpoint::from(&head), &mut tail, &cfg, &mut |_| ControlFlow::Continue(())).unwrap();
        prop_assert_eq!(resumed.w_out, full.w_out);
    }
}

/// With `K = 1`, the first step of every inner algorithm from a fresh state
/// is a plain stochastic gradient step.
#[test]
fn first_steps_match_sgd_for_every_algorithm() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (model, examples) = logistic(&mut rng, 4, 20);
    let w0 = random_point(&mut rng, 4);
    let eta = 0.3;
    let stream = make_stream(&examples, 5, 9).unwrap();
    let batch = stream.batch(0);
    let mut expected = w0.clone();
    expected.add_scaled(-eta, &model.batch_grad(&w0, &batch).unwrap());
    for state in [
        InnerState::gd(eta),
        InnerState::prox(eta, 0.0, w0.clone()),
        InnerState::prox(eta, 2.0, w0.clone()),
        InnerState::agd(eta, 4),
    ] {
        let run = state.run(&model, &w0, &batch, 1, false).unwrap();
        assert_eq!(run.w_out, expected, "{state:?}");
    }
}

/// Proximal GD with a varying echoing factor: every per-batch certificate
/// of the echo loop holds, with the potential at each batch's own `K_t`.
#[test]
fn prox_schedule_certificates_hold_per_batch() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (model, examples) = logistic(&mut rng, 5, 200);
    let w_star = random_point(&mut rng, 5);
    let schedule = [2usize, 3, 5, 1, 8];
    let stream = make_stream(&examples, 8, 4).unwrap();
    let gamma = 1.0;
    let mut w = random_point(&mut rng, 5);
    let mut state = ProxState {
        eta: 1.0 / (model.beta() + gamma),
        gamma,
        pivot: w.clone(),
    };
    for (t, &k) in schedule.iter().cycle().take(40).enumerate() {
        let batch = stream.batch(t as u64);
        let cert = check_regret_prox(&model, &batch, &w, &state, k, &w_star).unwrap();
        assert!(cert.holds(), "batch {t}: {cert:?}");
        let run = prox_run(&model, &w, &state, &batch, k, false).unwrap();
        w = run.w_out;
        state = run.state;
    }
}

#[test]
fn echo_with_k1_is_minibatch_sgd() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (model, examples) = logistic(&mut rng, 6, 100);
    let w0 = random_point(&mut rng, 6);
    let cfg = EchoConfig {
        record_iterates: true,
        ..EchoConfig::new(Algorithm::Gd, 10, 200, StepBudget::Fixed(1), 5)
    };
    let mut stream = make_stream(&examples, 10, 5).unwrap();
    let r = run_echo(&model, &w0, &InnerState::gd(0.2), &mut stream, &cfg).unwrap();
    let reference = make_stream(&examples, 10, 5).unwrap();
    let mut w = w0;
    for (t, iterate) in r.outer_iterates.unwrap().iter().enumerate().skip(1) {
        let g = model
            .batch_grad(&w, &reference.batch(t as u64 - 1))
            .unwrap();
        w.add_scaled(-0.2, &g);
        assert_eq!(&w, iterate);
    }
}
