use admission_core::adp::{
    decode_checkpoint, encode_checkpoint, feature_vector, rls_step, Hyperparams, LearnerState,
};
use admission_core::instances::cabg;
use admission_core::model::Model;
use admission_core::sim::{sample_arrivals, AdpPolicy, Policy};
use admission_core::Error;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Regularized batch LS-TD(λ): `(β⁻¹ I + Σ z dᵀ)⁻¹ Σ z C`.
fn batch_theta(
    phis: &[DVector<f64>],
    costs: &[f64],
    lambda: f64,
    beta: f64,
    gamma: f64,
) -> (DVector<f64>, DMatrix<f64>) {
    let dim = phis[0].len();
    let mut a = DMatrix::identity(dim, dim) / beta;
    let mut b = DVector::zeros(dim);
    let mut z = DVector::zeros(dim);
    for k in 0..costs.len() {
        z = &z * (gamma * lambda) + &phis[k];
        let d = &phis[k] - &phis[k + 1] * gamma;
        a += &z * d.transpose();
        b += &z * costs[k];
    }
    let theta = a.clone().lu().solve(&b).expect("regularized system is solvable");
    (theta, a)
}

#[test]
fn recursive_matches_batch() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let dim = rng.random_range(1..=20);
        let lambda = rng.random_range(0.0..=1.0);
        let beta = [1e-3, 1.0, 1e3][rng.random_range(0..3)];
        let gamma = rng.random_range(0.0..0.999);
        let phis: Vec<DVector<f64>> = (0..=50)
            .map(|_| DVector::from_fn(dim, |_, _| f64::from(rng.random_range(0..6u32))))
            .collect();
        let costs: Vec<f64> = (0..50).map(|_| rng.random_range(0.0..1000.0)).collect();
        let hyper = Hyperparams {
            lambda,
            beta,
            ..Hyperparams::default()
        };
        let mut learner = LearnerState::new(dim, hyper, gamma).unwrap();
        for k in 0..50 {
            rls_step(&mut learner, &phis[k], &phis[k + 1], costs[k]).unwrap();
        }
        let (want, a) = batch_theta(&phis, &costs, lambda, beta, gamma);
        let rel = (&learner.theta - &want).norm() / want.norm().max(1e-300);
        worst = worst.max(rel);
        // P tracks the inverse of the accumulated system matrix
        let ident = &learner.p * &a;
        let off = (ident - DMatrix::<f64>::identity(dim, dim)).norm();
        assert!(off < 1e-6, "P·A deviates from I by {off}");
    }
    assert!(worst < 1e-6, "worst relative gap {worst}");
}

#[test]
fn singular_step_changes_nothing() {
    let hyper = Hyperparams {
        lambda: 0.0,
        beta: 1.0,
        ..Hyperparams::default()
    };
    // φ = e1, γ = 0.5, φ' chosen so that 1 + dᵀ P z = 0
    let mut l = LearnerState::new(2, hyper, 0.5).unwrap();
    let phi = DVector::from_vec(vec![1.0, 0.0]);
    let next = DVector::from_vec(vec![4.0, 0.0]);
    let before = l.clone();
    let err = rls_step(&mut l, &phi, &next, 10.0).unwrap_err();
    assert!(matches!(err, Error::SingularUpdate { .. }));
    assert_eq!(l, before);
}

#[test]
fn shape_mismatch_is_reported() {
    let mut l = LearnerState::new(3, Hyperparams::default(), 0.9).unwrap();
    let r = rls_step(&mut l, &feature_vector(&[1, 2]), &feature_vector(&[1, 2, 3]), 0.0);
    assert!(matches!(r, Err(Error::ShapeMismatch { .. })));
}

#[test]
fn bad_hyperparameters_are_rejected() {
    for h in [
        Hyperparams { lambda: 1.5, ..Hyperparams::default() },
        Hyperparams { beta: 0.0, ..Hyperparams::default() },
        Hyperparams { depth: 0, ..Hyperparams::default() },
        Hyperparams { epsilon: -1.0, ..Hyperparams::default() },
    ] {
        assert!(LearnerState::new(4, h, 0.9).is_err(), "{h:?}");
    }
}

/// Weeks of decisions on the shared arrival stream.
fn drive(model: &Model, policy: &mut AdpPolicy, seed: u64, weeks: std::ops::Range<u64>, start: admission_core::model::State) -> (Vec<admission_core::model::Action>, admission_core::model::State) {
    let mut state = start;
    let mut out = Vec::new();
    for w in weeks {
        let a = policy.decide(model, &state, w).unwrap().action;
        state = model.successor(&state, &a, &sample_arrivals(model, seed, w)).unwrap();
        out.push(a);
    }
    (out, state)
}

#[test]
fn checkpoint_resume_is_bit_identical() {
    let m = Model::new(cabg()).unwrap();
    let hyper = Hyperparams {
        depth: 60,
        max_trajectories: 8,
        ..Hyperparams::default()
    };
    let seed = 42;
    let mut straight = AdpPolicy::new(&m, hyper, seed).unwrap();
    let (all, end) = drive(&m, &mut straight, seed, 0..6, m.zero_state());

    let mut first = AdpPolicy::new(&m, hyper, seed).unwrap();
    let (head, mid) = drive(&m, &mut first, seed, 0..3, m.zero_state());
    let bytes = encode_checkpoint(&first.checkpoint());
    let ck = decode_checkpoint(&bytes).unwrap();
    assert_eq!(ck.epoch, 3);
    let mut resumed = AdpPolicy::from_checkpoint(ck);
    let (tail, end2) = drive(&m, &mut resumed, seed, 3..6, mid);

    assert_eq!([head, tail].concat(), all);
    assert_eq!(end, end2);
    assert_eq!(resumed.learner(), straight.learner());
}

#[test]
fn checkpoint_rejects_corruption() {
    let m = Model::new(cabg()).unwrap();
    let p = AdpPolicy::new(&m, Hyperparams::default(), 1).unwrap();
    let bytes = encode_checkpoint(&p.checkpoint());
    assert!(decode_checkpoint(&bytes).is_ok());
    assert!(decode_checkpoint(&bytes[..bytes.len() - 3]).is_err());
    let mut bad = bytes.clone();
    bad[4] = 99;
    assert!(decode_checkpoint(&bad).is_err());
    let mut long = bytes;
    long.extend_from_slice(&[0; 8]);
    assert!(decode_checkpoint(&long).is_err());
}

#[test]
fn checkpoint_keeps_the_action_source() {
    use admission_core::action_space::ActionSource;
    let m = Model::new(cabg()).unwrap();
    for source in [ActionSource::Full, ActionSource::Reduced] {
        let hyper = Hyperparams {
            source,
            ..Hyperparams::default()
        };
        let p = AdpPolicy::new(&m, hyper, 1).unwrap();
        let ck = decode_checkpoint(&encode_checkpoint(&p.checkpoint())).unwrap();
        assert_eq!(ck, p.checkpoint());
        assert_eq!(AdpPolicy::from_checkpoint(ck).learner().hyper.source, source);
    }
}
