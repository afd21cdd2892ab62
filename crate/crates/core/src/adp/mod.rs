//! Approximate dynamic programming with a linear value function
//! `V̂(s) = Φ(s)ᵀ Θ`, `φ_ξ(s) = n_ξ`, learned on-policy by recursive
//! least-squares TD(λ).

mod checkpoint;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::action_space::{self, argmin_product, assemble, ActionSource, SpecialtyOptions};
use crate::error::{Error, Result};
use crate::model::{Action, ArrivalVector, Model, State};

pub use checkpoint::{decode_checkpoint, encode_checkpoint, Checkpoint};

pub type FeatureVector = DVector<f64>;

/// Smallest `|1 + dᵀ P z|` accepted by an update.
pub const SINGULAR_FLOOR: f64 = 1e-12;
/// Guard for zero components in the relative-change stopping test.
pub const RELATIVE_GUARD: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Trace decay `λ ∈ [0, 1]`.
    pub lambda: f64,
    /// Initial variance scale, `P_0 = β I`.
    pub beta: f64,
    /// Trajectory depth `N`.
    pub depth: u32,
    /// Relative-change threshold that ends a week's learning.
    pub epsilon: f64,
    /// Trajectory cap per decision.
    pub max_trajectories: u32,
    /// Action set searched on every step.
    #[serde(default)]
    pub source: ActionSource,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            beta: 1.0,
            depth: 1000,
            epsilon: 1e-3,
            max_trajectories: 200,
            source: ActionSource::Reduced,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(0.0..=1.0).contains(&self.lambda) {
            bad.push(format!("lambda must lie in [0, 1], got {}", self.lambda));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            bad.push(format!("beta must be > 0, got {}", self.beta));
        }
        if self.depth == 0 {
            bad.push("trajectory depth must be >= 1".into());
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            bad.push(format!("epsilon must be > 0, got {}", self.epsilon));
        }
        if self.max_trajectories == 0 {
            bad.push("max_trajectories must be >= 1".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(bad))
        }
    }
}

/// `Θ`, `z`, `P` and the hyperparameters. Single writer: one decision
/// sequence owns it.
#[derive(Clone, Debug, PartialEq)]
pub struct LearnerState {
    pub theta: DVector<f64>,
    pub z: DVector<f64>,
    pub p: DMatrix<f64>,
    pub hyper: Hyperparams,
    pub gamma: f64,
    /// Total updates applied, for diagnostics.
    pub steps: u64,
}

impl LearnerState {
    pub fn new(dim: usize, hyper: Hyperparams, gamma: f64) -> Result<Self> {
        hyper.validate()?;
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::Domain(format!("discount must lie in [0, 1), got {gamma}")));
        }
        Ok(Self {
            theta: DVector::zeros(dim),
            z: DVector::zeros(dim),
            p: DMatrix::identity(dim, dim) * hyper.beta,
            hyper,
            gamma,
            steps: 0,
        })
    }

    pub fn for_model(model: &Model, hyper: Hyperparams) -> Result<Self> {
        Self::new(model.type_count(), hyper, model.discount())
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// Back to `Θ = 0`, `z = 0`, `P = βI`.
    pub fn reset(&mut self) {
        self.theta.fill(0.0);
        self.z.fill(0.0);
        self.reset_variance();
    }

    pub fn reset_variance(&mut self) {
        self.p.fill(0.0);
        self.p.fill_diagonal(self.hyper.beta);
    }
}

/// `Φ(s)`: the counts as reals, in canonical order.
pub fn feature_vector(state: &[u32]) -> FeatureVector {
    DVector::from_iterator(state.len(), state.iter().map(|&n| f64::from(n)))
}

/// `V̂ = Φᵀ Θ`.
pub fn approx_value(phi: &[f64], theta: &DVector<f64>) -> Result<f64> {
    if phi.len() != theta.len() {
        return Err(Error::ShapeMismatch {
            expected: theta.len(),
            got: phi.len(),
        });
    }
    Ok(phi.iter().zip(theta.iter()).map(|(a, b)| a * b).sum())
}

/// Outcome of one update, for diagnostics and tests.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepInfo {
    pub td_error: f64,
    pub denominator: f64,
}

/// One RLS-TD(λ) update from the transition `s_n → s_{n+1}` with cost `C`.
/// On a singular denominator nothing is modified.
pub fn rls_step(
    learner: &mut LearnerState,
    phi_n: &DVector<f64>,
    phi_next: &DVector<f64>,
    cost: f64,
) -> Result<StepInfo> {
    let dim = learner.dim();
    for v in [phi_n, phi_next] {
        if v.len() != dim {
            return Err(Error::ShapeMismatch {
                expected: dim,
                got: v.len(),
            });
        }
    }
    let gamma = learner.gamma;
    let d = phi_n - phi_next * gamma;
    let e = cost - d.dot(&learner.theta);
    let z = &learner.z * (gamma * learner.hyper.lambda) + phi_n;
    let pz = &learner.p * &z;
    let q = 1.0 + d.dot(&pz);
    if !(q.abs() >= SINGULAR_FLOOR) {
        return Err(Error::SingularUpdate {
            trajectory: 0,
            step: 0,
            denominator: q,
        });
    }
    let ptd = learner.p.tr_mul(&d);
    learner.p.ger(-1.0 / q, &pz, &ptd, 1.0);
    learner.theta.axpy(e / q, &pz, 1.0);
    learner.z = z;
    learner.steps += 1;
    Ok(StepInfo {
        td_error: e,
        denominator: q,
    })
}

#[derive(Default)]
struct Scratch {
    specs: Vec<SpecialtyOptions>,
    /// `Σ_ty (n - m) θ_{ty+1}` per option, per specialty.
    aged: Vec<Vec<f64>>,
    psi: Vec<u32>,
    best_psi: Vec<u32>,
}

impl Scratch {
    fn prepare(
        &mut self,
        model: &Model,
        state: &[u32],
        theta: &DVector<f64>,
        source: ActionSource,
    ) {
        let jn = model.specialty_count();
        self.specs.resize_with(jn, SpecialtyOptions::default);
        self.aged.resize_with(jn, Vec::new);
        for j in 0..jn {
            let opts = &mut self.specs[j];
            opts.fill(model, state, j, source);
            let range = model.specialty_types(j);
            let aged = &mut self.aged[j];
            aged.clear();
            for i in 0..opts.len() {
                let sub = opts.counts(i);
                aged.push(
                    range
                        .clone()
                        .zip(sub)
                        .filter(|&(ty, _)| !model.is_due(ty))
                        .map(|(ty, &m)| f64::from(state[ty] - m) * theta[ty + 1])
                        .sum(),
                );
            }
        }
        self.psi.resize(model.groups().len(), 0);
        self.best_psi.resize(model.groups().len(), 0);
    }
}

/// Counts of actions evaluated (`‖A*‖`) and feasible (`‖A‖`) over the
/// states a decision touched.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ActionCounts {
    pub evaluated: f64,
    pub feasible: f64,
}

impl ActionCounts {
    fn add(&mut self, model: &Model, state: &State, source: ActionSource) {
        let st = action_space::action_set_stats(model, state);
        self.evaluated += match source {
            ActionSource::Full => st.full_count as f64,
            ActionSource::Reduced => st.reduced_count as f64,
        };
        self.feasible += st.full_count as f64;
    }
}

fn select_with(
    model: &Model,
    state: &[u32],
    theta: &DVector<f64>,
    source: ActionSource,
    scratch: &mut Scratch,
    rng: &mut dyn rand::RngCore,
) -> (Action, ArrivalVector) {
    scratch.prepare(model, state, theta, source);
    let gamma = model.discount();
    let groups = model.groups();
    let aged = &scratch.aged;
    let psi = &mut scratch.psi;
    let best_psi = &mut scratch.best_psi;
    let mut best = f64::INFINITY;
    let (idx, _) = argmin_product(model, &scratch.specs, |idx, sep| {
        let mut v: f64 = idx.iter().zip(aged).map(|(&i, a)| a[i]).sum();
        for (k, g) in groups.iter().enumerate() {
            psi[k] = model.sample_group(g, rng);
            v += f64::from(psi[k]) * theta[g.offset];
        }
        let score = sep + gamma * v;
        if score < best {
            best = score;
            best_psi.copy_from_slice(psi);
        }
        score
    });
    (
        assemble(&scratch.specs, &idx),
        ArrivalVector(scratch.best_psi.clone()),
    )
}

/// On-policy action for a simulated step: every `a ∈ A*(s)` gets its own
/// arrival draw `Ψ^a` (drawn in canonical action order), and the action
/// minimizing `C(s, a) + γ Φ(G + Ψ^a)ᵀ Θ` is returned with its draw.
pub fn select_sim_action<R: Rng>(
    model: &Model,
    state: &State,
    theta: &DVector<f64>,
    rng: &mut R,
) -> Result<(Action, ArrivalVector)> {
    if state.len() != model.type_count() || theta.len() != model.type_count() {
        return Err(Error::ShapeMismatch {
            expected: model.type_count(),
            got: if state.len() != model.type_count() {
                state.len()
            } else {
                theta.len()
            },
        });
    }
    Ok(select_with(
        model,
        state,
        theta,
        ActionSource::Reduced,
        &mut Scratch::default(),
        rng,
    ))
}

/// `argmin_{a ∈ A*(s)} C(s, a) + γ Φ(G + Ψ̄)ᵀ Θ` with `Ψ̄` the expected
/// arrivals.
pub fn greedy_action(model: &Model, state: &State, theta: &DVector<f64>) -> Action {
    greedy_with(model, state, theta, ActionSource::Reduced)
}

fn greedy_with(model: &Model, state: &State, theta: &DVector<f64>, source: ActionSource) -> Action {
    let mut scratch = Scratch::default();
    scratch.prepare(model, state, theta, source);
    let gamma = model.discount();
    let aged = &scratch.aged;
    let (idx, _) = argmin_product(model, &scratch.specs, |idx, sep| {
        // the Ψ̄ term is the same for every action and does not move the argmin
        let v: f64 = idx.iter().zip(aged).map(|(&i, a)| a[i]).sum();
        sep + gamma * v
    });
    assemble(&scratch.specs, &idx)
}

/// What one trajectory did.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectoryReport {
    pub steps: u32,
    pub counts: ActionCounts,
}

fn trajectory_with<R: Rng>(
    model: &Model,
    learner: &mut LearnerState,
    start: &State,
    rng: &mut R,
    trajectory: usize,
    scratch: &mut Scratch,
) -> Result<TrajectoryReport> {
    let mut report = TrajectoryReport::default();
    let mut s = start.clone();
    let mut phi = feature_vector(&s);
    for n in 0..learner.hyper.depth {
        let source = learner.hyper.source;
        let (a, psi) = select_with(model, &s, &learner.theta, source, scratch, rng);
        report.counts.add(model, &s, source);
        let cost = model.stage_cost_unchecked(&s, &a).total;
        let next = model.successor(&s, &a, &psi)?;
        let phi_next = feature_vector(&next);
        rls_step(learner, &phi, &phi_next, cost).map_err(|e| match e {
            Error::SingularUpdate { denominator, .. } => Error::SingularUpdate {
                trajectory,
                step: n as usize,
                denominator,
            },
            other => other,
        })?;
        report.steps += 1;
        s = next;
        phi = phi_next;
    }
    Ok(report)
}

/// `N` on-policy steps from `start`, threading the learner through.
pub fn run_trajectory<R: Rng>(
    model: &Model,
    learner: &mut LearnerState,
    start: &State,
    rng: &mut R,
) -> Result<TrajectoryReport> {
    if learner.dim() != model.type_count() {
        return Err(Error::ShapeMismatch {
            expected: model.type_count(),
            got: learner.dim(),
        });
    }
    trajectory_with(model, learner, start, rng, 0, &mut Scratch::default())
}

/// Relative change `‖(Θ - Θ_0) / max(|Θ_0|, δ)‖₂`.
pub fn relative_change(theta: &DVector<f64>, theta0: &DVector<f64>) -> f64 {
    theta
        .iter()
        .zip(theta0.iter())
        .map(|(t, t0)| ((t - t0) / t0.abs().max(RELATIVE_GUARD)).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdpDecision {
    pub action: Action,
    pub trajectories: u32,
    /// False when the trajectory cap ended learning.
    pub converged: bool,
    pub last_change: f64,
    /// Trajectories abandoned on a singular update (each resets `P = βI`).
    pub singular_resets: u32,
    pub counts: ActionCounts,
}

/// One week's decision: trajectories from `s_τ` until the relative change of
/// `Θ` over a trajectory drops below `ε` or the cap is hit, then the greedy
/// action against expected arrivals. `z`, `P`, `Θ` stay in the learner.
pub fn adp_decide<R: Rng>(
    model: &Model,
    learner: &mut LearnerState,
    state: &State,
    rng: &mut R,
) -> Result<AdpDecision> {
    if learner.dim() != model.type_count() {
        return Err(Error::ShapeMismatch {
            expected: model.type_count(),
            got: learner.dim(),
        });
    }
    if state.len() != model.type_count() {
        return Err(Error::ShapeMismatch {
            expected: model.type_count(),
            got: state.len(),
        });
    }
    let mut scratch = Scratch::default();
    let mut counts = ActionCounts::default();
    let mut trajectories = 0;
    let mut singular_resets = 0;
    let mut converged = false;
    let mut last_change = f64::INFINITY;
    while trajectories < learner.hyper.max_trajectories {
        let theta0 = learner.theta.clone();
        let t = trajectories as usize;
        trajectories += 1;
        match trajectory_with(model, learner, state, rng, t, &mut scratch) {
            Ok(r) => {
                counts.evaluated += r.counts.evaluated;
                counts.feasible += r.counts.feasible;
            }
            Err(Error::SingularUpdate { .. }) => {
                singular_resets += 1;
                learner.reset_variance();
                continue;
            }
            Err(e) => return Err(e),
        }
        last_change = relative_change(&learner.theta, &theta0);
        if last_change < learner.hyper.epsilon {
            converged = true;
            break;
        }
    }
    counts.add(model, state, learner.hyper.source);
    let action = greedy_with(model, state, &learner.theta, learner.hyper.source);
    Ok(AdpDecision {
        action,
        trajectories,
        converged,
        last_change,
        singular_resets,
        counts,
    })
}
