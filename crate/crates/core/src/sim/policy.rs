use crate::action_space::{self, ActionSource};
use crate::adp::{adp_decide, Checkpoint, Hyperparams, LearnerState};
use crate::error::{Error, Result};
use crate::exact::{myopic_action, ActionTotals, PolicyTable};
use crate::model::{Action, Model, State};
use crate::rng::{self, Purpose};

/// A weekly decision with the action counts it looked at.
#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub action: Action,
    /// Actions evaluated (`‖A*‖` contribution).
    pub evaluated: f64,
    /// Feasible actions of the same states (`‖A‖` contribution).
    pub feasible: f64,
}

pub trait Policy {
    fn name(&self) -> &str;

    /// Action for `state` in week `week` (0-based).
    fn decide(&mut self, model: &Model, state: &State, week: u64) -> Result<Decision>;

    /// Action counts of an offline solve, reported instead of the per-week
    /// counts when present.
    fn offline_action_totals(&self) -> Option<ActionTotals> {
        None
    }
}

/// `argmin_{a ∈ A*(s)} C(s, a)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct MyopicPolicy;

impl Policy for MyopicPolicy {
    fn name(&self) -> &str {
        "myopic"
    }

    fn decide(&mut self, model: &Model, state: &State, _week: u64) -> Result<Decision> {
        let st = action_space::action_set_stats(model, state);
        Ok(Decision {
            action: myopic_action(model, state),
            evaluated: st.reduced_count as f64,
            feasible: st.full_count as f64,
        })
    }
}

/// Lookup in a solved policy table.
#[derive(Clone, Debug)]
pub struct TablePolicy {
    name: String,
    table: PolicyTable,
    source: ActionSource,
    sweep: Option<ActionTotals>,
}

impl TablePolicy {
    pub fn new(name: impl Into<String>, table: PolicyTable, source: ActionSource) -> Self {
        Self {
            name: name.into(),
            table,
            source,
            sweep: None,
        }
    }

    pub fn with_sweep_totals(mut self, totals: ActionTotals) -> Self {
        self.sweep = Some(totals);
        self
    }
}

impl Policy for TablePolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn decide(&mut self, model: &Model, state: &State, _week: u64) -> Result<Decision> {
        let action = self.table.action(state).ok_or_else(|| {
            Error::Internal(format!("state {state} lies outside the policy table"))
        })?;
        let st = action_space::action_set_stats(model, state);
        let evaluated = match self.source {
            ActionSource::Full => st.full_count,
            ActionSource::Reduced => st.reduced_count,
        };
        Ok(Decision {
            action,
            evaluated: evaluated as f64,
            feasible: st.full_count as f64,
        })
    }

    fn offline_action_totals(&self) -> Option<ActionTotals> {
        self.sweep
    }
}

/// RLS-TD(λ) learner driven week by week. Week `τ` draws from the
/// `(seed, adp, τ)` stream, so a checkpoint plus the next week index is
/// enough to resume bit-identically.
#[derive(Clone, Debug)]
pub struct AdpPolicy {
    learner: LearnerState,
    seed: u64,
    next_week: u64,
    pub trajectories: u64,
    pub unconverged_weeks: u64,
}

impl AdpPolicy {
    pub fn new(model: &Model, hyper: Hyperparams, seed: u64) -> Result<Self> {
        Ok(Self {
            learner: LearnerState::for_model(model, hyper)?,
            seed,
            next_week: 0,
            trajectories: 0,
            unconverged_weeks: 0,
        })
    }

    pub fn learner(&self) -> &LearnerState {
        &self.learner
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            learner: self.learner.clone(),
            rng_seed: self.seed,
            epoch: self.next_week,
        }
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Self {
        Self {
            learner: ck.learner,
            seed: ck.rng_seed,
            next_week: ck.epoch,
            trajectories: 0,
            unconverged_weeks: 0,
        }
    }
}

impl Policy for AdpPolicy {
    fn name(&self) -> &str {
        "adp"
    }

    fn decide(&mut self, model: &Model, state: &State, week: u64) -> Result<Decision> {
        let mut rng = rng::stream(self.seed, Purpose::Adp, week);
        let d = adp_decide(model, &mut self.learner, state, &mut rng)?;
        self.next_week = week + 1;
        self.trajectories += u64::from(d.trajectories);
        if !d.converged {
            self.unconverged_weeks += 1;
        }
        Ok(Decision {
            action: d.action,
            evaluated: d.counts.evaluated,
            feasible: d.counts.feasible,
        })
    }
}
