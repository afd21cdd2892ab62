//! Feasible action sets: the full set `A(s)` and the structurally reduced set
//! `A*(s)` built from the mandatory schedule plus a greedy priority fill.

use serde::{Deserialize, Serialize};

use crate::model::{Action, Model, State};

/// Which action set a solver searches.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionSource {
    /// Every action satisfying the feasibility rule.
    Full,
    /// The greedy reduced set.
    #[default]
    Reduced,
}

/// Sizes of `A(s)` and `A*(s)` for one state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionSetStats {
    /// `‖A(s)‖`, saturating at `u128::MAX`.
    pub full_count: u128,
    /// `‖A*(s)‖ = Π_j (N_j + 1)`.
    pub reduced_count: u128,
    /// Optional-pool size `N_j` per specialty.
    pub optional_pool: Vec<u32>,
}

impl ActionSetStats {
    pub fn ratio(&self) -> f64 {
        self.reduced_count as f64 / self.full_count as f64
    }
}

/// `‖A(s)‖ = Π_{w < W} (n_juw + 1)`, saturating.
pub fn full_action_count(model: &Model, state: &State) -> u128 {
    state
        .iter()
        .enumerate()
        .filter(|&(ty, _)| !model.is_due(ty))
        .fold(1u128, |acc, (_, &n)| acc.saturating_mul(u128::from(n) + 1))
}

/// Optional-pool size `N_j` of every specialty: patients that are neither due
/// nor forced by the cost inequality.
pub fn optional_pool_sizes(model: &Model, state: &State) -> Vec<u32> {
    (0..model.specialty_count())
        .map(|j| {
            model
                .specialty_types(j)
                .filter(|&ty| !model.is_mandatory(ty))
                .map(|ty| state[ty])
                .sum()
        })
        .collect()
}

pub fn action_set_stats(model: &Model, state: &State) -> ActionSetStats {
    let optional_pool = optional_pool_sizes(model, state);
    let reduced_count = optional_pool
        .iter()
        .fold(1u128, |acc, &n| acc.saturating_mul(u128::from(n) + 1));
    ActionSetStats {
        full_count: full_action_count(model, state),
        reduced_count,
        optional_pool,
    }
}

/// Iterator over `A(s)` in lexicographic order of the count vectors.
pub struct FullActions {
    upper: Vec<u32>,
    free: Vec<bool>,
    current: Vec<u32>,
    done: bool,
}

impl Iterator for FullActions {
    type Item = Action;

    fn next(&mut self) -> Option<Action> {
        if self.done {
            return None;
        }
        let out = Action(self.current.clone());
        // odometer, last type least significant
        self.done = true;
        for ty in (0..self.current.len()).rev() {
            if !self.free[ty] {
                continue;
            }
            if self.current[ty] < self.upper[ty] {
                self.current[ty] += 1;
                self.done = false;
                break;
            }
            self.current[ty] = 0;
        }
        Some(out)
    }
}

/// Every action satisfying the feasibility rule, each exactly once.
pub fn enumerate_full_actions(model: &Model, state: &State) -> FullActions {
    let free: Vec<bool> = (0..state.len()).map(|ty| !model.is_due(ty)).collect();
    let current = state
        .iter()
        .zip(&free)
        .map(|(&n, &f)| if f { 0 } else { n })
        .collect();
    FullActions {
        upper: state.to_vec(),
        free,
        current,
        done: false,
    }
}

/// The base action: every due patient and every patient whose postponement
/// costs more than the worst-case hospital cost of scheduling them.
pub fn mandatory_schedule(model: &Model, state: &State) -> Action {
    Action(
        state
            .iter()
            .enumerate()
            .map(|(ty, &n)| if model.is_mandatory(ty) { n } else { 0 })
            .collect(),
    )
}

/// Order in which the greedy fill picks optional types of one specialty:
/// highest priority first, ties to the higher urgency, then the longer wait.
///
/// A tied patient with the higher urgency outranks the other from next week
/// on, so it goes first.
pub(crate) fn fill_order(model: &Model, state: &[u32], j: usize) -> Vec<usize> {
    let prio = model.priorities();
    let types = model.types();
    let mut order: Vec<usize> = model
        .specialty_types(j)
        .filter(|&ty| !model.is_mandatory(ty) && state[ty] > 0)
        .collect();
    order.sort_by(|&a, &b| {
        prio[b]
            .total_cmp(&prio[a])
            .then(types[b].urgency.cmp(&types[a].urgency))
            .then(types[b].wait.cmp(&types[a].wait))
            .then(a.cmp(&b))
    });
    order
}

/// `A*(s)`: for every combination of per-specialty counts `M_j ≤ N_j`, the
/// base action plus the `M_j` highest-priority optional patients of each
/// specialty. Sorted lexicographically; size `Π_j (N_j + 1)`.
pub fn reduced_action_set(model: &Model, state: &State) -> Vec<Action> {
    let per_spec: Vec<SpecialtyOptions> = (0..model.specialty_count())
        .map(|j| SpecialtyOptions::reduced(model, state, j))
        .collect();
    let mut out = Vec::new();
    let mut idx = vec![0usize; per_spec.len()];
    loop {
        let mut counts = Vec::with_capacity(model.type_count());
        for (opts, &i) in per_spec.iter().zip(&idx) {
            counts.extend_from_slice(opts.counts(i));
        }
        out.push(Action(counts));
        let mut carry = true;
        for d in (0..idx.len()).rev() {
            idx[d] += 1;
            if idx[d] < per_spec[d].len() {
                carry = false;
                break;
            }
            idx[d] = 0;
        }
        if carry {
            break;
        }
    }
    out
}

/// Actions of the chosen set, materialized.
pub fn actions(model: &Model, state: &State, source: ActionSource) -> Vec<Action> {
    match source {
        ActionSource::Full => enumerate_full_actions(model, state).collect(),
        ActionSource::Reduced => reduced_action_set(model, state),
    }
}

/// The candidate sub-actions of one specialty with the cost terms that only
/// depend on that specialty's share of the action.
#[derive(Clone, Debug, Default)]
pub(crate) struct SpecialtyOptions {
    width: usize,
    counts: Vec<u32>,
    /// `Σ v u w m` over the sub-action.
    pub(crate) prio: Vec<f64>,
    /// Expected overtime cost of the specialty.
    pub(crate) overtime: Vec<f64>,
    /// `Σ m · l̄_j`.
    pub(crate) los: Vec<f64>,
}

impl SpecialtyOptions {
    pub(crate) fn len(&self) -> usize {
        self.prio.len()
    }

    pub(crate) fn counts(&self, i: usize) -> &[u32] {
        &self.counts[i * self.width..(i + 1) * self.width]
    }

    fn push(&mut self, model: &Model, j: usize, sub: &[u32]) {
        let spec = &model.config().specialties[j];
        let range = model.specialty_types(j);
        let prio = &model.priorities()[range];
        let total: u32 = sub.iter().sum();
        self.counts.extend_from_slice(sub);
        self.prio
            .push(sub.iter().zip(prio).map(|(&m, &p)| p * f64::from(m)).sum());
        self.overtime.push(model.overtime_cost(spec, f64::from(total)));
        self.los.push(f64::from(total) * spec.los_mean_days);
    }

    pub(crate) fn build(model: &Model, state: &[u32], j: usize, source: ActionSource) -> Self {
        let mut out = Self::default();
        out.fill(model, state, j, source);
        out
    }

    /// Rebuilds in place, keeping the allocations.
    pub(crate) fn fill(&mut self, model: &Model, state: &[u32], j: usize, source: ActionSource) {
        self.counts.clear();
        self.prio.clear();
        self.overtime.clear();
        self.los.clear();
        self.width = model.specialty_types(j).len();
        match source {
            ActionSource::Full => self.fill_full(model, state, j),
            ActionSource::Reduced => self.fill_reduced(model, state, j),
        }
    }

    pub(crate) fn reduced(model: &Model, state: &[u32], j: usize) -> Self {
        Self::build(model, state, j, ActionSource::Reduced)
    }

    fn fill_full(&mut self, model: &Model, state: &[u32], j: usize) {
        let range = model.specialty_types(j);
        let base = range.start;
        let n = &state[range.clone()];
        let mut cur: Vec<u32> = range
            .clone()
            .map(|ty| if model.is_due(ty) { state[ty] } else { 0 })
            .collect();
        loop {
            self.push(model, j, &cur);
            let mut carry = true;
            for t in (0..cur.len()).rev() {
                if model.is_due(base + t) {
                    continue;
                }
                if cur[t] < n[t] {
                    cur[t] += 1;
                    carry = false;
                    break;
                }
                cur[t] = 0;
            }
            if carry {
                break;
            }
        }
    }

    fn fill_reduced(&mut self, model: &Model, state: &[u32], j: usize) {
        let range = model.specialty_types(j);
        let base = range.start;
        let mut cur: Vec<u32> = range
            .clone()
            .map(|ty| if model.is_mandatory(ty) { state[ty] } else { 0 })
            .collect();
        let mut subs = vec![cur.clone()];
        for ty in fill_order(model, state, j) {
            for _ in 0..state[ty] {
                cur[ty - base] += 1;
                subs.push(cur.clone());
            }
        }
        subs.sort();
        for s in &subs {
            self.push(model, j, s);
        }
    }
}

/// Lexicographic scan over the product of per-specialty options. `leaf`
/// receives the option indices and the separable part of the stage cost
/// (`-(c_d - c_b) P(a) + overtime + shortage`) and returns the full score.
/// The first strict minimum wins, so ties resolve to the smallest action.
pub(crate) fn argmin_product<F>(model: &Model, specs: &[SpecialtyOptions], mut leaf: F) -> (Vec<usize>, f64)
where
    F: FnMut(&[usize], f64) -> f64,
{
    let c = &model.config().costs;
    let gain = c.waiting_per_priority - c.surgery_per_priority;
    let depth = specs.len();
    let mut idx = vec![0usize; depth];
    let mut best_idx = idx.clone();
    let mut best = f64::INFINITY;
    // partial sums of the separable terms above each depth
    let mut lin = vec![0.0; depth + 1];
    let mut los = vec![0.0; depth + 1];
    let mut d = 0;
    loop {
        if d < depth {
            let o = &specs[d];
            let i = idx[d];
            lin[d + 1] = lin[d] - gain * o.prio[i] + o.overtime[i];
            los[d + 1] = los[d] + o.los[i];
            d += 1;
            continue;
        }
        let score = leaf(&idx, lin[depth] + model.shortage_cost(los[depth]));
        if score < best {
            best = score;
            best_idx.copy_from_slice(&idx);
        }
        // advance
        loop {
            if d == 0 {
                return (best_idx, best);
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < specs[d].len() {
                break;
            }
            idx[d] = 0;
        }
    }
}

/// Assembles a full action from option indices.
pub(crate) fn assemble(specs: &[SpecialtyOptions], idx: &[usize]) -> Action {
    let mut out = Vec::new();
    for (o, &i) in specs.iter().zip(idx) {
        out.extend_from_slice(o.counts(i));
    }
    Action(out)
}
