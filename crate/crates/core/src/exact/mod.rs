//! Exact solvers over the enumerated (truncated) state space: synchronous
//! value iteration and the myopic single-week policy.

mod codec;

use rayon::prelude::*;

use crate::action_space::{self, argmin_product, assemble, ActionSource, SpecialtyOptions};
use crate::error::{Error, Result};
use crate::model::{Action, Model, State};

pub use codec::{decode_table, encode_table, DecodedTable};

/// Default refusal bound on the number of enumerated states.
pub const DEFAULT_MAX_STATES: u64 = 50_000_000;

/// Mixed-radix layout of the enumerated state space. Each type's count ranges
/// over `0..=cap` of its group; the last type is the least significant digit,
/// so index order is lexicographic order of states.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateSpace {
    radix: Vec<u32>,
    stride: Vec<usize>,
    due: Vec<bool>,
    size: usize,
}

/// `log10 |S|` without building anything; finite even for astronomically
/// large instances.
pub fn state_space_log10(model: &Model) -> f64 {
    model
        .groups()
        .iter()
        .map(|g| f64::from(g.max_wait) * (f64::from(g.cap) + 1.0).log10())
        .sum()
}

/// `10^log10` as `m.mmeX`.
pub fn scientific(log10: f64) -> String {
    let exp = log10.floor();
    let mut mant = 10f64.powf(log10 - exp);
    let mut exp = exp as i64;
    if (mant * 100.0).round() >= 1000.0 {
        mant /= 10.0;
        exp += 1;
    }
    format!("{mant:.2}e{exp}")
}

impl StateSpace {
    pub fn new(model: &Model, max_states: u64) -> Result<Self> {
        let radix: Vec<u32> = model
            .types()
            .iter()
            .map(|t| model.groups()[t.group].cap.saturating_add(1))
            .collect();
        let due = (0..model.type_count()).map(|ty| model.is_due(ty)).collect();
        Self::from_parts(radix, due, max_states)
    }

    pub(crate) fn from_parts(radix: Vec<u32>, due: Vec<bool>, max_states: u64) -> Result<Self> {
        if radix.iter().any(|&r| r == 0 || r > u32::from(u16::MAX)) {
            return Err(Error::GuardRefusal(
                "arrival caps must lie below 65535 for enumeration".into(),
            ));
        }
        let mut size: u64 = 1;
        for &r in &radix {
            size = size.saturating_mul(u64::from(r));
        }
        if size > max_states {
            let log10: f64 = radix.iter().map(|&r| f64::from(r).log10()).sum();
            return Err(Error::GuardRefusal(format!(
                "state space of {} states exceeds the enumeration limit of {max_states}",
                scientific(log10)
            )));
        }
        let size = usize::try_from(size)
            .map_err(|_| Error::GuardRefusal("state space does not fit in memory".into()))?;
        let mut stride = vec![1usize; radix.len()];
        for t in (0..radix.len().saturating_sub(1)).rev() {
            stride[t] = stride[t + 1] * radix[t + 1] as usize;
        }
        Ok(Self {
            radix,
            stride,
            due,
            size,
        })
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn radix(&self) -> &[u32] {
        &self.radix
    }

    pub fn due(&self) -> &[bool] {
        &self.due
    }

    pub fn index(&self, state: &[u32]) -> Option<usize> {
        if state.len() != self.radix.len() {
            return None;
        }
        let mut idx = 0;
        for ((&n, &r), &s) in state.iter().zip(&self.radix).zip(&self.stride) {
            if n >= r {
                return None;
            }
            idx += n as usize * s;
        }
        Some(idx)
    }

    pub fn decode_into(&self, mut idx: usize, out: &mut [u32]) {
        for t in (0..self.radix.len()).rev() {
            let r = self.radix[t] as usize;
            out[t] = (idx % r) as u32;
            idx /= r;
        }
    }

    pub fn state(&self, idx: usize) -> State {
        let mut out = vec![0; self.radix.len()];
        self.decode_into(idx, &mut out);
        State(out)
    }

    /// Advances `counts` to the next state in index order.
    pub(crate) fn increment(&self, counts: &mut [u32]) {
        for t in (0..counts.len()).rev() {
            counts[t] += 1;
            if counts[t] < self.radix[t] {
                return;
            }
            counts[t] = 0;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = State> + '_ {
        (0..self.size).map(|i| self.state(i))
    }
}

/// Every state with `0 ≤ n_juw ≤ cap_ju`, in index order.
pub fn enumerate_state_space(model: &Model, max_states: u64) -> Result<Vec<State>> {
    let space = StateSpace::new(model, max_states)?;
    Ok(space.iter().collect())
}

/// Converged (or capped) value estimates over the enumerated space.
#[derive(Clone, Debug)]
pub struct ValueTable {
    pub(crate) space: StateSpace,
    pub(crate) values: Vec<f64>,
    pub iterations: u64,
    pub residual: f64,
    pub discount: f64,
    pub converged: bool,
}

impl ValueTable {
    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, state: &State) -> Option<f64> {
        self.space.index(state).map(|i| self.values[i])
    }

    /// Whether the table was built over this model's layout.
    pub fn matches(&self, model: &Model) -> bool {
        StateSpace::new(model, u64::MAX).is_ok_and(|s| s == self.space)
            && self.discount == model.discount()
    }

    /// Largest absolute difference to another table over the same space.
    pub fn sup_distance(&self, other: &ValueTable) -> Option<f64> {
        (self.space == other.space).then(|| {
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
    }
}

/// Greedy actions, stored as flat counts per state.
#[derive(Clone, Debug)]
pub struct PolicyTable {
    pub(crate) space: StateSpace,
    pub(crate) actions: Vec<u16>,
}

impl PolicyTable {
    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn action(&self, state: &State) -> Option<Action> {
        let i = self.space.index(state)?;
        let w = self.space.radix.len();
        Some(Action(
            self.actions[i * w..(i + 1) * w]
                .iter()
                .map(|&m| u32::from(m))
                .collect(),
        ))
    }
}

#[derive(Clone, Debug)]
pub struct ViOptions {
    pub source: ActionSource,
    /// Absolute sup-norm change below which sweeps stop. Defaults to
    /// `1e-6 / (1 - γ)`.
    pub stop_residual: Option<f64>,
    pub max_iterations: u64,
    pub max_states: u64,
}

impl Default for ViOptions {
    fn default() -> Self {
        Self {
            source: ActionSource::Reduced,
            stop_residual: None,
            max_iterations: 100_000,
            max_states: DEFAULT_MAX_STATES,
        }
    }
}

impl ViOptions {
    pub fn with_source(source: ActionSource) -> Self {
        Self {
            source,
            ..Self::default()
        }
    }
}

/// Precomputed layout for cached backups: post-decision states exclude the
/// `w = 1` rows, which are always empty after aging.
struct Kernel<'a> {
    model: &'a Model,
    space: &'a StateSpace,
    source: ActionSource,
    /// Post-index weight of the unscheduled count of each type (0 when due).
    age_stride: Vec<usize>,
    post_to_state: Vec<usize>,
    /// `(state-index offset, probability)` of every arrival vector.
    arrivals: Vec<(usize, f64)>,
}

impl<'a> Kernel<'a> {
    fn new(model: &'a Model, space: &'a StateSpace, source: ActionSource) -> Self {
        let types = model.types();
        let xi = types.len();
        let aged: Vec<usize> = (0..xi).filter(|&t| types[t].wait >= 2).collect();
        let mut pstride = vec![0usize; xi];
        let mut post_size = 1usize;
        for &t in aged.iter().rev() {
            pstride[t] = post_size;
            post_size *= space.radix[t] as usize;
        }
        let age_stride = (0..xi)
            .map(|t| if model.is_due(t) { 0 } else { pstride[t + 1] })
            .collect();
        let mut post_to_state = vec![0usize; post_size];
        let mut digits = vec![0u32; aged.len()];
        for slot in post_to_state.iter_mut() {
            *slot = aged
                .iter()
                .zip(&digits)
                .map(|(&t, &d)| d as usize * space.stride[t])
                .sum();
            for k in (0..digits.len()).rev() {
                digits[k] += 1;
                if digits[k] < space.radix[aged[k]] {
                    break;
                }
                digits[k] = 0;
            }
        }
        let mut arrivals = vec![(0usize, 1.0f64)];
        for g in model.groups() {
            let stride = space.stride[g.offset];
            arrivals = arrivals
                .into_iter()
                .flat_map(|(off, p)| {
                    g.pmf
                        .iter()
                        .enumerate()
                        .map(move |(k, q)| (off + k * stride, p * q))
                })
                .collect();
        }
        Self {
            model,
            space,
            source,
            age_stride,
            post_to_state,
            arrivals,
        }
    }

    /// `W[p] = Σ_Ψ P(Ψ) V(G_p + Ψ)` for every post-decision state.
    fn expectations(&self, values: &[f64]) -> Vec<f64> {
        self.post_to_state
            .par_iter()
            .map(|&base| {
                self.arrivals
                    .iter()
                    .map(|&(off, p)| p * values[base + off])
                    .sum()
            })
            .collect()
    }

    /// Minimum Q over the action set; writes the argmin into `action_out`
    /// when given.
    fn backup(
        &self,
        state: &[u32],
        expect: &[f64],
        scratch: &mut Scratch,
        action_out: Option<&mut [u16]>,
    ) -> f64 {
        let model = self.model;
        let gamma = model.discount();
        let j_count = model.specialty_count();
        scratch.specs.resize_with(j_count, SpecialtyOptions::default);
        scratch.post.resize_with(j_count, Vec::new);
        for j in 0..j_count {
            let opts = &mut scratch.specs[j];
            opts.fill(model, state, j, self.source);
            let range = model.specialty_types(j);
            let post = &mut scratch.post[j];
            post.clear();
            for i in 0..opts.len() {
                let sub = opts.counts(i);
                post.push(
                    range
                        .clone()
                        .zip(sub)
                        .map(|(ty, &m)| (state[ty] - m) as usize * self.age_stride[ty])
                        .sum(),
                );
            }
        }
        let posts = &scratch.post;
        let (idx, best) = argmin_product(model, &scratch.specs, |idx, sep| {
            let p: usize = idx.iter().zip(posts).map(|(&i, v)| v[i]).sum();
            sep + gamma * expect[p]
        });
        if let Some(out) = action_out {
            let mut k = 0;
            for (opts, &i) in scratch.specs.iter().zip(&idx) {
                for &m in opts.counts(i) {
                    out[k] = m as u16;
                    k += 1;
                }
            }
        }
        model.config().costs.waiting_per_priority * model.priority_mass(state) + best
    }

    fn sweep(&self, values: &[f64], next: &mut [f64], policy: Option<&mut [u16]>) {
        let expect = self.expectations(values);
        let xi = self.space.radix.len();
        const CHUNK: usize = 1024;
        let run = |(c, (vals, acts)): (usize, (&mut [f64], Option<&mut [u16]>))| {
            let mut scratch = Scratch::default();
            let mut counts = vec![0u32; xi];
            self.space.decode_into(c * CHUNK, &mut counts);
            let mut acts = acts;
            for (k, v) in vals.iter_mut().enumerate() {
                let out = acts.as_deref_mut().map(|a| &mut a[k * xi..(k + 1) * xi]);
                *v = self.backup(&counts, &expect, &mut scratch, out);
                self.space.increment(&mut counts);
            }
        };
        match policy {
            Some(p) => next
                .par_chunks_mut(CHUNK)
                .zip(p.par_chunks_mut(CHUNK * xi))
                .enumerate()
                .map(|(c, (v, a))| (c, (v, Some(a))))
                .for_each(run),
            None => next
                .par_chunks_mut(CHUNK)
                .enumerate()
                .map(|(c, v)| (c, (v, None)))
                .for_each(run),
        }
    }
}

#[derive(Default)]
struct Scratch {
    specs: Vec<SpecialtyOptions>,
    post: Vec<Vec<usize>>,
}

/// Synchronous value iteration from `V = 0` until the sup-norm change of a
/// sweep drops below the stop residual (or the iteration cap), followed by
/// one greedy pass for the policy.
pub fn value_iteration(model: &Model, opts: &ViOptions) -> Result<(ValueTable, PolicyTable)> {
    let space = StateSpace::new(model, opts.max_states)?;
    let gamma = model.discount();
    let stop = opts
        .stop_residual
        .unwrap_or(1e-6 / (1.0 - gamma))
        .max(0.0);
    let kernel = Kernel::new(model, &space, opts.source);
    let mut values = vec![0.0; space.len()];
    let mut next = vec![0.0; space.len()];
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while iterations < opts.max_iterations {
        kernel.sweep(&values, &mut next, None);
        iterations += 1;
        residual = values
            .par_iter()
            .zip(next.par_iter())
            .map(|(a, b)| (a - b).abs())
            .reduce(|| 0.0, f64::max);
        std::mem::swap(&mut values, &mut next);
        if residual < stop {
            break;
        }
    }
    let mut actions = vec![0u16; space.len() * model.type_count()];
    kernel.sweep(&values, &mut next, Some(&mut actions));
    let table = ValueTable {
        space: space.clone(),
        values,
        iterations,
        residual,
        discount: gamma,
        converged: residual < stop,
    };
    Ok((table, PolicyTable { space, actions }))
}

/// Action-set sizes summed over every state a sweep visits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ActionTotals {
    pub evaluated: u128,
    pub feasible: u128,
}

impl ActionTotals {
    pub fn ratio(&self) -> f64 {
        if self.feasible == 0 {
            1.0
        } else {
            self.evaluated as f64 / self.feasible as f64
        }
    }
}

/// `‖A*‖` and `‖A‖` of one value-iteration sweep over `space`.
pub fn sweep_action_totals(model: &Model, space: &StateSpace, source: ActionSource) -> ActionTotals {
    const CHUNK: usize = 4096;
    let chunks = space.len().div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut counts = vec![0u32; space.radix.len()];
            space.decode_into(c * CHUNK, &mut counts);
            let mut t = ActionTotals::default();
            for _ in c * CHUNK..((c + 1) * CHUNK).min(space.len()) {
                let st = action_space::action_set_stats(model, &State(counts.clone()));
                t.feasible += st.full_count;
                t.evaluated += match source {
                    ActionSource::Full => st.full_count,
                    ActionSource::Reduced => st.reduced_count as u128,
                };
                space.increment(&mut counts);
            }
            t
        })
        .reduce(ActionTotals::default, |a, b| ActionTotals {
            evaluated: a.evaluated + b.evaluated,
            feasible: a.feasible + b.feasible,
        })
}

/// Expected next-week value `Σ_Ψ P(Ψ) V(G + Ψ)` by direct enumeration of
/// the arrival vectors.
pub fn expected_next_value(
    model: &Model,
    table: &ValueTable,
    state: &State,
    action: &Action,
) -> Result<f64> {
    let post = model.post_action_state(state, action)?;
    let groups = model.groups();
    let mut k = vec![0u32; groups.len()];
    let mut total = 0.0;
    loop {
        let mut next = post.clone();
        let mut p = 1.0;
        for (g, &c) in groups.iter().zip(&k) {
            next.0[g.offset] += c;
            p *= g.pmf[c as usize];
        }
        let v = table.value(&next).ok_or_else(|| {
            Error::Internal(format!("successor {next} lies outside the value table"))
        })?;
        total += p * v;
        let mut carry = true;
        for d in (0..k.len()).rev() {
            k[d] += 1;
            if k[d] <= groups[d].cap {
                carry = false;
                break;
            }
            k[d] = 0;
        }
        if carry {
            return Ok(total);
        }
    }
}

/// `Q(s, a) = C(s, a) + γ Σ p(s, a, s') V(s')`.
pub fn q_value(model: &Model, table: &ValueTable, state: &State, action: &Action) -> Result<f64> {
    let c = model.stage_cost(state, action)?.total;
    Ok(c + model.discount() * expected_next_value(model, table, state, action)?)
}

/// One Bellman backup over the chosen action set, evaluated by brute force.
/// Ties go to the lexicographically smallest action.
pub fn bellman_backup(
    model: &Model,
    table: &ValueTable,
    state: &State,
    source: ActionSource,
) -> Result<(Action, f64)> {
    let mut best: Option<(Action, f64)> = None;
    for a in action_space::actions(model, state, source) {
        let q = q_value(model, table, state, &a)?;
        if best.as_ref().is_none_or(|(_, b)| q < *b) {
            best = Some((a, q));
        }
    }
    best.ok_or_else(|| Error::Internal("empty action set".into()))
}

/// `a_0(s) = argmin_{a ∈ A*(s)} C(s, a)`, the single-week optimum.
pub fn myopic_action(model: &Model, state: &State) -> Action {
    let specs: Vec<SpecialtyOptions> = (0..model.specialty_count())
        .map(|j| SpecialtyOptions::build(model, state, j, ActionSource::Reduced))
        .collect();
    let (idx, _) = argmin_product(model, &specs, |_, sep| sep);
    assemble(&specs, &idx)
}

/// Single-week optimal cost `C_0(s)`.
pub fn myopic_cost(model: &Model, state: &State) -> f64 {
    model.stage_cost_unchecked(state, &myopic_action(model, state)).total
}
