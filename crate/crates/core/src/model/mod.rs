//! The admission-control MDP: patient types, states, actions, transitions and
//! the weekly cost.
//!
//! Counts are laid out densely in one canonical order shared by states,
//! actions and feature vectors: specialty ascending, then urgency coefficient
//! ascending, then waiting time `w = 1..=W_ju`.

mod arrivals;
mod config;

use std::fmt;
use std::ops::{Deref, Range};

pub use arrivals::{poisson_pmf, support_cap, truncated_poisson_pmf};
pub use config::{
    ProblemConfig, SpecialtyConfig, UnitCosts, UrgencyGroup, DEFAULT_TRUNCATION_THRESHOLD,
};

use rand::Rng;
use serde::{Deserialize, Serialize};
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};

macro_rules! count_vector {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(
            Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub Vec<u32>);

        impl $name {
            pub fn zeros(len: usize) -> Self {
                Self(vec![0; len])
            }

            pub fn total(&self) -> u64 {
                self.0.iter().map(|&c| u64::from(c)).sum()
            }

            pub fn into_inner(self) -> Vec<u32> {
                self.0
            }
        }

        impl Deref for $name {
            type Target = [u32];

            fn deref(&self) -> &[u32] {
                &self.0
            }
        }

        impl From<Vec<u32>> for $name {
            fn from(v: Vec<u32>) -> Self {
                Self(v)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "[")?;
                for (i, c) in self.0.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, "]")
            }
        }
    };
}

count_vector!(
    /// Waiting-list counts `n_juw`, one per patient type.
    State
);
count_vector!(
    /// Scheduled counts `m_juw`, one per patient type.
    Action
);
count_vector!(
    /// Weekly arrivals `ñ_ju`, one per urgency group.
    ArrivalVector
);

/// A `(j, u, w)` patient type. `specialty` is 0-based, `urgency` is the
/// coefficient value and `wait` counts weeks from 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PatientType {
    pub specialty: usize,
    pub urgency: u32,
    pub wait: u32,
    pub group: usize,
}

/// Compiled urgency group with its truncated arrival law.
#[derive(Clone, Debug)]
pub struct Group {
    pub specialty: usize,
    pub urgency: u32,
    pub max_wait: u32,
    pub rate: f64,
    pub cap: u32,
    /// Index of the `w = 1` type of this group.
    pub offset: usize,
    pub pmf: Vec<f64>,
    pub(crate) cdf: Vec<f64>,
}

impl Group {
    /// Type index of waiting time `w` (1-based).
    pub fn type_index(&self, w: u32) -> usize {
        self.offset + (w as usize - 1)
    }

    pub fn due_index(&self) -> usize {
        self.type_index(self.max_wait)
    }

    pub fn types(&self) -> Range<usize> {
        self.offset..self.offset + self.max_wait as usize
    }
}

/// Patient-related and hospital-related parts of the weekly cost.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StageCost {
    pub patient: f64,
    pub hospital: f64,
    pub total: f64,
}

/// A validated instance with precomputed layout, priorities and arrival
/// tables. Immutable after construction.
#[derive(Clone, Debug)]
pub struct Model {
    config: ProblemConfig,
    groups: Vec<Group>,
    types: Vec<PatientType>,
    priority: Vec<f64>,
    forced_by_cost: Vec<bool>,
    specialty_types: Vec<Range<usize>>,
    specialty_groups: Vec<Range<usize>>,
}

impl Model {
    pub fn new(config: ProblemConfig) -> Result<Self> {
        config.validate()?;
        let costs = &config.costs;
        let mut groups = Vec::new();
        let mut types = Vec::new();
        let mut priority = Vec::new();
        let mut forced_by_cost = Vec::new();
        let mut specialty_types = Vec::new();
        let mut specialty_groups = Vec::new();
        for (j, spec) in config.specialties.iter().enumerate() {
            let first_type = types.len();
            let first_group = groups.len();
            // largest possible hospital-cost increase from one more patient
            let marginal_hospital = costs.or_overtime_per_hour * spec.duration_mean_hours
                + costs.sicu_shortage_per_bed_day * spec.los_mean_days;
            let mut ordered: Vec<&UrgencyGroup> = spec.urgency_groups.iter().collect();
            ordered.sort_by_key(|g| g.coefficient);
            for ug in ordered {
                let cap = ug.arrival_cap.unwrap_or_else(|| {
                    support_cap(ug.arrival_rate_per_week, config.poisson_truncation_threshold)
                });
                let pmf = arrivals::truncated_pmf_table(ug.arrival_rate_per_week, cap);
                let mut acc = 0.0;
                let mut cdf: Vec<f64> = pmf
                    .iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect();
                if let Some(last) = cdf.last_mut() {
                    *last = 1.0;
                }
                let group = groups.len();
                groups.push(Group {
                    specialty: j,
                    urgency: ug.coefficient,
                    max_wait: ug.max_wait_weeks,
                    rate: ug.arrival_rate_per_week,
                    cap,
                    offset: types.len(),
                    pmf,
                    cdf,
                });
                for w in 1..=ug.max_wait_weeks {
                    let p = spec.importance * f64::from(ug.coefficient) * f64::from(w);
                    types.push(PatientType {
                        specialty: j,
                        urgency: ug.coefficient,
                        wait: w,
                        group,
                    });
                    priority.push(p);
                    forced_by_cost.push(
                        (costs.waiting_per_priority - costs.surgery_per_priority) * p
                            > marginal_hospital,
                    );
                }
            }
            specialty_types.push(first_type..types.len());
            specialty_groups.push(first_group..groups.len());
        }
        Ok(Self {
            config,
            groups,
            types,
            priority,
            forced_by_cost,
            specialty_types,
            specialty_groups,
        })
    }

    pub fn config(&self) -> &ProblemConfig {
        &self.config
    }

    pub fn discount(&self) -> f64 {
        self.config.discount
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn types(&self) -> &[PatientType] {
        &self.types
    }

    /// `Ξ`, the number of patient types.
    pub fn type_count(&self) -> usize {
        self.types.len()
    }

    pub fn specialty_count(&self) -> usize {
        self.specialty_types.len()
    }

    pub fn specialty_types(&self, j: usize) -> Range<usize> {
        self.specialty_types[j].clone()
    }

    pub fn specialty_groups(&self, j: usize) -> Range<usize> {
        self.specialty_groups[j].clone()
    }

    /// Priority `v_j u w` of every type, in canonical order.
    pub fn priorities(&self) -> &[f64] {
        &self.priority
    }

    /// Whether the type sits at its maximum recommended waiting time.
    pub fn is_due(&self, ty: usize) -> bool {
        let t = &self.types[ty];
        t.wait == self.groups[t.group].max_wait
    }

    /// Whether scheduling one patient of this type saves more patient cost
    /// than it can possibly add in hospital cost.
    pub fn is_forced_by_cost(&self, ty: usize) -> bool {
        self.forced_by_cost[ty]
    }

    /// Whether every patient of this type must be scheduled.
    pub fn is_mandatory(&self, ty: usize) -> bool {
        self.forced_by_cost[ty] || self.is_due(ty)
    }

    pub fn type_index(&self, j: usize, u: u32, w: u32) -> Result<usize> {
        let groups = self
            .specialty_groups
            .get(j)
            .ok_or_else(|| Error::InvalidIndex(format!("specialty {j} does not exist")))?;
        let g = self.groups[groups.clone()]
            .iter()
            .find(|g| g.urgency == u)
            .ok_or_else(|| {
                Error::InvalidIndex(format!("specialty {j} has no urgency coefficient {u}"))
            })?;
        if w == 0 || w > g.max_wait {
            return Err(Error::InvalidIndex(format!(
                "waiting time {w} outside 1..={} for (j={j}, u={u})",
                g.max_wait
            )));
        }
        Ok(g.type_index(w))
    }

    /// Dynamic priority score `v_j · u · w`.
    pub fn priority_score(&self, j: usize, u: u32, w: u32) -> Result<f64> {
        let ty = self.type_index(j, u, w)?;
        Ok(self.priority[ty])
    }

    /// Arrival caps per group (the truncation bound, or `u32::MAX`-free caps
    /// used by exact enumeration).
    pub fn arrival_caps(&self) -> Vec<u32> {
        self.groups.iter().map(|g| g.cap).collect()
    }

    /// Expected weekly arrivals `n̄_ju` per group.
    pub fn arrival_rates(&self) -> Vec<f64> {
        self.groups.iter().map(|g| g.rate).collect()
    }

    pub fn zero_state(&self) -> State {
        State::zeros(self.type_count())
    }

    pub fn zero_action(&self) -> Action {
        Action::zeros(self.type_count())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.type_count() {
            return Err(Error::ShapeMismatch {
                expected: self.type_count(),
                got: len,
            });
        }
        Ok(())
    }

    /// Feasibility: `m ≤ n` below the due week and `m = n` at it.
    pub fn is_feasible(&self, state: &State, action: &Action) -> Result<bool> {
        self.check_len(state.len())?;
        self.check_len(action.len())?;
        Ok(self.feasible_unchecked(state, action))
    }

    pub(crate) fn feasible_unchecked(&self, state: &[u32], action: &[u32]) -> bool {
        state
            .iter()
            .zip(action)
            .enumerate()
            .all(|(ty, (&n, &m))| if self.is_due(ty) { m == n } else { m <= n })
    }

    fn require_feasible(&self, state: &State, action: &Action) -> Result<()> {
        if !self.is_feasible(state, action)? {
            return Err(Error::Infeasible(format!(
                "action {action} is not feasible for state {state}"
            )));
        }
        Ok(())
    }

    /// Post-action state `G`: unscheduled patients aged one week, empty
    /// `w = 1` rows.
    pub fn post_action_state(&self, state: &State, action: &Action) -> Result<State> {
        self.require_feasible(state, action)?;
        Ok(State(self.post_action_unchecked(state, action)))
    }

    pub(crate) fn post_action_unchecked(&self, state: &[u32], action: &[u32]) -> Vec<u32> {
        let mut g = vec![0; state.len()];
        for grp in &self.groups {
            for ty in grp.offset..grp.due_index() {
                g[ty + 1] = state[ty] - action[ty];
            }
        }
        g
    }

    /// Arrivals lifted onto the `w = 1` rows.
    pub fn lift_arrivals(&self, arrivals: &ArrivalVector) -> Result<State> {
        if arrivals.len() != self.groups.len() {
            return Err(Error::ShapeMismatch {
                expected: self.groups.len(),
                got: arrivals.len(),
            });
        }
        let mut psi = vec![0; self.type_count()];
        for (g, &n) in self.groups.iter().zip(arrivals.iter()) {
            psi[g.offset] = n;
        }
        Ok(State(psi))
    }

    /// Next week's state `G + Ψ`.
    pub fn successor(
        &self,
        state: &State,
        action: &Action,
        arrivals: &ArrivalVector,
    ) -> Result<State> {
        let mut next = self.post_action_state(state, action)?;
        let psi = self.lift_arrivals(arrivals)?;
        for (n, a) in next.0.iter_mut().zip(psi.iter()) {
            *n += a;
        }
        Ok(next)
    }

    /// `p(s, a, s')`: product of truncated arrival probabilities on the
    /// `w = 1` rows times the indicator that every carried-forward row matches.
    pub fn transition_probability(
        &self,
        state: &State,
        action: &Action,
        next: &State,
    ) -> Result<f64> {
        self.check_len(next.len())?;
        self.require_feasible(state, action)?;
        let g = self.post_action_unchecked(state, action);
        let mut p = 1.0;
        for grp in &self.groups {
            for ty in grp.offset + 1..grp.offset + grp.max_wait as usize {
                if next[ty] != g[ty] {
                    return Ok(0.0);
                }
            }
            let k = next[grp.offset];
            p *= self.arrival_pmf(grp, k);
        }
        Ok(p)
    }

    /// Arrival probability of `k` patients in one group under the model's
    /// arrival law (truncated and renormalized when truncation is active).
    pub fn arrival_pmf(&self, grp: &Group, k: u32) -> f64 {
        if self.config.truncate_arrivals {
            grp.pmf.get(k as usize).copied().unwrap_or(0.0)
        } else {
            poisson_pmf(grp.rate, k)
        }
    }

    /// One week of arrivals: independent draws per group, from the truncated
    /// law when truncation is active and from the plain Poisson law otherwise.
    pub fn sample_arrivals<R: Rng + ?Sized>(&self, rng: &mut R) -> ArrivalVector {
        ArrivalVector(self.groups.iter().map(|g| self.sample_group(g, rng)).collect())
    }

    pub(crate) fn sample_group<R: Rng + ?Sized>(&self, g: &Group, rng: &mut R) -> u32 {
        if g.rate == 0.0 {
            return 0;
        }
        if self.config.truncate_arrivals {
            let u: f64 = rng.random();
            g.cdf.iter().position(|&c| u < c).unwrap_or(g.cdf.len() - 1) as u32
        } else {
            // rate is validated finite and positive here
            let k: f64 = Poisson::new(g.rate).expect("valid rate").sample(rng);
            k.min(f64::from(u32::MAX)) as u32
        }
    }

    /// Scheduled patients per specialty.
    pub fn scheduled_per_specialty(&self, action: &[u32]) -> Vec<u32> {
        self.specialty_types
            .iter()
            .map(|r| action[r.clone()].iter().sum())
            .collect()
    }

    /// Hospital cost from per-specialty scheduled totals: expected OR
    /// overtime plus expected SICU shortage, each estimated from the means.
    pub fn hospital_cost(&self, scheduled: &[u32]) -> f64 {
        let cfg = &self.config;
        let mut overtime_cost = 0.0;
        let mut los = 0.0;
        for (spec, &m) in cfg.specialties.iter().zip(scheduled) {
            let m = f64::from(m);
            overtime_cost += self.overtime_cost(spec, m);
            los += m * spec.los_mean_days;
        }
        overtime_cost + self.shortage_cost(los)
    }

    #[inline]
    pub(crate) fn overtime_cost(&self, spec: &SpecialtyConfig, scheduled: f64) -> f64 {
        let ot = scheduled * spec.duration_mean_hours
            - self.config.or_availability_rate * spec.or_capacity_hours;
        self.config.costs.or_overtime_per_hour * ot.max(0.0)
    }

    #[inline]
    pub(crate) fn shortage_cost(&self, los_days: f64) -> f64 {
        let e = los_days - self.config.sicu_availability_rate * self.config.sicu_capacity_bed_days;
        self.config.costs.sicu_shortage_per_bed_day * e.max(0.0)
    }

    /// Patient cost: performed surgeries at `c_b` and postponed ones at `c_d`,
    /// both weighted by priority.
    pub fn patient_cost(&self, state: &[u32], action: &[u32]) -> f64 {
        let c = &self.config.costs;
        let mut performed = 0.0;
        let mut postponed = 0.0;
        for ((&n, &m), &p) in state.iter().zip(action).zip(&self.priority) {
            performed += p * f64::from(m);
            postponed += p * f64::from(n - m);
        }
        c.surgery_per_priority * performed + c.waiting_per_priority * postponed
    }

    /// Weekly cost `C(s, a) = C_p(s, a) + C_h(a)`.
    pub fn stage_cost(&self, state: &State, action: &Action) -> Result<StageCost> {
        self.require_feasible(state, action)?;
        Ok(self.stage_cost_unchecked(state, action))
    }

    pub(crate) fn stage_cost_unchecked(&self, state: &[u32], action: &[u32]) -> StageCost {
        let patient = self.patient_cost(state, action);
        let hospital = self.hospital_cost(&self.scheduled_per_specialty(action));
        StageCost {
            patient,
            hospital,
            total: patient + hospital,
        }
    }

    /// Sum of priorities of the patients in a count vector, `P(x)`.
    pub fn priority_mass(&self, counts: &[u32]) -> f64 {
        counts
            .iter()
            .zip(&self.priority)
            .map(|(&c, &p)| p * f64::from(c))
            .sum()
    }

    /// Whether every count respects the arrival caps (carried-forward rows
    /// can never exceed their group's cap).
    pub fn within_caps(&self, state: &[u32]) -> bool {
        self.groups
            .iter()
            .all(|g| state[g.types()].iter().all(|&n| n <= g.cap))
    }

    /// Two actions are priority-comparable when they schedule the same
    /// number of patients in every specialty.
    pub fn priority_comparable(&self, a: &Action, b: &Action) -> bool {
        self.scheduled_per_specialty(a) == self.scheduled_per_specialty(b)
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// The two-specialty instance used throughout the unit tests.
    pub fn small_config() -> ProblemConfig {
        let spec = |importance, b, d, l, groups: Vec<(u32, u32, f64)>| SpecialtyConfig {
            name: String::new(),
            importance,
            or_capacity_hours: b,
            duration_mean_hours: d,
            duration_std_hours: d,
            los_mean_days: l,
            los_std_days: l,
            urgency_groups: groups
                .into_iter()
                .map(|(u, w, r)| UrgencyGroup {
                    coefficient: u,
                    max_wait_weeks: w,
                    arrival_rate_per_week: r,
                    arrival_cap: None,
                })
                .collect(),
        };
        ProblemConfig {
            name: "small".into(),
            sicu_capacity_bed_days: 7.0,
            or_availability_rate: 1.0,
            sicu_availability_rate: 1.0,
            discount: 0.99,
            poisson_truncation_threshold: DEFAULT_TRUNCATION_THRESHOLD,
            truncate_arrivals: true,
            allow_nonincreasing_waiting_cost: false,
            costs: UnitCosts {
                surgery_per_priority: 50.0,
                waiting_per_priority: 100.0,
                or_overtime_per_hour: 400.0,
                sicu_shortage_per_bed_day: 1000.0,
            },
            specialties: vec![
                spec(1.0, 3.0, 2.0, 4.0, vec![(1, 4, 1.0), (2, 2, 0.5)]),
                spec(2.0, 2.0, 4.0, 2.0, vec![(1, 3, 0.25), (2, 2, 0.25)]),
            ],
        }
    }

    pub fn small_model() -> Model {
        Model::new(small_config()).unwrap()
    }
}
