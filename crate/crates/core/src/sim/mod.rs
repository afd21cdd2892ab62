//! Multi-week Monte-Carlo evaluation of a policy.
//!
//! Arrivals for week `τ` come from the `(seed, arrivals, τ)` stream and are
//! therefore identical for every policy under one plan. Surgery durations and
//! LOSs are drawn per scenario from `(seed, durations, τ, k)` streams.

mod policy;

use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Action, ArrivalVector, Model, State};
use crate::rng::{self, Purpose};

pub use policy::{AdpPolicy, Decision, MyopicPolicy, Policy, TablePolicy};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationPlan {
    /// `τ_max`.
    pub weeks: u32,
    /// Duration/LOS scenarios per week.
    pub scenarios: u32,
    pub seed: u64,
}

impl Default for SimulationPlan {
    fn default() -> Self {
        Self {
            weeks: 1000,
            scenarios: 10_000,
            seed: 1,
        }
    }
}

impl SimulationPlan {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.weeks == 0 {
            bad.push("weeks must be >= 1".to_string());
        }
        if self.scenarios == 0 {
            bad.push("scenarios must be >= 1".to_string());
        }
        if self.scenarios > 1 << 24 {
            bad.push("scenarios must be below 2^24".to_string());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(bad))
        }
    }
}

/// Mean and sample standard deviation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(xs: impl IntoIterator<Item = f64>) -> Self {
        let mut n = 0.0;
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for x in xs {
            n += 1.0;
            let d = x - mean;
            mean += d / n;
            m2 += d * (x - mean);
        }
        let std = if n > 1.0 { (m2 / (n - 1.0)).sqrt() } else { 0.0 };
        Self { mean, std }
    }
}

/// `(μ, σ)` of the underlying normal for a lognormal with the given mean
/// and standard deviation.
pub fn lognormal_params(mean: f64, std: f64) -> Result<(f64, f64)> {
    if !(mean.is_finite() && mean > 0.0) {
        return Err(Error::Domain(format!("lognormal mean must be > 0, got {mean}")));
    }
    if !(std.is_finite() && std >= 0.0) {
        return Err(Error::Domain(format!("lognormal std must be >= 0, got {std}")));
    }
    let var = (1.0 + (std * std) / (mean * mean)).ln();
    let mu = (mean * mean / (std * std + mean * mean).sqrt()).ln();
    Ok((mu, var.sqrt()))
}

/// Lognormal sampler; a zero standard deviation is a point mass at the mean.
#[derive(Clone, Copy, Debug)]
enum Sampler {
    Fixed(f64),
    Log(LogNormal<f64>),
}

impl Sampler {
    fn new(mean: f64, std: f64) -> Result<Self> {
        let (mu, sigma) = lognormal_params(mean, std)?;
        if sigma == 0.0 {
            return Ok(Self::Fixed(mean));
        }
        LogNormal::new(mu, sigma)
            .map(Self::Log)
            .map_err(|e| Error::Domain(e.to_string()))
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Fixed(x) => *x,
            Self::Log(d) => d.sample(rng),
        }
    }
}

/// Scenario statistics of the realized hospital cost of one action.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HospitalStats {
    pub cost: Stat,
    /// `o_j`: OR overtime hours per specialty.
    pub overtime: Vec<Stat>,
    /// `o`: total OR overtime hours.
    pub total_overtime: Stat,
    /// `e`: SICU shortage in bed-days.
    pub shortage: Stat,
}

/// Samples per-patient durations and LOSs for `scenarios` scenarios and
/// evaluates `c_o Σ_j (Σ d - ρ1 B_j)^+ + c_e (Σ l - ρ2 R)^+` in each.
/// Scenario `k` of week `week` always uses the same substream.
pub fn realized_hospital_cost(
    model: &Model,
    action: &Action,
    scenarios: u32,
    seed: u64,
    week: u64,
) -> Result<HospitalStats> {
    if action.len() != model.type_count() {
        return Err(Error::ShapeMismatch {
            expected: model.type_count(),
            got: action.len(),
        });
    }
    let cfg = model.config();
    let scheduled = model.scheduled_per_specialty(action);
    let samplers = cfg
        .specialties
        .iter()
        .map(|s| {
            Ok((
                Sampler::new(s.duration_mean_hours, s.duration_std_hours)?,
                Sampler::new(s.los_mean_days, s.los_std_days)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let jn = scheduled.len();
    let rows: Vec<(Vec<f64>, f64, f64)> = (0..u64::from(scenarios))
        .into_par_iter()
        .map(|k| {
            let mut rng = rng::stream(seed, Purpose::Durations, rng::scenario_index(week, k));
            let mut ot = vec![0.0; jn];
            let mut los = 0.0;
            for (j, (&m, (dur, stay))) in scheduled.iter().zip(&samplers).enumerate() {
                let mut hours = 0.0;
                for _ in 0..m {
                    hours += dur.sample(&mut rng);
                    los += stay.sample(&mut rng);
                }
                let spec = &cfg.specialties[j];
                ot[j] = (hours - cfg.or_availability_rate * spec.or_capacity_hours).max(0.0);
            }
            let e = (los - cfg.sicu_availability_rate * cfg.sicu_capacity_bed_days).max(0.0);
            let cost = cfg.costs.or_overtime_per_hour * ot.iter().sum::<f64>()
                + cfg.costs.sicu_shortage_per_bed_day * e;
            (ot, e, cost)
        })
        .collect();
    Ok(HospitalStats {
        cost: Stat::of(rows.iter().map(|r| r.2)),
        overtime: (0..jn).map(|j| Stat::of(rows.iter().map(|r| r.0[j]))).collect(),
        total_overtime: Stat::of(rows.iter().map(|r| r.0.iter().sum())),
        shortage: Stat::of(rows.iter().map(|r| r.1)),
    })
}

/// Arrivals of week `week` under a plan seed; shared by every policy.
pub fn sample_arrivals(model: &Model, seed: u64, week: u64) -> ArrivalVector {
    model.sample_arrivals(&mut rng::stream(seed, Purpose::Arrivals, week))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeekRecord {
    pub week: u32,
    /// Patients on the waiting list when the decision is made.
    pub waiting: u64,
    pub scheduled: u64,
    pub action: Action,
    pub arrivals: ArrivalVector,
    /// `c_p`, exact.
    pub patient_cost: f64,
    /// `c_h` over scenarios.
    pub hospital_cost: Stat,
    /// `c = c_p + c_h` (mean).
    pub cost: f64,
    pub overtime: Vec<Stat>,
    pub total_overtime: Stat,
    pub shortage: Stat,
    /// Decision wall time in milliseconds.
    pub wall_ms: f64,
    pub evaluated_actions: f64,
    pub feasible_actions: f64,
}

/// Waiting time of scheduled patients of one urgency group, weighted per
/// patient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupWaiting {
    pub specialty: usize,
    pub urgency: u32,
    pub patients: u64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub policy: String,
    pub plan: SimulationPlan,
    pub weeks: Vec<WeekRecord>,
    pub waiting: Vec<GroupWaiting>,
    /// Across-week statistics of the weekly values.
    pub cost: Stat,
    pub patient_cost: Stat,
    pub hospital_cost: Stat,
    pub overtime: Vec<Stat>,
    pub total_overtime: Stat,
    pub shortage: Stat,
    pub wall_ms: Stat,
    pub waiting_list: Stat,
    pub evaluated_actions: f64,
    pub feasible_actions: f64,
}

impl SimulationReport {
    /// `‖A*‖ / ‖A‖` over every state the policy evaluated (all swept states
    /// for an offline table).
    pub fn action_ratio(&self) -> f64 {
        if self.feasible_actions > 0.0 {
            self.evaluated_actions / self.feasible_actions
        } else {
            1.0
        }
    }
}

/// Runs `plan.weeks` weeks from the empty waiting list.
pub fn run_simulation(
    model: &Model,
    policy: &mut dyn Policy,
    plan: &SimulationPlan,
) -> Result<SimulationReport> {
    plan.validate()?;
    let groups = model.groups();
    let mut wait_acc = vec![(0u64, 0.0f64, 0.0f64); groups.len()];
    let mut weeks = Vec::with_capacity(plan.weeks as usize);
    let mut state: State = model.zero_state();
    for tau in 0..plan.weeks {
        let t0 = Instant::now();
        let decision = policy.decide(model, &state, u64::from(tau))?;
        let wall_ms = t0.elapsed().as_secs_f64() * 1e3;
        let action = decision.action;
        if !model.is_feasible(&state, &action)? {
            return Err(Error::Infeasible(format!(
                "policy {} returned {action} for state {state} in week {}",
                policy.name(),
                tau + 1
            )));
        }
        for (ty, &m) in action.iter().enumerate() {
            if m > 0 {
                let t = &model.types()[ty];
                let w = f64::from(t.wait);
                let acc = &mut wait_acc[t.group];
                acc.0 += u64::from(m);
                acc.1 += w * f64::from(m);
                acc.2 += w * w * f64::from(m);
            }
        }
        let patient_cost = model.patient_cost(&state, &action);
        let hs = realized_hospital_cost(model, &action, plan.scenarios, plan.seed, u64::from(tau))?;
        let arrivals = sample_arrivals(model, plan.seed, u64::from(tau));
        let next = model.successor(&state, &action, &arrivals)?;
        weeks.push(WeekRecord {
            week: tau + 1,
            waiting: state.total(),
            scheduled: action.total(),
            patient_cost,
            cost: patient_cost + hs.cost.mean,
            hospital_cost: hs.cost,
            overtime: hs.overtime,
            total_overtime: hs.total_overtime,
            shortage: hs.shortage,
            wall_ms,
            evaluated_actions: decision.evaluated,
            feasible_actions: decision.feasible,
            action,
            arrivals,
        });
        state = next;
    }
    let waiting = groups
        .iter()
        .zip(&wait_acc)
        .map(|(g, &(n, s, s2))| {
            let (mean, std) = if n > 0 {
                let nf = n as f64;
                let mean = s / nf;
                (mean, (s2 / nf - mean * mean).max(0.0).sqrt())
            } else {
                (0.0, 0.0)
            };
            GroupWaiting {
                specialty: g.specialty,
                urgency: g.urgency,
                patients: n,
                mean,
                std,
            }
        })
        .collect();
    let stat = |f: &dyn Fn(&WeekRecord) -> f64| Stat::of(weeks.iter().map(f));
    let (evaluated_actions, feasible_actions) = match policy.offline_action_totals() {
        Some(t) => (t.evaluated as f64, t.feasible as f64),
        None => (
            weeks.iter().map(|w| w.evaluated_actions).sum(),
            weeks.iter().map(|w| w.feasible_actions).sum(),
        ),
    };
    Ok(SimulationReport {
        policy: policy.name().to_string(),
        plan: plan.clone(),
        waiting,
        cost: stat(&|w| w.cost),
        patient_cost: stat(&|w| w.patient_cost),
        hospital_cost: stat(&|w| w.hospital_cost.mean),
        overtime: (0..model.specialty_count())
            .map(|j| stat(&|w| w.overtime[j].mean))
            .collect(),
        total_overtime: stat(&|w| w.total_overtime.mean),
        shortage: stat(&|w| w.shortage.mean),
        wall_ms: stat(&|w| w.wall_ms),
        waiting_list: stat(&|w| w.waiting as f64),
        evaluated_actions,
        feasible_actions,
        weeks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{small_config, small_model};

    #[test]
    fn lognormal_closed_form() {
        let (mu, s) = lognormal_params(2.0, 2.0).unwrap();
        assert!((mu - (4.0 / 8f64.sqrt()).ln()).abs() < 1e-12);
        assert!((mu - 0.346_573_590_279_972_6).abs() < 1e-12);
        assert!((s * s - 2f64.ln()).abs() < 1e-12);
        assert_eq!(lognormal_params(3.0, 0.0).unwrap(), (3f64.ln(), 0.0));
        assert!(lognormal_params(0.0, 1.0).is_err());
    }

    #[test]
    fn empty_action_costs_nothing() {
        let m = small_model();
        let h = realized_hospital_cost(&m, &m.zero_action(), 100, 1, 0).unwrap();
        assert_eq!((h.cost.mean, h.cost.std), (0.0, 0.0));
    }

    #[test]
    fn degenerate_spread_matches_expected_cost() {
        let mut cfg = small_config();
        for s in &mut cfg.specialties {
            s.duration_std_hours = 0.0;
            s.los_std_days = 0.0;
        }
        let m = Model::new(cfg).unwrap();
        let mut a = m.zero_action();
        a.0[6] = 2;
        a.0[0] = 1;
        let h = realized_hospital_cost(&m, &a, 50, 9, 3).unwrap();
        let want = m.hospital_cost(&m.scheduled_per_specialty(&a));
        assert!((h.cost.mean - want).abs() < 1e-9);
        assert!(h.cost.std < 1e-9);
    }

    #[test]
    fn zero_arrivals_give_empty_report() {
        let mut cfg = small_config();
        for s in &mut cfg.specialties {
            for g in &mut s.urgency_groups {
                g.arrival_rate_per_week = 0.0;
            }
        }
        let m = Model::new(cfg).unwrap();
        let plan = SimulationPlan {
            weeks: 5,
            scenarios: 10,
            seed: 3,
        };
        let r = run_simulation(&m, &mut MyopicPolicy, &plan).unwrap();
        assert_eq!(r.cost, Stat::default());
        assert!(r.weeks.iter().all(|w| w.waiting == 0 && w.scheduled == 0));
    }

    #[test]
    fn stat_matches_two_pass() {
        let xs = [1.0, 4.0, 2.0, 8.0];
        let s = Stat::of(xs);
        assert!((s.mean - 3.75).abs() < 1e-12);
        let var: f64 = xs.iter().map(|x| (x - 3.75f64).powi(2)).sum::<f64>() / 3.0;
        assert!((s.std - var.sqrt()).abs() < 1e-12);
        assert_eq!(Stat::of([5.0]).std, 0.0);
    }
}
