//! Helpers shared by the integration tests: random tiny instances and
//! brute-force oracles.

use admission_core::action_space::full_action_count;
use admission_core::exact::StateSpace;
use admission_core::model::{Model, ProblemConfig, SpecialtyConfig, UnitCosts, UrgencyGroup};
use rand::Rng;

pub const MAX_STATES: usize = 4000;
pub const MAX_ACTION_SUM: u128 = 100_000;

fn draw_config<R: Rng>(rng: &mut R) -> ProblemConfig {
    let cb = rng.random_range(10.0..60.0);
    // cheap hospital costs now and then, so the cost inequality forces types
    let cheap = rng.random_bool(0.3);
    let (co, ce) = if cheap {
        (rng.random_range(1.0..20.0), rng.random_range(1.0..20.0))
    } else {
        (rng.random_range(50.0..500.0), rng.random_range(50.0..500.0))
    };
    let jn = rng.random_range(1..=2);
    let specialties = (0..jn)
        .map(|_| {
            let un = rng.random_range(1..=2);
            let mut coeffs = vec![1u32, 2, 3];
            let mut groups = Vec::new();
            for _ in 0..un {
                let u = coeffs.remove(rng.random_range(0..coeffs.len()));
                groups.push(UrgencyGroup {
                    coefficient: u,
                    max_wait_weeks: rng.random_range(1..=3),
                    arrival_rate_per_week: rng.random_range(0.1..1.5),
                    arrival_cap: Some(rng.random_range(0..=2)),
                });
            }
            let d = rng.random_range(0.5..4.0);
            let l = rng.random_range(0.5..4.0);
            SpecialtyConfig {
                name: String::new(),
                importance: f64::from(rng.random_range(1..=3)),
                or_capacity_hours: rng.random_range(0.0..6.0),
                duration_mean_hours: d,
                duration_std_hours: d,
                los_mean_days: l,
                los_std_days: l,
                urgency_groups: groups,
            }
        })
        .collect();
    ProblemConfig {
        name: "tiny".into(),
        sicu_capacity_bed_days: rng.random_range(0.0..8.0),
        or_availability_rate: 1.0,
        sicu_availability_rate: 1.0,
        discount: 0.9,
        poisson_truncation_threshold: 0.005,
        truncate_arrivals: true,
        allow_nonincreasing_waiting_cost: false,
        costs: UnitCosts {
            surgery_per_priority: cb,
            waiting_per_priority: cb + rng.random_range(5.0..100.0),
            or_overtime_per_hour: co,
            sicu_shortage_per_bed_day: ce,
        },
        specialties,
    }
}

/// Draws until the instance is small enough for full enumeration.
#[allow(dead_code)]
pub fn tiny_model<R: Rng>(rng: &mut R) -> Model {
    loop {
        let model = Model::new(draw_config(rng)).expect("generated config is valid");
        let Ok(space) = StateSpace::new(&model, MAX_STATES as u64) else {
            continue;
        };
        let total: u128 = space
            .iter()
            .map(|s| full_action_count(&model, &s))
            .sum();
        if total <= MAX_ACTION_SUM && space.len() > 1 {
            return model;
        }
    }
}

/// `C_0(s) = min_{a ∈ A(s)} C(s, a)` by enumerating every feasible action.
#[allow(dead_code)]
pub fn brute_c0(model: &Model, state: &admission_core::model::State) -> f64 {
    admission_core::action_space::enumerate_full_actions(model, state)
        .map(|a| model.stage_cost(state, &a).unwrap().total)
        .fold(f64::INFINITY, f64::min)
}

/// Type pairs `(t', t'')` of one specialty with `u'w' < u''w''`.
#[allow(dead_code)]
pub fn priority_swaps(model: &Model) -> Vec<(usize, usize)> {
    let types = model.types();
    let mut out = Vec::new();
    for a in 0..types.len() {
        for b in 0..types.len() {
            let (ta, tb) = (&types[a], &types[b]);
            if ta.specialty == tb.specialty && ta.urgency * ta.wait < tb.urgency * tb.wait {
                out.push((a, b));
            }
        }
    }
    out
}

/// Both sides of the inequality `min f − min g ≥ min (f − g)`.
#[allow(dead_code)]
pub fn lemma_sides(f: &[f64], g: &[f64]) -> (f64, f64) {
    let min = |xs: &mut dyn Iterator<Item = f64>| xs.fold(f64::INFINITY, f64::min);
    let lhs = min(&mut f.iter().copied()) - min(&mut g.iter().copied());
    let rhs = min(&mut f.iter().zip(g).map(|(a, b)| a - b));
    (lhs, rhs)
}
