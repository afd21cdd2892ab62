mod common;

use admission_core::action_space::{
    action_set_stats, actions, enumerate_full_actions, mandatory_schedule, reduced_action_set,
    ActionSource,
};
use admission_core::exact::{
    bellman_backup, q_value, sweep_action_totals, value_iteration, PolicyTable, StateSpace,
    ValueTable, ViOptions,
};
use admission_core::model::{Model, State};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn solve(model: &Model, source: ActionSource) -> (ValueTable, PolicyTable) {
    let opts = ViOptions {
        source,
        stop_residual: Some(1e-11),
        ..ViOptions::default()
    };
    value_iteration(model, &opts).unwrap()
}

fn instances(seed: u64, n: usize) -> Vec<Model> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| common::tiny_model(&mut rng)).collect()
}

#[test]
fn pruned_and_full_iteration_agree() {
    for m in instances(3, 12) {
        let (full, _) = solve(&m, ActionSource::Full);
        let (red, _) = solve(&m, ActionSource::Reduced);
        assert!(full.converged && red.converged);
        assert!(full.sup_distance(&red).unwrap() < 1e-9);
        for s in full.space().iter() {
            let (_, qf) = bellman_backup(&m, &full, &s, ActionSource::Full).unwrap();
            let (_, qr) = bellman_backup(&m, &full, &s, ActionSource::Reduced).unwrap();
            assert!((qf - qr).abs() < 1e-9, "state {s}: {qf} vs {qr}");
        }
    }
}

#[test]
fn optimal_values_are_monotone() {
    for m in instances(5, 6) {
        let (v, _) = solve(&m, ActionSource::Full);
        let space = v.space();
        let swaps = common::priority_swaps(&m);
        for s in space.iter() {
            let base = v.value(&s).unwrap();
            for t in 0..m.type_count() {
                let mut up = s.clone();
                up.0[t] += 1;
                if let Some(x) = v.value(&up) {
                    assert!(x > base, "V({up}) = {x} not above V({s}) = {base}");
                }
            }
            for &(lo, hi) in &swaps {
                if s[lo] == 0 {
                    continue;
                }
                let mut sw = s.clone();
                sw.0[lo] -= 1;
                sw.0[hi] += 1;
                if let Some(x) = v.value(&sw) {
                    assert!(x > base, "swap {lo}->{hi} at {s}: {x} <= {base}");
                }
            }
        }
    }
}

#[test]
fn cost_forced_types_are_fully_scheduled() {
    let mut seen = 0;
    for m in instances(8, 10) {
        let forced: Vec<usize> = (0..m.type_count())
            .filter(|&t| m.is_forced_by_cost(t))
            .collect();
        if forced.is_empty() {
            continue;
        }
        seen += 1;
        let (_, policy) = solve(&m, ActionSource::Full);
        for s in policy.space().iter() {
            let a = policy.action(&s).unwrap();
            for &t in &forced {
                assert_eq!(a[t], s[t], "type {t} at {s}");
            }
        }
    }
    assert!(seen > 0, "no instance had a cost-forced type");
}

#[test]
fn q_falls_as_scheduled_priority_rises() {
    for m in instances(13, 4) {
        let (v, _) = solve(&m, ActionSource::Full);
        let swaps = common::priority_swaps(&m);
        for s in v.space().iter() {
            for a in enumerate_full_actions(&m, &s) {
                let qa = q_value(&m, &v, &s, &a).unwrap();
                for &(lo, hi) in &swaps {
                    if a[lo] == 0 {
                        continue;
                    }
                    let mut b = a.clone();
                    b.0[lo] -= 1;
                    b.0[hi] += 1;
                    if !m.is_feasible(&s, &b).unwrap() {
                        continue;
                    }
                    let qb = q_value(&m, &v, &s, &b).unwrap();
                    assert!(qb < qa, "{s}: Q({b}) = {qb} not below Q({a}) = {qa}");
                }
            }
        }
    }
}

#[test]
fn lemma_inequality_on_random_functions() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10_000 {
        let n = rng.random_range(1..20);
        let f: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
        let g: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
        let (lhs, rhs) = common::lemma_sides(&f, &g);
        assert!(lhs >= rhs);
    }
}

#[test]
fn reduced_set_properties() {
    for m in instances(17, 8) {
        let space = StateSpace::new(&m, 10_000).unwrap();
        for s in space.iter() {
            let full: Vec<_> = enumerate_full_actions(&m, &s).collect();
            let red = reduced_action_set(&m, &s);
            let mand = mandatory_schedule(&m, &s);
            assert!(red.windows(2).all(|w| w[0] < w[1]));
            for a in &red {
                assert!(full.binary_search(a).is_ok());
                for t in 0..m.type_count() {
                    if m.is_mandatory(t) {
                        assert_eq!(a[t], s[t]);
                        assert_eq!(mand[t], s[t]);
                    }
                }
                dominance_holds(&m, &s, a);
            }
            let st = action_set_stats(&m, &s);
            assert_eq!(st.full_count, full.len() as u128);
            assert_eq!(st.reduced_count, red.len() as u128);
        }
    }
}

/// Scheduled optional patients outrank unscheduled ones within a specialty.
fn dominance_holds(m: &Model, s: &State, a: &admission_core::model::Action) {
    let pr = m.priorities();
    for j in 0..m.specialty_count() {
        let optional: Vec<usize> = m
            .specialty_types(j)
            .filter(|&t| !m.is_mandatory(t))
            .collect();
        let lowest_in = optional
            .iter()
            .filter(|&&t| a[t] > 0)
            .map(|&t| pr[t])
            .fold(f64::INFINITY, f64::min);
        let highest_out = optional
            .iter()
            .filter(|&&t| a[t] < s[t])
            .map(|&t| pr[t])
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(lowest_in >= highest_out, "{s} {a}");
    }
}

#[test]
fn sweep_totals_match_per_state_counts() {
    for m in instances(29, 4) {
        let space = StateSpace::new(&m, 10_000).unwrap();
        let (mut e, mut f) = (0u128, 0u128);
        for s in space.iter() {
            e += actions(&m, &s, ActionSource::Reduced).len() as u128;
            f += actions(&m, &s, ActionSource::Full).len() as u128;
        }
        let t = sweep_action_totals(&m, &space, ActionSource::Reduced);
        assert_eq!((t.evaluated, t.feasible), (e, f));
        let t = sweep_action_totals(&m, &space, ActionSource::Full);
        assert_eq!((t.evaluated, t.feasible), (f, f));
    }
}

#[test]
fn zero_discount_gives_single_week_costs() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let m = common::tiny_model(&mut rng);
    let mut cfg = m.config().clone();
    cfg.discount = 0.0;
    let m = Model::new(cfg).unwrap();
    let (v, p) = solve(&m, ActionSource::Full);
    assert_eq!(v.iterations, 2);
    for s in v.space().iter() {
        let c0 = common::brute_c0(&m, &s);
        assert!((v.value(&s).unwrap() - c0).abs() < 1e-9);
        let mine = admission_core::exact::myopic_cost(&m, &s);
        let table = m.stage_cost(&s, &p.action(&s).unwrap()).unwrap().total;
        assert!((mine - c0).abs() < 1e-9 && (table - c0).abs() < 1e-9);
    }
}

/// Known limit of the pruning: a patient due next week can be worth
/// scheduling ahead of a higher-priority patient with slack left.
#[test]
fn pruning_can_miss_the_optimum_near_due_dates() {
    use admission_core::model::{ProblemConfig, SpecialtyConfig, UnitCosts, UrgencyGroup};
    let group = |coefficient, rate, cap| UrgencyGroup {
        coefficient,
        max_wait_weeks: 3,
        arrival_rate_per_week: rate,
        arrival_cap: Some(cap),
    };
    let cfg = ProblemConfig {
        name: "due-date counterexample".into(),
        sicu_capacity_bed_days: 4.985079903865197,
        or_availability_rate: 1.0,
        sicu_availability_rate: 1.0,
        discount: 0.9,
        poisson_truncation_threshold: 0.005,
        truncate_arrivals: true,
        allow_nonincreasing_waiting_cost: false,
        costs: UnitCosts {
            surgery_per_priority: 12.888304925326313,
            waiting_per_priority: 21.087151346947266,
            or_overtime_per_hour: 472.8144121867578,
            sicu_shortage_per_bed_day: 484.0095853253565,
        },
        specialties: vec![SpecialtyConfig {
            name: "s".into(),
            importance: 2.0,
            or_capacity_hours: 5.257766902991188,
            duration_mean_hours: 1.3853014500186809,
            duration_std_hours: 1.3853014500186809,
            los_mean_days: 3.8993483254473458,
            los_std_days: 3.8993483254473458,
            urgency_groups: vec![group(1, 0.5526606828340446, 2), group(3, 0.3888593649760137, 1)],
        }],
    };
    let m = Model::new(cfg).unwrap();
    let (v, _) = solve(&m, ActionSource::Full);
    // two u=1 patients at w=2 (priority 4 each), one u=3 patient at w=1 (priority 6)
    let s = State(vec![0, 2, 0, 1, 0, 0]);
    let (best, q_full) = bellman_backup(&m, &v, &s, ActionSource::Full).unwrap();
    let (_, q_red) = bellman_backup(&m, &v, &s, ActionSource::Reduced).unwrap();
    assert_eq!(best.0, vec![0, 1, 0, 0, 0, 0]);
    assert!(q_red > q_full + 1.0, "{q_red} vs {q_full}");
}
