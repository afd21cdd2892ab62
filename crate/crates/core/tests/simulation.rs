use admission_core::adp::Hyperparams;
use admission_core::instances::{cabg, small_2spec};
use admission_core::model::{Action, Model, State};
use admission_core::sim::{
    lognormal_params, realized_hospital_cost, run_simulation, AdpPolicy, Decision, MyopicPolicy,
    Policy, SimulationPlan, SimulationReport,
};
use admission_core::{Error, Result};
use rand::SeedableRng;
use rand_distr::{Distribution, LogNormal};

fn plan(weeks: u32, scenarios: u32, seed: u64) -> SimulationPlan {
    SimulationPlan {
        weeks,
        scenarios,
        seed,
    }
}

fn strip_wall(mut r: SimulationReport) -> SimulationReport {
    for w in &mut r.weeks {
        w.wall_ms = 0.0;
    }
    r.wall_ms = Default::default();
    r
}

#[test]
fn empirical_arrivals_match_truncated_pmf() {
    let m = Model::new(small_2spec()).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let n = 1_000_000;
    let groups = m.groups();
    let mut hist: Vec<Vec<u64>> = groups.iter().map(|g| vec![0; g.cap as usize + 1]).collect();
    for _ in 0..n {
        let a = m.sample_arrivals(&mut rng);
        for (h, &k) in hist.iter_mut().zip(a.iter()) {
            h[k as usize] += 1;
        }
    }
    for (g, h) in groups.iter().zip(&hist) {
        for (k, &c) in h.iter().enumerate() {
            let p = m.arrival_pmf(g, k as u32);
            let sd = (n as f64 * p * (1.0 - p)).sqrt();
            assert!((c as f64 - n as f64 * p).abs() <= 3.0 * sd + 1.0, "group {} k {k}", g.offset);
        }
    }
}

#[test]
fn lognormal_round_trip() {
    let (mean, std) = (2.0, 1.5);
    let (mu, sigma) = lognormal_params(mean, std).unwrap();
    let d = LogNormal::new(mu, sigma).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
    let xs: Vec<f64> = (0..1_000_000).map(|_| d.sample(&mut rng)).collect();
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    let s = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt();
    assert!((m / mean - 1.0).abs() < 0.01);
    assert!((s / std - 1.0).abs() < 0.01);
}

#[test]
fn runs_are_reproducible() {
    let m = Model::new(small_2spec()).unwrap();
    let p = plan(60, 200, 11);
    let a = run_simulation(&m, &mut MyopicPolicy, &p).unwrap();
    let b = run_simulation(&m, &mut MyopicPolicy, &p).unwrap();
    assert_eq!(strip_wall(a), strip_wall(b));
}

#[test]
fn policies_see_the_same_arrivals() {
    let m = Model::new(cabg()).unwrap();
    let p = plan(8, 50, 3);
    let my = run_simulation(&m, &mut MyopicPolicy, &p).unwrap();
    let hyper = Hyperparams {
        depth: 50,
        max_trajectories: 5,
        ..Hyperparams::default()
    };
    let mut adp = AdpPolicy::new(&m, hyper, 3).unwrap();
    let ad = run_simulation(&m, &mut adp, &p).unwrap();
    for (x, y) in my.weeks.iter().zip(&ad.weeks) {
        assert_eq!(x.arrivals, y.arrivals);
    }
}

#[test]
fn report_invariants() {
    let m = Model::new(small_2spec()).unwrap();
    let r = run_simulation(&m, &mut MyopicPolicy, &plan(150, 300, 2)).unwrap();
    let types = m.types();
    for w in &r.weeks {
        assert!((w.cost - w.patient_cost - w.hospital_cost.mean).abs() < 1e-9);
        assert!(w.patient_cost >= 0.0 && w.hospital_cost.mean >= 0.0);
        for (ty, &k) in w.action.iter().enumerate() {
            if k > 0 {
                let g = &m.groups()[types[ty].group];
                assert!(types[ty].wait >= 1 && types[ty].wait <= g.max_wait);
            }
        }
    }
    let total = r.patient_cost.mean + r.hospital_cost.mean;
    assert!((r.cost.mean - total).abs() < 1e-9 * total.max(1.0));
    for g in &r.waiting {
        if g.patients > 0 {
            assert!(g.mean >= 1.0);
        }
    }
    let ratio = r.action_ratio();
    assert!(ratio > 0.0 && ratio <= 1.0);
}

#[test]
fn hospital_cost_error_shrinks_with_scenarios() {
    // spread of the estimated mean over independent weeks, at 10² and 10⁴
    let m = Model::new(small_2spec()).unwrap();
    let mut a = m.zero_action();
    a.0[0] = 3;
    a.0[m.specialty_types(1).start] = 2;
    let spread = |scenarios| {
        let means: Vec<f64> = (0..40)
            .map(|w| realized_hospital_cost(&m, &a, scenarios, 77, w).unwrap().cost.mean)
            .collect();
        admission_core::sim::Stat::of(means).std
    };
    let ratio = spread(100) / spread(10_000);
    assert!((5.0..20.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn tail_cost_falls_as_capacity_grows() {
    let mut last = f64::INFINITY;
    for b in [4.0, 8.0, 16.0, 32.0] {
        let mut cfg = small_2spec();
        cfg.specialties[0].or_capacity_hours = b;
        cfg.sicu_capacity_bed_days = 4.0 * b;
        let m = Model::new(cfg).unwrap();
        let mut a = m.zero_action();
        a.0[0] = 1;
        let c = realized_hospital_cost(&m, &a, 100_000, 4, 0).unwrap().cost.mean;
        assert!(c <= last);
        last = c;
    }
    assert!(last < 1.0);
}

struct Reckless;

impl Policy for Reckless {
    fn name(&self) -> &str {
        "reckless"
    }

    fn decide(&mut self, model: &Model, _state: &State, week: u64) -> Result<Decision> {
        let mut a = model.zero_action();
        if week == 4 {
            a.0[0] = 99;
        }
        Ok(Decision {
            action: Action(a.0),
            evaluated: 1.0,
            feasible: 1.0,
        })
    }
}

#[test]
fn infeasible_policy_names_the_week() {
    // idling breaks the due-date rule, and week 5 over-schedules anyway
    let m = Model::new(small_2spec()).unwrap();
    let err = run_simulation(&m, &mut Reckless, &plan(10, 10, 1)).unwrap_err();
    match err {
        Error::Infeasible(msg) => assert!(msg.contains("week"), "{msg}"),
        e => panic!("unexpected {e}"),
    }
}
