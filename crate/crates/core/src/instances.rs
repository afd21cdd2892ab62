//! Built-in instances: a two-specialty toy, a single-specialty CABG line and
//! a nine-specialty hospital.

use crate::error::{Error, Result};
use crate::model::{ProblemConfig, SpecialtyConfig, UnitCosts, UrgencyGroup};

pub const NAMES: [&str; 3] = ["small-2spec", "cabg", "multi-9spec"];

fn group(coefficient: u32, max_wait_weeks: u32, rate: f64, cap: Option<u32>) -> UrgencyGroup {
    UrgencyGroup {
        coefficient,
        max_wait_weeks,
        arrival_rate_per_week: rate,
        arrival_cap: cap,
    }
}

#[allow(clippy::too_many_arguments)]
fn specialty(
    name: &str,
    importance: f64,
    (d, sd): (f64, f64),
    (l, sl): (f64, f64),
    b: f64,
    urgency_groups: Vec<UrgencyGroup>,
) -> SpecialtyConfig {
    SpecialtyConfig {
        name: name.to_string(),
        importance,
        or_capacity_hours: b,
        duration_mean_hours: d,
        duration_std_hours: sd,
        los_mean_days: l,
        los_std_days: sl,
        urgency_groups,
    }
}

fn base(name: &str, costs: [f64; 4], r: f64, rho: (f64, f64)) -> ProblemConfig {
    ProblemConfig {
        name: name.to_string(),
        sicu_capacity_bed_days: r,
        or_availability_rate: rho.0,
        sicu_availability_rate: rho.1,
        discount: 0.99,
        poisson_truncation_threshold: crate::model::DEFAULT_TRUNCATION_THRESHOLD,
        truncate_arrivals: true,
        allow_nonincreasing_waiting_cost: false,
        costs: UnitCosts {
            surgery_per_priority: costs[0],
            waiting_per_priority: costs[1],
            or_overtime_per_hour: costs[2],
            sicu_shortage_per_bed_day: costs[3],
        },
        specialties: Vec::new(),
    }
}

/// Two specialties, two urgency groups each; caps derived from the 0.005
/// threshold (4, 3, 2, 2), 2,430,000 states.
pub fn small_2spec() -> ProblemConfig {
    let mut c = base("small-2spec", [50.0, 100.0, 400.0, 1000.0], 7.0, (1.0, 1.0));
    c.specialties = vec![
        specialty(
            "specialty 1",
            1.0,
            (2.0, 2.0),
            (4.0, 4.0),
            3.0,
            vec![group(1, 4, 1.0, None), group(2, 2, 0.5, None)],
        ),
        specialty(
            "specialty 2",
            2.0,
            (4.0, 4.0),
            (2.0, 2.0),
            2.0,
            vec![group(1, 3, 0.25, None), group(2, 2, 0.25, None)],
        ),
    ];
    c
}

/// One specialty with urgency coefficients 1, 2, 6; Ξ = 20. Arrival caps
/// are the published bounds 9, 13, 5.
pub fn cabg() -> ProblemConfig {
    let mut c = base("cabg", [100.0, 150.0, 1500.0, 1500.0], 25.0, (0.9, 0.72));
    c.specialties = vec![specialty(
        "CABG",
        1.0,
        (4.0, 1.72),
        (2.0, 2.0),
        40.0,
        vec![
            group(1, 12, 3.0, Some(9)),
            group(2, 6, 5.0, Some(13)),
            group(6, 2, 1.0, Some(5)),
        ],
    )];
    c
}

/// Nine specialties, 17 urgency groups, Ξ = 167. The published "max ñ"
/// column counts the support size, so each cap is one less.
pub fn multi_9spec() -> ProblemConfig {
    let mut c = base("multi-9spec", [50.0, 200.0, 1000.0, 1000.0], 105.0, (0.6, 0.6));
    let g = |u, w, rate, max_n: u32| group(u, w, rate, Some(max_n - 1));
    c.specialties = vec![
        specialty("ENT", 1.0, (1.23, 0.38), (0.10, 0.10), 48.0, vec![g(1, 20, 10.0, 25)]),
        specialty(
            "OBGYN",
            2.0,
            (1.43, 0.44),
            (2.0, 2.0),
            24.0,
            vec![g(1, 15, 4.0, 15), g(3, 6, 0.5, 4)],
        ),
        specialty(
            "ORTHO",
            2.0,
            (1.78, 0.54),
            (1.5, 1.5),
            48.0,
            vec![g(1, 15, 10.0, 25), g(3, 6, 2.0, 10)],
        ),
        specialty("NEURO", 5.0, (2.67, 1.65), (2.0, 2.0), 8.0, vec![g(1, 8, 2.5, 12)]),
        specialty(
            "GEN",
            1.0,
            (1.55, 0.67),
            (0.05, 0.05),
            64.0,
            vec![g(1, 20, 9.0, 20), g(2, 15, 2.0, 10)],
        ),
        specialty("OPHTH", 2.0, (0.63, 0.10), (0.05, 0.05), 32.0, vec![g(1, 15, 1.5, 8)]),
        specialty(
            "VASCULAR",
            4.0,
            (2.0, 1.03),
            (3.5, 3.5),
            16.0,
            vec![g(1, 10, 1.0, 6), g(2, 5, 2.5, 12), g(4, 2, 0.5, 4)],
        ),
        specialty(
            "CARDIAC",
            5.0,
            (4.0, 2.95),
            (2.0, 2.0),
            8.0,
            vec![g(1, 8, 0.25, 3), g(2, 3, 1.25, 7), g(6, 1, 0.5, 4)],
        ),
        specialty(
            "UROLOGY",
            3.0,
            (1.07, 0.75),
            (0.8, 0.8),
            8.0,
            vec![g(1, 12, 2.0, 10), g(2, 6, 0.5, 4)],
        ),
    ];
    c
}

pub fn builtin(name: &str) -> Result<ProblemConfig> {
    match name {
        "small-2spec" => Ok(small_2spec()),
        "cabg" => Ok(cabg()),
        "multi-9spec" => Ok(multi_9spec()),
        other => Err(Error::InvalidConfig(vec![format!(
            "unknown instance {other:?}; built-ins are {}",
            NAMES.join(", ")
        )])),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{state_space_log10, StateSpace, DEFAULT_MAX_STATES};
    use crate::Error;
    use crate::model::Model;

    #[test]
    fn builtins_validate_with_expected_sizes() {
        let small = Model::new(small_2spec()).unwrap();
        assert_eq!(small.type_count(), 11);
        assert_eq!(small.arrival_caps(), vec![4, 3, 2, 2]);
        let cabg = Model::new(cabg()).unwrap();
        assert_eq!(cabg.type_count(), 20);
        let multi = Model::new(multi_9spec()).unwrap();
        assert_eq!(multi.type_count(), 167);
        // 2.14e176
        let l = state_space_log10(&multi);
        assert!((l - 2.14f64.log10() - 176.0).abs() < 0.01, "{l}");
        // 10^12 · 14^6 · 6^2 ≈ 2.71e20
        let l = state_space_log10(&cabg);
        assert!((l - 2.71f64.log10() - 20.0).abs() < 0.01, "{l}");
    }

    #[test]
    fn oversized_enumeration_is_refused() {
        let multi = Model::new(multi_9spec()).unwrap();
        let err = StateSpace::new(&multi, DEFAULT_MAX_STATES).unwrap_err();
        assert!(matches!(err, Error::GuardRefusal(_)));
        assert!(err.to_string().contains("2.14e176"), "{err}");
        let small = Model::new(small_2spec()).unwrap();
        assert_eq!(StateSpace::new(&small, DEFAULT_MAX_STATES).unwrap().len(), 2_430_000);
    }

    #[test]
    fn unknown_name_rejected() {
        assert!(builtin("nope").is_err());
    }
}
