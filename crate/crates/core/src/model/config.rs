//! Instance description: specialties, urgency groups, capacities and unit costs.
//!
//! Field names carry their units (`_hours`, `_days`, `_bed_days`, `_per_week`)
//! because the same numbers travel through the text configuration format.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TRUNCATION_THRESHOLD: f64 = 0.005;

/// Largest explicit arrival cap accepted.
pub const MAX_ARRIVAL_CAP: u32 = 10_000;

fn default_threshold() -> f64 {
    DEFAULT_TRUNCATION_THRESHOLD
}

fn default_true() -> bool {
    true
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// Unit costs of the weekly cost function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitCosts {
    /// `c_b`: cost per priority unit of a performed surgery.
    pub surgery_per_priority: f64,
    /// `c_d`: cost per priority unit of a postponed surgery.
    pub waiting_per_priority: f64,
    /// `c_o`: OR overtime cost per hour.
    pub or_overtime_per_hour: f64,
    /// `c_e`: SICU shortage cost per bed-day.
    pub sicu_shortage_per_bed_day: f64,
}

/// One urgency group `(j, u)` of a specialty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UrgencyGroup {
    /// Urgency coefficient `u` (a positive integer multiplier).
    pub coefficient: u32,
    /// Maximum recommended waiting time `W_ju` in weeks.
    pub max_wait_weeks: u32,
    /// Mean weekly arrivals `n̄_ju`.
    pub arrival_rate_per_week: f64,
    /// Largest admissible weekly arrival count. Derived from the truncation
    /// threshold when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arrival_cap: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecialtyConfig {
    #[serde(default)]
    pub name: String,
    /// Relative importance `v_j`.
    pub importance: f64,
    /// Regular OR capacity `B_j`.
    pub or_capacity_hours: f64,
    pub duration_mean_hours: f64,
    pub duration_std_hours: f64,
    pub los_mean_days: f64,
    pub los_std_days: f64,
    #[serde(rename = "urgency")]
    pub urgency_groups: Vec<UrgencyGroup>,
}

/// Full description of an admission-control instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default)]
    pub name: String,
    /// Regular SICU capacity `R`.
    pub sicu_capacity_bed_days: f64,
    /// `ρ1`.
    pub or_availability_rate: f64,
    /// `ρ2`.
    pub sicu_availability_rate: f64,
    /// Discount factor `γ`.
    pub discount: f64,
    #[serde(default = "default_threshold")]
    pub poisson_truncation_threshold: f64,
    /// Cap weekly arrivals at the truncation bound everywhere (exact solvers,
    /// simulation and ADP sampling alike).
    #[serde(default = "default_true")]
    pub truncate_arrivals: bool,
    /// Accept `c_d <= c_b`. The structural action-space reduction is not
    /// justified under that sign.
    #[serde(default, skip_serializing_if = "is_false")]
    pub allow_nonincreasing_waiting_cost: bool,
    pub costs: UnitCosts,
    #[serde(rename = "specialty")]
    pub specialties: Vec<SpecialtyConfig>,
}

fn finite_nonneg(x: f64) -> bool {
    x.is_finite() && x >= 0.0
}

fn finite_pos(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

impl ProblemConfig {
    /// Checks every invariant and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let rate_ok = |x: f64| x.is_finite() && x > 0.0 && x <= 1.0;
        if !rate_ok(self.or_availability_rate) {
            bad.push(format!(
                "or_availability_rate must lie in (0, 1], got {}",
                self.or_availability_rate
            ));
        }
        if !rate_ok(self.sicu_availability_rate) {
            bad.push(format!(
                "sicu_availability_rate must lie in (0, 1], got {}",
                self.sicu_availability_rate
            ));
        }
        if !(self.discount.is_finite() && (0.0..1.0).contains(&self.discount)) {
            bad.push(format!("discount must lie in [0, 1), got {}", self.discount));
        }
        let t = self.poisson_truncation_threshold;
        if !(t.is_finite() && t > 0.0 && t < 1.0) {
            bad.push(format!(
                "poisson_truncation_threshold must lie in (0, 1), got {t}"
            ));
        }
        if !finite_nonneg(self.sicu_capacity_bed_days) {
            bad.push(format!(
                "sicu_capacity_bed_days must be >= 0, got {}",
                self.sicu_capacity_bed_days
            ));
        }
        let c = &self.costs;
        for (name, v) in [
            ("costs.surgery_per_priority", c.surgery_per_priority),
            ("costs.waiting_per_priority", c.waiting_per_priority),
            ("costs.or_overtime_per_hour", c.or_overtime_per_hour),
            ("costs.sicu_shortage_per_bed_day", c.sicu_shortage_per_bed_day),
        ] {
            if !finite_nonneg(v) {
                bad.push(format!("{name} must be >= 0, got {v}"));
            }
        }
        if c.waiting_per_priority <= c.surgery_per_priority && !self.allow_nonincreasing_waiting_cost {
            bad.push(format!(
                "costs.waiting_per_priority ({}) must exceed costs.surgery_per_priority ({}); \
                 set allow_nonincreasing_waiting_cost = true to override",
                c.waiting_per_priority, c.surgery_per_priority
            ));
        }
        if self.specialties.is_empty() {
            bad.push("at least one [[specialty]] is required".to_string());
        }
        for (j, s) in self.specialties.iter().enumerate() {
            let tag = if s.name.is_empty() {
                format!("specialty {}", j + 1)
            } else {
                format!("specialty {} ({})", j + 1, s.name)
            };
            if !finite_pos(s.importance) {
                bad.push(format!("{tag}: importance must be > 0, got {}", s.importance));
            }
            if !finite_nonneg(s.or_capacity_hours) {
                bad.push(format!(
                    "{tag}: or_capacity_hours must be >= 0, got {}",
                    s.or_capacity_hours
                ));
            }
            for (name, v) in [
                ("duration_mean_hours", s.duration_mean_hours),
                ("los_mean_days", s.los_mean_days),
            ] {
                if !finite_pos(v) {
                    bad.push(format!("{tag}: {name} must be > 0, got {v}"));
                }
            }
            for (name, v) in [
                ("duration_std_hours", s.duration_std_hours),
                ("los_std_days", s.los_std_days),
            ] {
                if !finite_nonneg(v) {
                    bad.push(format!("{tag}: {name} must be >= 0, got {v}"));
                }
            }
            if s.urgency_groups.is_empty() {
                bad.push(format!("{tag}: at least one urgency group is required"));
            }
            let mut seen = Vec::new();
            for g in &s.urgency_groups {
                if g.coefficient == 0 {
                    bad.push(format!("{tag}: urgency coefficient must be a positive integer"));
                }
                if seen.contains(&g.coefficient) {
                    bad.push(format!(
                        "{tag}: urgency coefficient {} appears more than once",
                        g.coefficient
                    ));
                }
                seen.push(g.coefficient);
                if g.max_wait_weeks == 0 {
                    bad.push(format!(
                        "{tag}, u={}: max_wait_weeks must be >= 1",
                        g.coefficient
                    ));
                }
                if g.arrival_cap.is_some_and(|c| c > MAX_ARRIVAL_CAP) {
                    bad.push(format!(
                        "{tag}, u={}: arrival_cap must be <= {MAX_ARRIVAL_CAP}",
                        g.coefficient
                    ));
                }
                if !finite_nonneg(g.arrival_rate_per_week) {
                    bad.push(format!(
                        "{tag}, u={}: arrival_rate_per_week must be >= 0, got {}",
                        g.coefficient, g.arrival_rate_per_week
                    ));
                }
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(bad))
        }
    }

    /// Parses the TOML form. Syntax and schema errors carry the line and
    /// column of the offending input; the result is validated.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|sp| line_column(text, sp.start))
                .unwrap_or((0, 0));
            Error::Parse {
                line,
                column,
                message: e.message().trim().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Internal(e.to_string()))
    }

    /// Number of patient types `Ξ = Σ_j Σ_u W_ju`.
    pub fn type_count(&self) -> usize {
        self.specialties
            .iter()
            .flat_map(|s| s.urgency_groups.iter())
            .map(|g| g.max_wait_weeks as usize)
            .sum()
    }
}

/// 1-based line and column of a byte offset.
fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text.as_bytes()[..offset];
    let line = before.iter().filter(|&&b| b == b'\n').count() + 1;
    let start = before.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
    let column = String::from_utf8_lossy(&before[start..]).chars().count() + 1;
    (line, column)
}
