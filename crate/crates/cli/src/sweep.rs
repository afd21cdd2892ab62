use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use admission_core::sim::Stat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{io_at, CliError, Result};
use crate::experiment::{aggregate_all, run_all, write_json, ExperimentSpec, Manifest, Run};
use crate::output::{
    write_csv, SweepRow, SweepSummaryRow, MANIFEST_FILE, SWEEP_FILE, SWEEP_HEADER,
    SWEEP_SUMMARY_FILE, SWEEP_SUMMARY_HEADER,
};

/// A swept parameter, written as `c_d`, `c_o`, `c_e`, `B_<j>`, `R`,
/// `lambda` or `beta`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum SweepParam {
    WaitingCost,
    OvertimeCost,
    ShortageCost,
    /// OR capacity of specialty `j` (1-based).
    OrCapacity(usize),
    SicuCapacity,
    Lambda,
    Beta,
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::WaitingCost => f.write_str("c_d"),
            Self::OvertimeCost => f.write_str("c_o"),
            Self::ShortageCost => f.write_str("c_e"),
            Self::OrCapacity(j) => write!(f, "B_{j}"),
            Self::SicuCapacity => f.write_str("R"),
            Self::Lambda => f.write_str("lambda"),
            Self::Beta => f.write_str("beta"),
        }
    }
}

impl FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "c_d" => Self::WaitingCost,
            "c_o" => Self::OvertimeCost,
            "c_e" => Self::ShortageCost,
            "R" => Self::SicuCapacity,
            "lambda" => Self::Lambda,
            "beta" => Self::Beta,
            _ => {
                let j = s
                    .strip_prefix("B_")
                    .and_then(|j| j.parse::<usize>().ok())
                    .filter(|&j| j >= 1)
                    .ok_or_else(|| {
                        format!("unknown parameter {s:?}; use c_d, c_o, c_e, B_<j>, R, lambda or beta")
                    })?;
                Self::OrCapacity(j)
            }
        })
    }
}

impl From<SweepParam> for String {
    fn from(p: SweepParam) -> Self {
        p.to_string()
    }
}

impl TryFrom<String> for SweepParam {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl SweepParam {
    pub fn apply(self, spec: &mut ExperimentSpec, value: f64) -> Result<()> {
        let cfg = &mut spec.config;
        match self {
            Self::WaitingCost => cfg.costs.waiting_per_priority = value,
            Self::OvertimeCost => cfg.costs.or_overtime_per_hour = value,
            Self::ShortageCost => cfg.costs.sicu_shortage_per_bed_day = value,
            Self::SicuCapacity => cfg.sicu_capacity_bed_days = value,
            Self::OrCapacity(j) => {
                let n = cfg.specialties.len();
                let spec = cfg.specialties.get_mut(j - 1).ok_or_else(|| {
                    CliError::Usage(format!("B_{j} named, but the instance has {n} specialties"))
                })?;
                spec.or_capacity_hours = value;
            }
            Self::Lambda => spec.hyper.lambda = value,
            Self::Beta => spec.hyper.beta = value,
        }
        Ok(())
    }

    fn learner_only(self) -> bool {
        matches!(self, Self::Lambda | Self::Beta)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParam,
    pub values: Vec<f64>,
    /// Master seeds; every grid value runs once per seed.
    pub seeds: Vec<u64>,
    /// The experiment each grid point modifies; its plan seed is replaced.
    pub base: ExperimentSpec,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() || self.values.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Usage("the grid needs finite values".into()));
        }
        if self.seeds.is_empty() {
            return Err(CliError::Usage("at least one seed is required".into()));
        }
        if self.parameter.learner_only() && !self.base.solvers.iter().all(|s| s.is_adp()) {
            return Err(CliError::Usage(format!(
                "{} only affects the adp solvers",
                self.parameter
            )));
        }
        self.base.validate()?;
        if let Self {
            parameter: SweepParam::OrCapacity(j),
            ..
        } = self
        {
            if *j > self.base.config.specialties.len() {
                return Err(CliError::Usage(format!("no specialty {j} in this instance")));
            }
        }
        Ok(())
    }

    fn point(&self, value: f64, seed: u64) -> Result<ExperimentSpec> {
        let mut spec = self.base.clone();
        self.parameter.apply(&mut spec, value)?;
        spec.plan.seed = seed;
        Ok(spec)
    }
}

pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SweepSummaryRow>,
    pub failures: usize,
}

/// Runs every grid point; a failing point is recorded and the rest go on.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutcome> {
    spec.validate()?;
    let points: Vec<(f64, u64)> = spec
        .values
        .iter()
        .flat_map(|&v| spec.seeds.iter().map(move |&s| (v, s)))
        .collect();
    let name = spec.parameter.to_string();
    let results: Vec<Vec<SweepRow>> = points
        .par_iter()
        .map(|&(value, seed)| {
            let row = |policy: &str, metric: &str, ms: Option<(f64, f64)>, status: String| SweepRow {
                parameter: name.clone(),
                value,
                seed,
                policy: policy.to_string(),
                metric: metric.to_string(),
                mean: ms.map(|x| x.0),
                std: ms.map(|x| x.1),
                status,
            };
            match spec.point(value, seed).and_then(|p| run_all(&p, None)) {
                Ok(runs) => aggregate_all(&runs)
                    .into_iter()
                    .map(|a| row(&a.policy, &a.metric, Some((a.mean, a.std)), "ok".into()))
                    .collect(),
                Err(e) => spec
                    .base
                    .solvers
                    .iter()
                    .map(|s| row(s.label(), "", None, format!("error: {e}")))
                    .collect(),
            }
        })
        .collect();
    let rows: Vec<SweepRow> = results.into_iter().flatten().collect();
    let failures = rows.iter().filter(|r| r.status != "ok").count();
    Ok(SweepOutcome {
        summary: summarize(&rows),
        rows,
        failures,
    })
}

/// Seed averages of the successful rows, in grid order.
pub fn summarize(rows: &[SweepRow]) -> Vec<SweepSummaryRow> {
    let mut order: Vec<(usize, String, String)> = Vec::new();
    let mut groups: BTreeMap<(usize, String, String), Vec<f64>> = BTreeMap::new();
    let mut values: Vec<f64> = Vec::new();
    for r in rows {
        let Some(mean) = r.mean.filter(|_| r.status == "ok") else {
            continue;
        };
        let vi = match values.iter().position(|&v| v == r.value) {
            Some(i) => i,
            None => {
                values.push(r.value);
                values.len() - 1
            }
        };
        let key = (vi, r.policy.clone(), r.metric.clone());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(mean);
    }
    let parameter = rows.first().map(|r| r.parameter.clone()).unwrap_or_default();
    order
        .into_iter()
        .map(|key| {
            let xs = &groups[&key];
            let st = Stat::of(xs.iter().copied());
            SweepSummaryRow {
                parameter: parameter.clone(),
                value: values[key.0],
                policy: key.1,
                metric: key.2,
                mean: st.mean,
                std: st.std,
                seeds: xs.len() as u32,
            }
        })
        .collect()
}

/// Runs the sweep and writes `sweep.csv`, `sweep_summary.csv` and
/// `manifest.json` into `out`.
pub fn write_sweep(spec: &SweepSpec, out: &Path) -> Result<(SweepOutcome, Vec<PathBuf>)> {
    let outcome = run_sweep(spec)?;
    fs::create_dir_all(out).map_err(io_at(out))?;
    let a = out.join(SWEEP_FILE);
    write_csv(&a, &SWEEP_HEADER, &outcome.rows)?;
    let b = out.join(SWEEP_SUMMARY_FILE);
    write_csv(&b, &SWEEP_SUMMARY_HEADER, &outcome.summary)?;
    let c = out.join(MANIFEST_FILE);
    write_json(&c, &Manifest::new(Run::Sweep(spec.clone())))?;
    Ok((outcome, vec![a, b, c]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_names_round_trip() {
        for s in ["c_d", "c_o", "c_e", "B_1", "B_12", "R", "lambda", "beta"] {
            let p: SweepParam = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        for s in ["B_0", "B_", "b_1", "gamma"] {
            assert!(s.parse::<SweepParam>().is_err(), "{s}");
        }
    }

    #[test]
    fn summary_averages_over_seeds() {
        let row = |value, seed, mean| SweepRow {
            parameter: "c_o".into(),
            value,
            seed,
            policy: "myopic".into(),
            metric: "cost".into(),
            mean: Some(mean),
            std: Some(0.0),
            status: "ok".into(),
        };
        let mut failed = row(2.0, 3, 0.0);
        failed.mean = None;
        failed.std = None;
        failed.status = "error: boom".into();
        let rows = vec![row(1.0, 1, 10.0), row(1.0, 2, 20.0), row(2.0, 1, 5.0), failed];
        let s = summarize(&rows);
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].value, s[0].mean, s[0].seeds), (1.0, 15.0, 2));
        assert_eq!((s[1].value, s[1].mean, s[1].seeds), (2.0, 5.0, 1));
    }
}
