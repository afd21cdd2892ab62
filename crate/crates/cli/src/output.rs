//! CSV outputs and their schema checks.
//!
//! | file | one row per |
//! |------|-------------|
//! | `weeks.csv` | policy × week |
//! | `aggregate.csv` | policy × metric |
//! | `sweep.csv` | grid value × seed × policy × metric |
//! | `sweep_summary.csv` | grid value × policy × metric, averaged over seeds |

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use admission_core::sim::SimulationReport;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{io_at, CliError, Result};

pub const WEEKS_FILE: &str = "weeks.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const SWEEP_SUMMARY_FILE: &str = "sweep_summary.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SOLVE_FILE: &str = "solve.json";
pub const TABLE_FILE: &str = "value_table.bin";

/// Columns holding decision wall times; they are the only non-reproducible
/// values in the CSV outputs.
pub const WALL_TIME_COLUMNS: [&str; 1] = ["wall_ms"];
/// Aggregate metrics derived from wall times.
pub const WALL_TIME_METRICS: [&str; 1] = ["wall_ms"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeekRow {
    pub policy: String,
    pub week: u32,
    pub waiting: u64,
    pub scheduled: u64,
    pub patient_cost: f64,
    pub hospital_cost_mean: f64,
    pub hospital_cost_std: f64,
    pub cost: f64,
    pub overtime_mean: f64,
    pub overtime_std: f64,
    pub shortage_mean: f64,
    pub shortage_std: f64,
    pub wall_ms: f64,
    pub evaluated_actions: f64,
    pub feasible_actions: f64,
    /// Scheduled counts in canonical type order, space separated.
    pub action: String,
    /// Arrivals per urgency group, space separated.
    pub arrivals: String,
}

pub const WEEKS_HEADER: [&str; 17] = [
    "policy",
    "week",
    "waiting",
    "scheduled",
    "patient_cost",
    "hospital_cost_mean",
    "hospital_cost_std",
    "cost",
    "overtime_mean",
    "overtime_std",
    "shortage_mean",
    "shortage_std",
    "wall_ms",
    "evaluated_actions",
    "feasible_actions",
    "action",
    "arrivals",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub policy: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
}

pub const AGGREGATE_HEADER: [&str; 4] = ["policy", "metric", "mean", "std"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: String,
    pub value: f64,
    pub seed: u64,
    pub policy: String,
    pub metric: String,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    /// `ok`, or `error: <message>` for a failed grid point.
    pub status: String,
}

pub const SWEEP_HEADER: [&str; 8] = [
    "parameter",
    "value",
    "seed",
    "policy",
    "metric",
    "mean",
    "std",
    "status",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummaryRow {
    pub parameter: String,
    pub value: f64,
    pub policy: String,
    pub metric: String,
    /// Mean over seeds of the per-seed means.
    pub mean: f64,
    /// Sample standard deviation over seeds.
    pub std: f64,
    pub seeds: u32,
}

pub const SWEEP_SUMMARY_HEADER: [&str; 7] =
    ["parameter", "value", "policy", "metric", "mean", "std", "seeds"];

fn join<T: ToString>(xs: impl IntoIterator<Item = T>) -> String {
    xs.into_iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn week_rows(report: &SimulationReport) -> Vec<WeekRow> {
    report
        .weeks
        .iter()
        .map(|w| WeekRow {
            policy: report.policy.clone(),
            week: w.week,
            waiting: w.waiting,
            scheduled: w.scheduled,
            patient_cost: w.patient_cost,
            hospital_cost_mean: w.hospital_cost.mean,
            hospital_cost_std: w.hospital_cost.std,
            cost: w.cost,
            overtime_mean: w.total_overtime.mean,
            overtime_std: w.total_overtime.std,
            shortage_mean: w.shortage.mean,
            shortage_std: w.shortage.std,
            wall_ms: w.wall_ms,
            evaluated_actions: w.evaluated_actions,
            feasible_actions: w.feasible_actions,
            action: join(w.action.iter()),
            arrivals: join(w.arrivals.iter()),
        })
        .collect()
}

/// Metric rows of one report. Specialties are numbered from 1; waiting-time
/// rows are named `wait_<specialty>_<urgency coefficient>`.
pub fn aggregate_rows(report: &SimulationReport) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    let mut push = |metric: String, mean: f64, std: f64| {
        rows.push(AggregateRow {
            policy: report.policy.clone(),
            metric,
            mean,
            std,
        })
    };
    push("cost".into(), report.cost.mean, report.cost.std);
    push("patient_cost".into(), report.patient_cost.mean, report.patient_cost.std);
    push("hospital_cost".into(), report.hospital_cost.mean, report.hospital_cost.std);
    push("overtime".into(), report.total_overtime.mean, report.total_overtime.std);
    for (j, s) in report.overtime.iter().enumerate() {
        push(format!("overtime_{}", j + 1), s.mean, s.std);
    }
    push("shortage".into(), report.shortage.mean, report.shortage.std);
    for g in &report.waiting {
        push(format!("wait_{}_{}", g.specialty + 1, g.urgency), g.mean, g.std);
    }
    push("waiting_list".into(), report.waiting_list.mean, report.waiting_list.std);
    push("wall_ms".into(), report.wall_ms.mean, report.wall_ms.std);
    push("action_ratio".into(), report.action_ratio(), 0.0);
    rows
}

pub fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(io_at(path))?;
    Ok(())
}

/// The CSV files this crate writes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CsvKind {
    Weeks,
    Aggregate,
    Sweep,
    SweepSummary,
}

impl CsvKind {
    pub fn header(self) -> &'static [&'static str] {
        match self {
            Self::Weeks => &WEEKS_HEADER,
            Self::Aggregate => &AGGREGATE_HEADER,
            Self::Sweep => &SWEEP_HEADER,
            Self::SweepSummary => &SWEEP_SUMMARY_HEADER,
        }
    }

    pub fn for_file(name: &str) -> Option<Self> {
        match name {
            WEEKS_FILE => Some(Self::Weeks),
            AGGREGATE_FILE => Some(Self::Aggregate),
            SWEEP_FILE => Some(Self::Sweep),
            SWEEP_SUMMARY_FILE => Some(Self::SweepSummary),
            _ => None,
        }
    }
}

fn read_rows<T: DeserializeOwned>(path: &Path, header: &[&str]) -> Result<Vec<T>> {
    let schema = |message: String| CliError::Schema {
        path: path.to_path_buf(),
        message,
    };
    let mut r = csv::Reader::from_path(path)?;
    let got: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if got != header {
        return Err(schema(format!("header {got:?} differs from {header:?}")));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.deserialize().enumerate() {
        rows.push(rec.map_err(|e| schema(format!("row {}: {e}", i + 2)))?);
    }
    Ok(rows)
}

fn counts_ok(s: &str) -> bool {
    s.is_empty() || s.split(' ').all(|x| x.parse::<u32>().is_ok())
}

/// Checks the header, the column types and the row invariants of one file;
/// returns the number of data rows.
pub fn validate_csv(path: &Path, kind: CsvKind) -> Result<usize> {
    let bad = |row: usize, message: &str| CliError::Schema {
        path: path.to_path_buf(),
        message: format!("row {}: {message}", row + 2),
    };
    let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
    match kind {
        CsvKind::Weeks => {
            let rows: Vec<WeekRow> = read_rows(path, kind.header())?;
            let mut last: HashMap<&str, u32> = HashMap::new();
            for (i, r) in rows.iter().enumerate() {
                let nums = [
                    r.patient_cost,
                    r.hospital_cost_mean,
                    r.hospital_cost_std,
                    r.cost,
                    r.overtime_mean,
                    r.overtime_std,
                    r.shortage_mean,
                    r.shortage_std,
                    r.wall_ms,
                    r.evaluated_actions,
                    r.feasible_actions,
                ];
                if !finite(&nums) || nums.iter().any(|&x| x < 0.0) {
                    return Err(bad(i, "numeric fields must be finite and non-negative"));
                }
                let sum = r.patient_cost + r.hospital_cost_mean;
                if (r.cost - sum).abs() > 1e-9 * sum.max(1.0) {
                    return Err(bad(i, "cost differs from patient_cost + hospital_cost_mean"));
                }
                if r.evaluated_actions > r.feasible_actions {
                    return Err(bad(i, "more evaluated than feasible actions"));
                }
                if !counts_ok(&r.action) || !counts_ok(&r.arrivals) {
                    return Err(bad(i, "action and arrivals must be space-separated counts"));
                }
                let prev = last.insert(&r.policy, r.week).unwrap_or(0);
                if r.week != prev + 1 {
                    return Err(bad(i, "weeks of a policy must run 1, 2, ..."));
                }
            }
            Ok(rows.len())
        }
        CsvKind::Aggregate => {
            let rows: Vec<AggregateRow> = read_rows(path, kind.header())?;
            for (i, r) in rows.iter().enumerate() {
                if r.metric.is_empty() || r.policy.is_empty() {
                    return Err(bad(i, "policy and metric must be named"));
                }
                if !finite(&[r.mean, r.std]) || r.std < 0.0 {
                    return Err(bad(i, "mean and std must be finite, std non-negative"));
                }
            }
            Ok(rows.len())
        }
        CsvKind::Sweep => {
            let rows: Vec<SweepRow> = read_rows(path, kind.header())?;
            for (i, r) in rows.iter().enumerate() {
                match (r.status.as_str(), r.mean, r.std) {
                    ("ok", Some(m), Some(s)) if m.is_finite() && s.is_finite() && s >= 0.0 => {
                        if r.metric.is_empty() {
                            return Err(bad(i, "ok rows need a metric"));
                        }
                    }
                    (st, None, None) if st.starts_with("error: ") => {}
                    _ => return Err(bad(i, "status must be ok with values or error without")),
                }
                if !r.value.is_finite() {
                    return Err(bad(i, "grid value must be finite"));
                }
            }
            Ok(rows.len())
        }
        CsvKind::SweepSummary => {
            let rows: Vec<SweepSummaryRow> = read_rows(path, kind.header())?;
            for (i, r) in rows.iter().enumerate() {
                if !finite(&[r.value, r.mean, r.std]) || r.std < 0.0 || r.seeds == 0 {
                    return Err(bad(i, "values must be finite with at least one seed"));
                }
            }
            Ok(rows.len())
        }
    }
}

/// Validates every known CSV file in `dir`.
pub fn validate_dir(dir: &Path) -> Result<Vec<(PathBuf, usize)>> {
    let mut out = Vec::new();
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .map_err(io_at(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for path in entries {
        let kind = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(CsvKind::for_file);
        if let Some(kind) = kind {
            let n = validate_csv(&path, kind)?;
            out.push((path, n));
        }
    }
    Ok(out)
}

/// Side-by-side text table of several reports, one line per policy.
pub fn comparison_table(reports: &[&SimulationReport]) -> String {
    let mut waits: Vec<String> = Vec::new();
    for r in reports {
        for g in &r.waiting {
            let k = format!("w{}{}", g.specialty + 1, g.urgency);
            if !waits.contains(&k) {
                waits.push(k);
            }
        }
    }
    let mut s = format!(
        "{:<10} {:>10} {:>10} {:>10} {:>10} {:>8} {:>8}",
        "policy", "c", "sd(c)", "c_p", "c_h", "o", "e"
    );
    for w in &waits {
        let _ = write!(s, " {w:>7}");
    }
    let _ = writeln!(s, " {:>9} {:>8}", "t(ms)", "A*/A");
    for r in reports {
        let _ = write!(
            s,
            "{:<10} {:>10.1} {:>10.1} {:>10.1} {:>10.1} {:>8.3} {:>8.3}",
            r.policy,
            r.cost.mean,
            r.cost.std,
            r.patient_cost.mean,
            r.hospital_cost.mean,
            r.total_overtime.mean,
            r.shortage.mean
        );
        for w in &waits {
            let v = r
                .waiting
                .iter()
                .find(|g| format!("w{}{}", g.specialty + 1, g.urgency) == *w)
                .map_or(f64::NAN, |g| g.mean);
            let _ = write!(s, " {v:>7.3}");
        }
        let _ = writeln!(s, " {:>9.3} {:>8.4}", r.wall_ms.mean, r.action_ratio());
    }
    s
}
