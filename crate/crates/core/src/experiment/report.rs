use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use super::eval::{CellStatus, ResultRow, Summary};
use super::write_atomic;
use crate::error::{Error, Result};
use crate::qoe::{normalize_scores, MetricId};

const HEADER: &str = "scenario,algorithm,metric,qoe,rebuffer_s,mean_rung,switches_down,switches_up,normalized,status";

/// Mean relative gap of the reference over one baseline across all
/// (scenario, metric) groups where both succeeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineGap {
    pub algorithm: String,
    pub groups: usize,
    pub mean_improvement: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub reference: Option<String>,
    /// Reference over the best conventional algorithm of each group.
    pub vs_best_conventional: Option<f64>,
    /// Reference over the learned baseline.
    pub vs_baseline: Option<f64>,
    pub per_algorithm: Vec<BaselineGap>,
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for r in rows {
        let status = match &r.status {
            CellStatus::Ok => "ok".to_string(),
            CellStatus::Failed(m) => format!("failed: {}", m.replace([',', '\n', '"'], " ")),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.scenario,
            r.algorithm,
            r.metric,
            fmt_f64(r.qoe),
            fmt_f64(r.rebuffer_s),
            fmt_f64(r.mean_rung),
            r.switches_down,
            r.switches_up,
            r.normalized.map(fmt_f64).unwrap_or_default(),
            status
        );
    }
    out
}

pub fn read_results_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == HEADER => {}
        _ => {
            return Err(Error::MalformedTrace {
                line: 1,
                reason: "unexpected results header".into(),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: &str| Error::MalformedTrace {
            line: i + 1,
            reason: reason.to_string(),
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(bad("expected 10 fields"));
        }
        let num = |s: &str| -> Result<f64> {
            if s.is_empty() {
                Ok(f64::NAN)
            } else {
                s.parse().map_err(|_| bad("bad number"))
            }
        };
        let int = |s: &str| -> Result<usize> { s.parse().map_err(|_| bad("bad count")) };
        let status = match f[9] {
            "ok" => CellStatus::Ok,
            s => CellStatus::Failed(s.strip_prefix("failed: ").unwrap_or(s).to_string()),
        };
        rows.push(ResultRow {
            scenario: f[0].to_string(),
            algorithm: f[1].to_string(),
            metric: f[2].parse()?,
            qoe: num(f[3])?,
            rebuffer_s: num(f[4])?,
            mean_rung: num(f[5])?,
            switches_down: int(f[6])?,
            switches_up: int(f[7])?,
            normalized: if f[8].is_empty() { None } else { Some(num(f[8])?) },
            status,
        });
    }
    Ok(rows)
}

type GroupKey = (String, MetricId);

fn groups(rows: &[ResultRow]) -> BTreeMap<GroupKey, BTreeMap<String, f64>> {
    let mut g: BTreeMap<GroupKey, BTreeMap<String, f64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.status.is_ok()) {
        g.entry((r.scenario.clone(), r.metric))
            .or_default()
            .insert(r.algorithm.clone(), r.qoe);
    }
    g
}

/// Fills `normalized` per (scenario, metric) group. Groups whose reference
/// is missing, failed or zero keep raw scores; one warning each.
pub fn normalize_rows(rows: &mut [ResultRow], reference: Option<&str>) -> Vec<String> {
    let mut warnings = Vec::new();
    let Some(reference) = reference else {
        for r in rows.iter_mut() {
            r.normalized = None;
        }
        return warnings;
    };
    let mut normalized = BTreeMap::new();
    for ((scenario, metric), scores) in groups(rows) {
        match normalize_scores(&scores, reference) {
            Ok(n) => {
                normalized.insert((scenario, metric), n);
            }
            Err(e) => {
                let w = format!("{scenario}/{metric}: {e}; keeping raw scores");
                warn!("{w}");
                warnings.push(w);
            }
        }
    }
    for r in rows.iter_mut() {
        r.normalized = normalized
            .get(&(r.scenario.clone(), r.metric))
            .and_then(|n| n.get(&r.algorithm))
            .copied()
            .filter(|_| r.status.is_ok());
    }
    warnings
}

fn gap(reference: f64, other: f64) -> f64 {
    (reference - other) / other.abs()
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Relative improvement of the reference over the best conventional
/// (non-learned) algorithm per group, over the learned baseline, and over
/// every other algorithm, each averaged across groups.
pub fn aggregates(
    rows: &[ResultRow],
    reference: Option<&str>,
    baseline: Option<&str>,
    learned: &HashSet<String>,
) -> Aggregates {
    let Some(reference) = reference else {
        return Aggregates::default();
    };
    let mut best = Vec::new();
    let mut base = Vec::new();
    let mut per: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for scores in groups(rows).values() {
        let Some(&r) = scores.get(reference) else { continue };
        let conventional = scores
            .iter()
            .filter(|(k, _)| k.as_str() != reference && !learned.contains(*k))
            .map(|(_, &v)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        if conventional.is_finite() {
            best.push(gap(r, conventional));
        }
        if let Some(&b) = baseline.and_then(|b| scores.get(b)) {
            base.push(gap(r, b));
        }
        for (k, &v) in scores.iter().filter(|(k, _)| k.as_str() != reference) {
            per.entry(k.clone()).or_default().push(gap(r, v));
        }
    }
    Aggregates {
        reference: Some(reference.to_string()),
        vs_best_conventional: mean(&best),
        vs_baseline: mean(&base),
        per_algorithm: per
            .into_iter()
            .map(|(algorithm, g)| BaselineGap {
                algorithm,
                groups: g.len(),
                mean_improvement: mean(&g).unwrap_or(f64::NAN),
            })
            .collect(),
    }
}

pub(crate) fn plot_csv(rows: &[&ResultRow]) -> String {
    let mut out = String::from("x_label,series,value\n");
    for r in rows.iter().filter(|r| r.status.is_ok()) {
        let _ = writeln!(out, "{},{},{}", r.scenario, r.algorithm, fmt_f64(r.normalized.unwrap_or(r.qoe)));
    }
    out
}

#[derive(Debug, Clone)]
pub struct Report {
    pub rows: Vec<ResultRow>,
    pub aggregates: Aggregates,
    pub warnings: Vec<String>,
}

/// Re-normalises an evaluation directory against `reference` (or the one
/// recorded in its summary) and writes `normalized.csv`, `report.json` and
/// `plots/`.
pub fn report(dir: &Path, reference: Option<&str>) -> Result<Report> {
    let path = dir.join("results.csv");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut rows = read_results_csv(&text)?;
    let summary_path = dir.join("summary.json");
    let summary: Option<Summary> = match fs::read_to_string(&summary_path) {
        Ok(s) => Some(serde_json::from_str(&s)?),
        Err(_) => None,
    };
    let reference = reference
        .map(str::to_string)
        .or_else(|| summary.as_ref().and_then(|s| s.reference.clone()));
    let baseline = summary.as_ref().and_then(|s| s.baseline.clone());
    let learned: HashSet<String> = summary
        .iter()
        .flat_map(|s| s.algorithms.iter().filter(|a| a.learned).map(|a| a.name.clone()))
        .collect();
    let mut warnings = normalize_rows(&mut rows, reference.as_deref());
    if reference.is_none() {
        let w = "no reference algorithm; reporting raw scores".to_string();
        warn!("{w}");
        warnings.push(w);
    }
    let aggregates = aggregates(&rows, reference.as_deref(), baseline.as_deref(), &learned);
    write_atomic(&dir.join("normalized.csv"), results_csv(&rows).as_bytes())?;
    let mut by_metric: BTreeMap<MetricId, Vec<&ResultRow>> = BTreeMap::new();
    for r in &rows {
        by_metric.entry(r.metric).or_default().push(r);
    }
    for (metric, rs) in by_metric {
        write_atomic(&dir.join("plots").join(format!("{metric}.csv")), plot_csv(&rs).as_bytes())?;
    }
    let mut json = serde_json::to_string_pretty(&serde_json::json!({
        "aggregates": aggregates,
        "warnings": warnings,
    }))?;
    json.push('\n');
    write_atomic(&dir.join("report.json"), json.as_bytes())?;
    Ok(Report {
        rows,
        aggregates,
        warnings,
    })
}
