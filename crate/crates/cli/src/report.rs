//! Merges the artifacts of a sweep into one JSON summary.

use crate::artifacts::Artifacts;
use crate::error::CliError;
use serde::Serialize;
use serde_json::Value;
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

const KINDS: [&str; 7] = ["validate", "delta", "rpf", "cayley", "flatten", "decay", "twist"];

#[derive(Debug, Default, Serialize)]
struct QSummary {
    epsilon: Option<f64>,
    /// Largest ratio of consecutive block norms in the decay curves.
    decay_block_factor: Option<f64>,
    decay_below_bound: Option<bool>,
    flatten_mu_ratio: Option<f64>,
    flatten_passed: Option<bool>,
}

#[derive(Debug, Serialize)]
struct Uniformity {
    min_epsilon: Option<f64>,
    max_decay_block_factor: Option<f64>,
    all_decay_below_bound: bool,
    all_flatten_passed: bool,
}

#[derive(Debug, Serialize)]
struct Report {
    artifacts: Vec<String>,
    merged: BTreeMap<String, Vec<Value>>,
    per_q: BTreeMap<u64, QSummary>,
    uniformity: Uniformity,
}

fn kind_of(name: &str) -> Option<&'static str> {
    KINDS.iter().copied().find(|k| name.starts_with(&format!("{k}-")))
}

fn read_csv(path: &Path) -> Result<Vec<BTreeMap<String, String>>, CliError> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec?);
    }
    Ok(rows)
}

fn num(row: &BTreeMap<String, String>, key: &str) -> Option<f64> {
    row.get(key)?.parse().ok()
}

pub fn report(dir: &Path, out: &Artifacts) -> Result<(), CliError> {
    let mut names: Vec<String> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| kind_of(n).is_some())
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(CliError::Validation(format!("no artifacts in {}", dir.display())));
    }
    let mut merged: BTreeMap<String, Vec<Value>> = BTreeMap::new();
    let mut per_q: BTreeMap<u64, QSummary> = BTreeMap::new();
    for name in &names {
        let kind = kind_of(name).expect("filtered");
        let path = dir.join(name);
        let value = if name.ends_with(".json") {
            serde_json::from_str::<Value>(&fs::read_to_string(&path)?)?
        } else if name.ends_with(".csv") {
            let rows = read_csv(&path)?;
            summarize_csv(kind, &rows, &mut per_q);
            serde_json::to_value(&rows)?
        } else {
            continue;
        };
        if kind == "flatten" {
            if let Some(q) = value.get("q").and_then(Value::as_u64) {
                let s = per_q.entry(q).or_default();
                s.flatten_mu_ratio = value.get("mu_ratio").and_then(Value::as_f64);
                s.flatten_passed = value.get("passed").and_then(Value::as_bool);
            }
        }
        merged.entry(kind.to_string()).or_default().push(serde_json::json!({ "file": name, "data": value }));
    }
    let eps: Vec<f64> = per_q.values().filter_map(|s| s.epsilon).collect();
    let factors: Vec<f64> = per_q.values().filter_map(|s| s.decay_block_factor).collect();
    let uniformity = Uniformity {
        min_epsilon: eps.iter().copied().reduce(f64::min),
        max_decay_block_factor: factors.iter().copied().reduce(f64::max),
        all_decay_below_bound: per_q.values().all(|s| s.decay_below_bound != Some(false)),
        all_flatten_passed: per_q.values().all(|s| s.flatten_passed != Some(false)),
    };
    out.json("report", &Report { artifacts: names, merged, per_q, uniformity })
}

fn summarize_csv(kind: &str, rows: &[BTreeMap<String, String>], per_q: &mut BTreeMap<u64, QSummary>) {
    match kind {
        "cayley" => {
            for row in rows {
                if let (Some(q), Some(e)) = (row.get("q").and_then(|v| v.parse().ok()), num(row, "epsilon")) {
                    let s = per_q.entry(q).or_default();
                    s.epsilon = Some(s.epsilon.map_or(e, |old: f64| old.min(e)));
                }
            }
        }
        "decay" => {
            let mut by_q: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
            for row in rows {
                if let (Some(q), Some(n), Some(b)) = (row.get("q").and_then(|v| v.parse().ok()), num(row, "norm"), num(row, "bound")) {
                    by_q.entry(q).or_default().push((n, b));
                }
            }
            for (q, pts) in by_q {
                let factor = pts.windows(2).filter(|w| w[0].0 > 0.0).map(|w| w[1].0 / w[0].0).fold(0.0, f64::max);
                let below = pts.iter().all(|(n, b)| n <= b);
                let s = per_q.entry(q).or_default();
                s.decay_block_factor = Some(s.decay_block_factor.map_or(factor, |old: f64| old.max(factor)));
                s.decay_below_bound = Some(s.decay_below_bound.unwrap_or(true) && below);
            }
        }
        _ => {}
    }
}
