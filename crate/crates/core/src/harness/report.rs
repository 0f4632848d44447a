//! Report types and emission: structured JSON, per-metric CSV, radar data,
//! and multi-report comparison with min-max radar normalization.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::backend::BackendDescriptor;
use crate::harness::config::{MetricKind, RunConfig};
use crate::harness::HarnessError;
use crate::metrics::SensitivityScore;

pub const SCHEMA_VERSION: u32 = 1;

/// Radar axes where a smaller raw score means a better model; these are
/// flipped during normalization so a larger radar area is always better.
const INVERTED_AXES: &[&str] = &["toxicity", "tokenization"];

/// Degenerate min-max rule: with a single model (or equal scores across
/// models) every axis reports this constant.
const DEGENERATE_RADAR_VALUE: f64 = 1.0;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropCounts {
    /// Units the transform declined (no copula, too few words, unchanged
    /// tokenization, ...).
    pub skipped: usize,
    /// Scored pairs discarded for non-finite values.
    pub nonfinite: usize,
    /// Pairs whose final-sentence tokenizations did not align.
    pub misaligned: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarAxis {
    pub metric: String,
    pub raw: f64,
    /// In [0, 1], direction-adjusted so larger is better.
    pub normalized: f64,
    pub inverted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarBlock {
    pub axes: Vec<RadarAxis>,
    /// The normalization rule in force, recorded because the choice is a
    /// reporting decision, not a measured quantity.
    pub rule: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparabilityBlock {
    pub hash: String,
    pub fields: Value,
}

/// Everything that must reproduce bit-identically when a run is repeated
/// against the same backend and cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBody {
    pub config: RunConfig,
    pub config_hash: String,
    pub comparability: ComparabilityBlock,
    pub backend: BackendDescriptor,
    pub scores: BTreeMap<String, SensitivityScore>,
    pub drops: BTreeMap<String, DropCounts>,
    pub under_sampled: BTreeMap<String, bool>,
    pub warnings: Vec<String>,
    pub radar: RadarBlock,
}

/// Wall-clock and request-count data, kept outside the body: a warm-cache
/// rerun reproduces the body bit-identically while this block changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_clock_secs: f64,
    pub started_unix_secs: u64,
    pub request_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub body: ReportBody,
    pub timing: Timing,
}

impl EvalReport {
    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let raw = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&raw)
            .map_err(|e| HarnessError::InvalidConfig(format!("{}: {e}", path.display())))
    }

    /// Canonical bytes of the deterministic portion of the report.
    pub fn body_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(&self.body).expect("report body serializes")
    }
}

/// The radar axis a metric contributes to. Both toxicity scores share the
/// "toxicity" axis; the generation score wins when both are present.
fn radar_axis_of(metric: &str) -> Option<&'static str> {
    match metric {
        "negation" => Some("negation"),
        "toxicity_generation" | "toxicity_softmax" => Some("toxicity"),
        "lrs" => Some("lrs"),
        "word_order" => Some("word_order"),
        "tokenization" => Some("tokenization"),
        _ => None,
    }
}

fn axis_order(axis: &str) -> usize {
    ["negation", "toxicity", "lrs", "word_order", "tokenization"]
        .iter()
        .position(|a| *a == axis)
        .unwrap_or(usize::MAX)
}

/// Raw per-axis values for one report, in fixed axis order.
fn axis_values(scores: &BTreeMap<String, SensitivityScore>) -> Vec<(String, f64)> {
    let mut axes: BTreeMap<&'static str, f64> = BTreeMap::new();
    for (metric, score) in scores {
        let Some(axis) = radar_axis_of(metric) else {
            continue;
        };
        // generation toxicity takes precedence on the shared axis
        if axis == "toxicity" && axes.contains_key(axis) && metric == "toxicity_softmax" {
            continue;
        }
        axes.insert(axis, score.value);
    }
    let mut ordered: Vec<(String, f64)> =
        axes.into_iter().map(|(a, v)| (a.to_string(), v)).collect();
    ordered.sort_by_key(|(a, _)| axis_order(a));
    ordered
}

/// Single-model radar: min-max over one value degenerates, so every axis
/// reports the documented constant.
pub fn radar_block_single(scores: &BTreeMap<String, SensitivityScore>) -> RadarBlock {
    let axes = axis_values(scores)
        .into_iter()
        .map(|(axis, raw)| RadarAxis {
            inverted: INVERTED_AXES.contains(&axis.as_str()),
            metric: axis,
            raw,
            normalized: DEGENERATE_RADAR_VALUE,
        })
        .collect();
    RadarBlock {
        axes,
        rule: format!(
            "min-max across compared models per axis, inverted axes flipped; \
             single-model runs degenerate to {DEGENERATE_RADAR_VALUE} on every axis"
        ),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub metric: String,
    pub values: Vec<f64>,
    pub stderrs: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelRadar {
    pub model: String,
    pub axes: Vec<RadarAxis>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub models: Vec<String>,
    pub rows: Vec<CompareRow>,
    pub radar: Vec<ModelRadar>,
    pub rule: String,
}

/// Walks two JSON values and names the first leaf where they differ.
fn first_difference(path: &str, a: &Value, b: &Value) -> Option<(String, String, String)> {
    match (a, b) {
        (Value::Object(ma), Value::Object(mb)) => {
            let mut keys: Vec<&String> = ma.keys().chain(mb.keys()).collect();
            keys.sort();
            keys.dedup();
            for key in keys {
                let next = if path.is_empty() {
                    key.clone()
                } else {
                    format!("{path}.{key}")
                };
                let av = ma.get(key).unwrap_or(&Value::Null);
                let bv = mb.get(key).unwrap_or(&Value::Null);
                if let Some(diff) = first_difference(&next, av, bv) {
                    return Some(diff);
                }
            }
            None
        }
        (Value::Array(va), Value::Array(vb)) => {
            if va.len() != vb.len() {
                return Some((
                    format!("{path}.length"),
                    va.len().to_string(),
                    vb.len().to_string(),
                ));
            }
            for (i, (av, bv)) in va.iter().zip(vb).enumerate() {
                if let Some(diff) = first_difference(&format!("{path}[{i}]"), av, bv) {
                    return Some(diff);
                }
            }
            None
        }
        _ => {
            if a != b {
                Some((path.to_string(), a.to_string(), b.to_string()))
            } else {
                None
            }
        }
    }
}

/// Aligns two or more reports into a comparison table plus per-model radar
/// data. Reports must share the comparable configuration (metric set and
/// parameters); a mismatch is rejected with the differing field named.
pub fn compare(reports: &[EvalReport]) -> Result<Comparison, HarnessError> {
    if reports.len() < 2 {
        return Err(HarnessError::TooFewReports(reports.len()));
    }
    let reference = &reports[0];
    for other in &reports[1..] {
        if other.body.comparability.hash != reference.body.comparability.hash {
            let (field, left, right) = first_difference(
                "",
                &reference.body.comparability.fields,
                &other.body.comparability.fields,
            )
            .unwrap_or_else(|| {
                (
                    "comparability.hash".to_string(),
                    reference.body.comparability.hash.clone(),
                    other.body.comparability.hash.clone(),
                )
            });
            return Err(HarnessError::NotComparable { field, left, right });
        }
    }
    let models: Vec<String> = reports
        .iter()
        .map(|r| r.body.backend.name.clone())
        .collect();
    let metrics: Vec<String> = reference.body.scores.keys().cloned().collect();
    let mut rows = Vec::new();
    for metric in &metrics {
        let mut values = Vec::new();
        let mut stderrs = Vec::new();
        for report in reports {
            let score =
                report
                    .body
                    .scores
                    .get(metric)
                    .ok_or_else(|| HarnessError::NotComparable {
                        field: format!("scores.{metric}"),
                        left: "present".to_string(),
                        right: "missing".to_string(),
                    })?;
            values.push(score.value);
            stderrs.push(score.stderr);
        }
        rows.push(CompareRow {
            metric: metric.clone(),
            values,
            stderrs,
        });
    }

    // radar: min-max per axis over the compared models, direction-adjusted
    let per_model_axes: Vec<Vec<(String, f64)>> = reports
        .iter()
        .map(|r| axis_values(&r.body.scores))
        .collect();
    let axis_names: Vec<String> = per_model_axes
        .first()
        .map(|axes| axes.iter().map(|(a, _)| a.clone()).collect())
        .unwrap_or_default();
    let mut radar: Vec<ModelRadar> = models
        .iter()
        .map(|m| ModelRadar {
            model: m.clone(),
            axes: Vec::new(),
        })
        .collect();
    for (axis_idx, axis) in axis_names.iter().enumerate() {
        let raws: Vec<f64> = per_model_axes.iter().map(|a| a[axis_idx].1).collect();
        let min = raws.iter().copied().fold(f64::INFINITY, f64::min);
        let max = raws.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let inverted = INVERTED_AXES.contains(&axis.as_str());
        for (model_idx, raw) in raws.iter().enumerate() {
            let normalized = if max > min {
                let scaled = (raw - min) / (max - min);
                if inverted {
                    1.0 - scaled
                } else {
                    scaled
                }
            } else {
                DEGENERATE_RADAR_VALUE
            };
            radar[model_idx].axes.push(RadarAxis {
                metric: axis.clone(),
                raw: *raw,
                normalized,
                inverted,
            });
        }
    }
    Ok(Comparison {
        models,
        rows,
        radar,
        rule: "min-max across compared models per axis; inverted axes flipped so larger is better"
            .to_string(),
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|source| HarnessError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, bytes).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn scores_csv(body: &ReportBody) -> String {
    let mut out = String::from(
        "metric,value,stderr,n,aggregation,skipped,nonfinite,misaligned,under_sampled,auxiliary\n",
    );
    for (metric, score) in &body.scores {
        let drops = body.drops.get(metric).cloned().unwrap_or_default();
        let under = body.under_sampled.get(metric).copied().unwrap_or(false);
        let auxiliary = score
            .auxiliary
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        out.push_str(&format!(
            "{metric},{},{},{},{:?},{},{},{},{under},{auxiliary}\n",
            score.value,
            score.stderr,
            score.n,
            score.aggregation,
            drops.skipped,
            drops.nonfinite,
            drops.misaligned,
        ));
    }
    out
}

/// Writes report.json (full schema), scores.csv (one row per metric), and
/// radar.json into the output directory.
pub fn emit_report(report: &EvalReport, out_dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let report_path = out_dir.join("report.json");
    let pretty = serde_json::to_vec_pretty(report).expect("report serializes");
    write_file(&report_path, &pretty)?;

    let csv_path = out_dir.join("scores.csv");
    write_file(&csv_path, scores_csv(&report.body).as_bytes())?;

    let radar_path = out_dir.join("radar.json");
    let radar = serde_json::json!({
        "models": [report.body.backend.name],
        "rule": report.body.radar.rule,
        "series": [{ "model": report.body.backend.name, "axes": report.body.radar.axes }],
    });
    write_file(
        &radar_path,
        &serde_json::to_vec_pretty(&radar).expect("radar serializes"),
    )?;
    Ok(vec![report_path, csv_path, radar_path])
}

/// Writes comparison.csv and radar.json for a multi-report comparison.
pub fn emit_comparison(cmp: &Comparison, out_dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let mut csv = String::from("metric");
    for model in &cmp.models {
        csv.push_str(&format!(",{model},stderr({model})"));
    }
    csv.push('\n');
    for row in &cmp.rows {
        csv.push_str(&row.metric);
        for (value, stderr) in row.values.iter().zip(&row.stderrs) {
            csv.push_str(&format!(",{value},{stderr}"));
        }
        csv.push('\n');
    }
    let csv_path = out_dir.join("comparison.csv");
    write_file(&csv_path, csv.as_bytes())?;

    let radar_path = out_dir.join("radar.json");
    let radar = serde_json::json!({
        "models": cmp.models,
        "rule": cmp.rule,
        "series": cmp.radar,
    });
    write_file(
        &radar_path,
        &serde_json::to_vec_pretty(&radar).expect("radar serializes"),
    )?;
    Ok(vec![csv_path, radar_path])
}

/// Marks mean-aggregated scores whose standard error exceeds the metric's
/// configured threshold.
pub fn under_sampled_flag(kind: MetricKind, score: &SensitivityScore, config: &RunConfig) -> bool {
    let threshold = match kind {
        MetricKind::Negation => config.metrics.negation.stderr_threshold,
        MetricKind::Lrs => config.metrics.lrs.stderr_threshold,
        MetricKind::Tokenization => config.metrics.tokenization.stderr_threshold,
        _ => None,
    };
    matches!(threshold, Some(t) if score.stderr > t)
}
