//! Cross-system comparison tables: per-system pooled edit counts, mean
//! fidelity, and mean latency are combined into composite scores and
//! rendered as Markdown, CSV, or JSON. JSON carries raw ratios; the two
//! display formats show percentages with two decimals.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fal::{compute_fal, FalConfig, FalScore, FalWeights, FidelityScore, LatencyMode};
use crate::metrics::{EditCounts, MetricCounts};

/// Aggregated inputs for one system: pooled counts over its corpus, mean
/// fidelity F, and mean successful latency L in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemInputs {
    pub system: String,
    pub counts: MetricCounts,
    #[serde(rename = "F")]
    pub fidelity: f64,
    #[serde(rename = "L")]
    pub latency_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub system: String,
    pub mer: Option<f64>,
    pub cer: Option<f64>,
    pub wer: Option<f64>,
    pub fal: FalScore,
    #[serde(rename = "F")]
    pub fidelity: f64,
    #[serde(rename = "L")]
    pub latency_s: f64,
}

/// Rows are sorted by composite score descending, system id ascending on
/// exact ties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub mode: LatencyMode,
    pub weights: FalWeights,
    #[serde(rename = "M")]
    pub max_latency: f64,
    pub rows: Vec<ComparisonRow>,
}

/// The ceiling M: an explicit override, otherwise the largest latency in
/// the comparison set.
fn resolve_max_latency(inputs: &[SystemInputs], override_m: Option<f64>) -> Result<f64> {
    if let Some(m) = override_m {
        if !m.is_finite() || m <= 0.0 {
            return Err(Error::Config(format!("max latency M must be positive, got {m}")));
        }
        return Ok(m);
    }
    inputs
        .iter()
        .map(|s| s.latency_s)
        .fold(None, |acc: Option<f64>, l| Some(acc.map_or(l, |a| a.max(l))))
        .ok_or_else(|| Error::Usage("comparison needs at least one system".into()))
}

pub fn build_comparison(
    inputs: &[SystemInputs],
    weights: FalWeights,
    mode: LatencyMode,
    override_m: Option<f64>,
) -> Result<ComparisonReport> {
    if inputs.is_empty() {
        return Err(Error::Usage("comparison needs at least one system".into()));
    }
    for (i, a) in inputs.iter().enumerate() {
        if inputs[..i].iter().any(|b| b.system == a.system) {
            return Err(Error::Usage(format!("duplicate system id {:?}", a.system)));
        }
    }
    let max_latency = resolve_max_latency(inputs, override_m)?;
    let cfg = FalConfig::new(weights, max_latency, mode)?;
    let mut rows = Vec::with_capacity(inputs.len());
    for input in inputs {
        let fidelity = FidelityScore::new(input.fidelity, "aggregate", "")?;
        let fal = compute_fal(&fidelity, &input.counts.mer, input.latency_s, &cfg)?;
        rows.push(ComparisonRow {
            system: input.system.clone(),
            mer: input.counts.mer.rate(),
            cer: input.counts.cer.rate(),
            wer: input.counts.wer.rate(),
            fal,
            fidelity: input.fidelity,
            latency_s: input.latency_s,
        });
    }
    rows.sort_by(|a, b| {
        b.fal
            .total
            .partial_cmp(&a.fal.total)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.system.cmp(&b.system))
    });
    Ok(ComparisonReport { mode, weights, max_latency, rows })
}

/// Rate as a two-decimal percentage, "-" when the basis was empty.
fn pct(rate: Option<f64>) -> String {
    match rate {
        Some(r) => format!("{:.2}", r * 100.0),
        None => "-".to_string(),
    }
}

pub fn render_markdown(report: &ComparisonReport) -> String {
    let mut out = String::from("| System | MER% | CER% | WER% | FAL |\n|---|---:|---:|---:|---:|\n");
    for row in &report.rows {
        out.push_str(&format!(
            "| {} | {} | {} | {} | {:.2} |\n",
            row.system,
            pct(row.mer),
            pct(row.cer),
            pct(row.wer),
            row.fal.total
        ));
    }
    out
}

pub fn render_csv(report: &ComparisonReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["system", "mer_pct", "cer_pct", "wer_pct", "fal"])
        .map_err(|e| Error::Io(e.to_string()))?;
    for row in &report.rows {
        let blank_if_undefined = |r: Option<f64>| r.map(|v| format!("{:.2}", v * 100.0)).unwrap_or_default();
        w.write_record([
            row.system.clone(),
            blank_if_undefined(row.mer),
            blank_if_undefined(row.cer),
            blank_if_undefined(row.wer),
            format!("{:.2}", row.fal.total),
        ])
        .map_err(|e| Error::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

/// One system's composite-score inputs where only the accuracy basis
/// matters (single EditCounts, not all three).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FalInput {
    pub id: String,
    #[serde(rename = "F")]
    pub fidelity: f64,
    pub counts: EditCounts,
    #[serde(rename = "L")]
    pub latency_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FalTerms {
    pub fidelity: f64,
    pub accuracy: f64,
    pub latency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FalSystemEntry {
    pub id: String,
    #[serde(rename = "F")]
    pub fidelity: f64,
    pub counts: EditCounts,
    #[serde(rename = "L")]
    pub latency_s: f64,
    pub terms: FalTerms,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FalReport {
    pub mode: LatencyMode,
    pub weights: FalWeights,
    #[serde(rename = "M")]
    pub max_latency: f64,
    pub systems: Vec<FalSystemEntry>,
}

pub fn build_fal_report(
    inputs: &[FalInput],
    weights: FalWeights,
    mode: LatencyMode,
    override_m: Option<f64>,
) -> Result<FalReport> {
    if inputs.is_empty() {
        return Err(Error::Usage("composite report needs at least one system".into()));
    }
    let max_latency = match override_m {
        Some(m) if m.is_finite() && m > 0.0 => m,
        Some(m) => {
            return Err(Error::Config(format!("max latency M must be positive, got {m}")))
        }
        None => inputs.iter().map(|s| s.latency_s).fold(f64::MIN, f64::max),
    };
    let cfg = FalConfig::new(weights, max_latency, mode)?;
    let mut systems = Vec::with_capacity(inputs.len());
    for input in inputs {
        let fidelity = FidelityScore::new(input.fidelity, "aggregate", "")?;
        let fal = compute_fal(&fidelity, &input.counts, input.latency_s, &cfg)?;
        systems.push(FalSystemEntry {
            id: input.id.clone(),
            fidelity: input.fidelity,
            counts: input.counts,
            latency_s: input.latency_s,
            terms: FalTerms {
                fidelity: fal.fidelity_term,
                accuracy: fal.accuracy_term,
                latency: fal.latency_term,
            },
            total: fal.total,
        });
    }
    Ok(FalReport { mode, weights, max_latency, systems })
}
