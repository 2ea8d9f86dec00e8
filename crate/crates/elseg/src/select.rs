//! Model selection: per-model median metrics, the Pareto frontier of the
//! precision/recall multi-objective, and the final choice by Jaccard index
//! among frontier members.
//!
//! Medians are lower medians (a realized sample, not an interpolation) over
//! the defined samples only; a model with no defined sample for some metric
//! is excluded from selection rather than scored with a made-up value.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{lower_median, MetricRow, MetricSample};
use crate::segmenter::ModelSpec;

/// One candidate model with its per-image metric samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub id: String,
    /// Full spec when known; selection itself needs only the identity.
    pub spec: Option<ModelSpec>,
    pub samples: Vec<MetricSample>,
}

/// Median metrics of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredModel {
    pub id: String,
    pub precision: f64,
    pub recall: f64,
    pub jaccard: f64,
}

/// Lower median of each metric over the defined samples; errors when a
/// metric has no defined sample at all.
pub fn medians(record: &ModelRecord) -> Result<ScoredModel> {
    let collect = |f: fn(&MetricSample) -> Option<f64>| -> Vec<f64> {
        record.samples.iter().filter_map(f).collect()
    };
    let precision = lower_median(&collect(|s| s.precision)).ok_or(Error::NoDefinedSamples {
        metric: "precision",
    })?;
    let recall = lower_median(&collect(|s| s.recall))
        .ok_or(Error::NoDefinedSamples { metric: "recall" })?;
    let jaccard = lower_median(&collect(|s| s.jaccard))
        .ok_or(Error::NoDefinedSamples { metric: "jaccard" })?;
    Ok(ScoredModel {
        id: record.id.clone(),
        precision,
        recall,
        jaccard,
    })
}

/// Score every record, returning the scored models and the ids excluded for
/// having an undefined median.
pub fn score_records(records: &[ModelRecord]) -> (Vec<ScoredModel>, Vec<String>) {
    let mut scored = Vec::new();
    let mut excluded = Vec::new();
    for record in records {
        match medians(record) {
            Ok(s) => scored.push(s),
            Err(_) => excluded.push(record.id.clone()),
        }
    }
    (scored, excluded)
}

/// Non-dominated subset under weak dominance with at least one strict
/// inequality, sorted by ascending precision.
pub fn pareto_frontier(models: &[ScoredModel]) -> Result<Vec<ScoredModel>> {
    if models.is_empty() {
        return Err(Error::EmptyInput {
            operation: "pareto_frontier",
        });
    }
    // Sweep in order of decreasing precision; a model survives iff its
    // recall strictly exceeds every recall seen at higher precision, with
    // exact (precision, recall) duplicates kept together.
    let mut order: Vec<&ScoredModel> = models.iter().collect();
    order.sort_by(|a, b| {
        b.precision
            .partial_cmp(&a.precision)
            .expect("metric values are finite")
            .then(b.recall.partial_cmp(&a.recall).expect("finite"))
            .then(a.id.cmp(&b.id))
    });
    let mut frontier: Vec<ScoredModel> = Vec::new();
    let mut best_recall = f64::NEG_INFINITY;
    let mut i = 0;
    while i < order.len() {
        // Group of equal precision.
        let mut j = i;
        while j < order.len() && order[j].precision == order[i].precision {
            j += 1;
        }
        // Within the group only maximal-recall members can survive.
        let group_max = order[i].recall;
        if group_max > best_recall {
            for model in &order[i..j] {
                if model.recall == group_max {
                    frontier.push((*model).clone());
                }
            }
            best_recall = group_max;
        }
        i = j;
    }
    frontier.sort_by(|a, b| {
        a.precision
            .partial_cmp(&b.precision)
            .expect("finite")
            .then(a.id.cmp(&b.id))
    });
    Ok(frontier)
}

/// The frontier member maximizing the median Jaccard index; ties broken by
/// higher precision, then lexicographically smaller id.
pub fn select_best(models: &[ScoredModel]) -> Result<ScoredModel> {
    let frontier = pareto_frontier(models)?;
    let best = frontier
        .into_iter()
        .max_by(|a, b| {
            a.jaccard
                .partial_cmp(&b.jaccard)
                .expect("finite")
                .then(a.precision.partial_cmp(&b.precision).expect("finite"))
                .then(b.id.cmp(&a.id))
        })
        .expect("frontier of a non-empty set is non-empty");
    Ok(best)
}

/// Result of a selection run, as written to `selection.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Medians of every model that could be scored.
    pub models: Vec<ScoredModel>,
    /// Models excluded because some median was undefined.
    pub excluded: Vec<String>,
    /// Frontier member ids in ascending precision order.
    pub frontier: Vec<String>,
    pub best: String,
}

/// Score, filter and select in one step.
pub fn select(records: &[ModelRecord]) -> Result<Selection> {
    let (mut scored, excluded) = score_records(records);
    scored.sort_by(|a, b| a.id.cmp(&b.id));
    let frontier = pareto_frontier(&scored)?;
    let best = select_best(&scored)?;
    Ok(Selection {
        models: scored,
        excluded,
        frontier: frontier.into_iter().map(|m| m.id).collect(),
        best: best.id,
    })
}

/// Group metric CSV rows into one record per model id, in first-seen order.
pub fn records_from_rows(rows: &[MetricRow]) -> Vec<ModelRecord> {
    let mut order = Vec::new();
    let mut grouped: BTreeMap<String, Vec<MetricSample>> = BTreeMap::new();
    for row in rows {
        if !grouped.contains_key(&row.model_id) {
            order.push(row.model_id.clone());
        }
        grouped
            .entry(row.model_id.clone())
            .or_default()
            .push(row.to_sample());
    }
    order
        .into_iter()
        .map(|id| {
            let samples = grouped.remove(&id).unwrap_or_default();
            ModelRecord {
                id,
                spec: None,
                samples,
            }
        })
        .collect()
}

/// Scatter of model medians with the frontier polyline, mirroring the
/// selection figures. Plain hand-rolled SVG; no styling dependencies.
pub fn plot_pareto_svg(
    models: &[ScoredModel],
    frontier_ids: &[String],
    best_id: &str,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let (size, margin) = (480.0, 50.0);
    let span = size - 2.0 * margin;
    let sx = |p: f64| margin + p.clamp(0.0, 1.0) * span;
    let sy = |r: f64| size - margin - r.clamp(0.0, 1.0) * span;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" \
         viewBox=\"0 0 {size} {size}\">\n"
    ));
    svg.push_str(&format!(
        "  <rect width=\"{size}\" height=\"{size}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "  <line x1=\"{m}\" y1=\"{b}\" x2=\"{e}\" y2=\"{b}\" stroke=\"black\"/>\n  \
         <line x1=\"{m}\" y1=\"{b}\" x2=\"{m}\" y2=\"{m}\" stroke=\"black\"/>\n",
        m = margin,
        b = size - margin,
        e = size - margin
    ));
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" font-size=\"12\">precision</text>\n",
        size / 2.0 - 24.0,
        size - 12.0
    ));
    svg.push_str(&format!(
        "  <text x=\"12\" y=\"{}\" font-size=\"12\" transform=\"rotate(-90 12 {})\">recall</text>\n",
        size / 2.0,
        size / 2.0
    ));

    let mut frontier: Vec<&ScoredModel> = models
        .iter()
        .filter(|m| frontier_ids.contains(&m.id))
        .collect();
    frontier.sort_by(|a, b| a.precision.partial_cmp(&b.precision).expect("finite"));
    if frontier.len() > 1 {
        let points: Vec<String> = frontier
            .iter()
            .map(|m| format!("{:.2},{:.2}", sx(m.precision), sy(m.recall)))
            .collect();
        svg.push_str(&format!(
            "  <polyline points=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>\n",
            points.join(" ")
        ));
    }
    for model in models {
        let on_frontier = frontier_ids.contains(&model.id);
        svg.push_str(&format!(
            "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"{}\"><title>{}</title></circle>\n",
            sx(model.precision),
            sy(model.recall),
            if on_frontier { "black" } else { "gray" },
            model.id
        ));
    }
    if let Some(best) = models.iter().find(|m| m.id == best_id) {
        svg.push_str(&format!(
            "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"8\" fill=\"none\" stroke=\"red\" \
             stroke-width=\"2\"/>\n",
            sx(best.precision),
            sy(best.recall)
        ));
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
pub(crate) mod oracle {
    use super::ScoredModel;

    /// O(n^2) pairwise dominance check.
    pub fn frontier_brute(models: &[ScoredModel]) -> Vec<ScoredModel> {
        let mut kept: Vec<ScoredModel> = models
            .iter()
            .filter(|candidate| {
                !models.iter().any(|other| {
                    other.precision >= candidate.precision
                        && other.recall >= candidate.recall
                        && (other.precision > candidate.precision
                            || other.recall > candidate.recall)
                })
            })
            .cloned()
            .collect();
        kept.sort_by(|a, b| {
            a.precision
                .partial_cmp(&b.precision)
                .unwrap()
                .then(a.id.cmp(&b.id))
        });
        kept
    }
}
