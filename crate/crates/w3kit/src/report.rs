//! Metrics reports: a plain-text table (verb / noun / action × Top-1 / Top-5
//! across splits) plus a machine-readable JSON twin.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fusion::{action_topk_accuracy, topk_accuracy, ClipPrediction, GroundTruth, Task};

pub const REPORT_VERSION: &str = "w3kit-v1";

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct TaskMetrics {
    pub top1: f64,
    pub top5: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EvalRow {
    pub model: String,
    pub split: String,
    pub verb: TaskMetrics,
    pub noun: TaskMetrics,
    pub action: TaskMetrics,
}

/// All six numbers for one prediction set.
pub fn evaluate_split(
    model: &str,
    split: &str,
    predictions: &[ClipPrediction],
    truths: &[GroundTruth],
) -> Result<EvalRow> {
    Ok(EvalRow {
        model: model.to_string(),
        split: split.to_string(),
        verb: TaskMetrics {
            top1: topk_accuracy(predictions, truths, 1, Task::Verb)?,
            top5: topk_accuracy(predictions, truths, 5, Task::Verb)?,
        },
        noun: TaskMetrics {
            top1: topk_accuracy(predictions, truths, 1, Task::Noun)?,
            top5: topk_accuracy(predictions, truths, 5, Task::Noun)?,
        },
        action: TaskMetrics {
            top1: action_topk_accuracy(predictions, truths, 1)?,
            top5: action_topk_accuracy(predictions, truths, 5)?,
        },
    })
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ContextRow {
    pub method: String,
    pub verb_top1: f64,
    pub noun_top1: f64,
    pub action_top1: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: String,
    pub attention: Vec<EvalRow>,
    pub context: Vec<ContextRow>,
}

impl ExperimentReport {
    pub fn new() -> Self {
        ExperimentReport {
            version: REPORT_VERSION.into(),
            attention: Vec::new(),
            context: Vec::new(),
        }
    }
}

impl Default for ExperimentReport {
    fn default() -> Self {
        Self::new()
    }
}

fn pct(x: f64) -> String {
    format!("{:6.2}", 100.0 * x)
}

/// Render evaluation rows as a fixed-width table. Splits become column pairs
/// (in first-appearance order); models become rows.
pub fn render_attention_table(rows: &[EvalRow]) -> String {
    let mut splits: Vec<String> = Vec::new();
    for r in rows {
        if !splits.contains(&r.split) {
            splits.push(r.split.clone());
        }
    }
    let mut models: Vec<String> = Vec::new();
    for r in rows {
        if !models.contains(&r.model) {
            models.push(r.model.clone());
        }
    }
    let find = |model: &str, split: &str| {
        rows.iter().find(|r| r.model == model && r.split == split)
    };

    let mut out = String::new();
    let group_width = splits.len() * 7;
    out.push_str(&format!("{:<12}", ""));
    for head in ["Verb", "Noun", "Action"] {
        out.push_str(&format!(
            "{:^width$}",
            format!("{head} Top-1"),
            width = group_width
        ));
        out.push_str(&format!(
            "{:^width$}",
            format!("{head} Top-5"),
            width = group_width
        ));
    }
    out.push('\n');
    out.push_str(&format!("{:<12}", "Model"));
    for _ in 0..6 {
        for s in &splits {
            out.push_str(&format!("{:>7}", s.to_uppercase()));
        }
    }
    out.push('\n');
    out.push_str(&"-".repeat(12 + 6 * group_width));
    out.push('\n');
    for m in &models {
        out.push_str(&format!("{:<12}", m));
        let cells = [
            |r: &EvalRow| r.verb.top1,
            |r: &EvalRow| r.verb.top5,
            |r: &EvalRow| r.noun.top1,
            |r: &EvalRow| r.noun.top5,
            |r: &EvalRow| r.action.top1,
            |r: &EvalRow| r.action.top5,
        ];
        for cell in cells {
            for s in &splits {
                match find(m, s) {
                    Some(r) => out.push_str(&format!("{:>7}", pct(cell(r)).trim())),
                    None => out.push_str(&format!("{:>7}", "-")),
                }
            }
        }
        out.push('\n');
    }
    out
}

pub fn render_context_table(rows: &[ContextRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<16}{:>12}{:>12}{:>14}\n",
        "Method", "Verb Top-1", "Noun Top-1", "Action Top-1"
    ));
    out.push_str(&"-".repeat(54));
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{:<16}{:>12}{:>12}{:>14}\n",
            r.method,
            pct(r.verb_top1).trim(),
            pct(r.noun_top1).trim(),
            pct(r.action_top1).trim()
        ));
    }
    out
}

pub fn render_report(report: &ExperimentReport) -> String {
    let mut out = String::new();
    out.push_str("Toy experiment report\n");
    out.push_str("=====================\n\n");
    if !report.attention.is_empty() {
        out.push_str("Attention comparison\n\n");
        out.push_str(&render_attention_table(&report.attention));
        out.push('\n');
    }
    if !report.context.is_empty() {
        out.push_str("Temporal context comparison\n\n");
        out.push_str(&render_context_table(&report.context));
    }
    out
}
