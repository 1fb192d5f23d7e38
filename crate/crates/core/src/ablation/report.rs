//! Ablation table: rows (a)-(d), mean ± std per metric, bold column maxima,
//! and superscripts naming the rows a condition beats significantly.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::cv::CvResult;
use super::stats::{significance, MeanStd, Significance};
use super::AblationCondition;
use crate::error::{Error, Result};

pub const METRIC_NAMES: [&str; 4] = ["accuracy", "precision", "recall", "f1"];
const METRIC_HEADERS: [&str; 4] = ["Acc.(↑)", "Precision(↑)", "Recall(↑)", "F1(↑)"];
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub condition: AblationCondition,
    pub folds: usize,
    pub metrics: [MeanStd; 4],
    pub bold: [bool; 4],
    /// Row letters this condition significantly exceeds, per metric.
    pub superscripts: [Vec<char>; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTest {
    pub a: AblationCondition,
    pub b: AblationCondition,
    pub metric: String,
    pub folds: usize,
    pub result: Significance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<ReportRow>,
    pub tests: Vec<PairTest>,
}

/// Two significant figures, keeping trailing zeros (`0.095`, `0.10`).
pub fn format_std(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x:.2}");
    }
    let decimals = (1 - x.abs().log10().floor() as i32).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // Rounding can carry into a new digit (0.0996 -> 0.100); drop the extra one.
    let reparsed: f64 = s.parse().unwrap_or(x);
    let carried = (1 - reparsed.abs().log10().floor() as i32).max(0) as usize;
    if carried < decimals {
        format!("{x:.carried$}")
    } else {
        s
    }
}

pub fn format_mean_std(ms: &MeanStd) -> String {
    format!("{:.2} ± {}", ms.mean, format_std(ms.std))
}

/// Builds the table from per-condition results. Conditions are paired by
/// fold index for the significance tests.
pub fn build_report(results: &[CvResult], seed: u64) -> Result<AblationReport> {
    let mut present: Vec<&CvResult> = results.iter().filter(|r| r.aggregate.is_some()).collect();
    if present.is_empty() {
        return Err(Error::validation("no cross-validation results with at least two folds"));
    }
    present.sort_by_key(|r| {
        AblationCondition::TABLE_ORDER
            .iter()
            .position(|c| *c == r.condition)
    });

    let mut rows: Vec<ReportRow> = present
        .iter()
        .map(|r| {
            let agg = r.aggregate.as_ref().expect("filtered");
            ReportRow {
                condition: r.condition,
                folds: agg.folds,
                metrics: agg.metrics(),
                bold: [false; 4],
                superscripts: Default::default(),
            }
        })
        .collect();

    for k in 0..4 {
        let best = rows.iter().map(|r| r.metrics[k].mean).fold(f64::NEG_INFINITY, f64::max);
        for r in &mut rows {
            r.bold[k] = r.metrics[k].mean == best;
        }
    }

    let mut tests = Vec::new();
    for i in 0..present.len() {
        for j in i + 1..present.len() {
            let (a, b) = (present[i], present[j]);
            let fa: BTreeMap<usize, &super::cv::FoldResult> = a.folds.iter().map(|f| (f.fold, f)).collect();
            let common: Vec<(&super::cv::FoldResult, &super::cv::FoldResult)> = b
                .folds
                .iter()
                .filter_map(|fb| fa.get(&fb.fold).map(|fa| (*fa, fb)))
                .collect();
            if common.len() < 2 {
                continue;
            }
            for k in 0..4 {
                let xa: Vec<f64> = common.iter().map(|(x, _)| x.metrics.scores()[k]).collect();
                let xb: Vec<f64> = common.iter().map(|(_, y)| y.metrics.scores()[k]).collect();
                let sig = significance(&xa, &xb, seed)?;
                if sig.permutation_p < SIGNIFICANCE_LEVEL {
                    let (winner, loser) = if rows[i].metrics[k].mean > rows[j].metrics[k].mean {
                        (i, j)
                    } else {
                        (j, i)
                    };
                    let letter = rows[loser].condition.row_letter();
                    rows[winner].superscripts[k].push(letter);
                }
                tests.push(PairTest {
                    a: a.condition,
                    b: b.condition,
                    metric: METRIC_NAMES[k].to_string(),
                    folds: common.len(),
                    result: sig,
                });
            }
        }
    }
    for r in &mut rows {
        for s in &mut r.superscripts {
            s.sort_unstable();
        }
    }
    Ok(AblationReport { rows, tests })
}

pub fn render_markdown(report: &AblationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "| Features assigned to target utt. | {} |", METRIC_HEADERS.join(" | "));
    let _ = writeln!(out, "|---|{}", "---|".repeat(4));
    for row in &report.rows {
        let cells: Vec<String> = (0..4)
            .map(|k| {
                let mut cell = format_mean_std(&row.metrics[k]);
                if row.bold[k] {
                    cell = format!("**{cell}**");
                }
                if !row.superscripts[k].is_empty() {
                    let letters: Vec<String> = row.superscripts[k].iter().map(char::to_string).collect();
                    cell.push_str(&format!("<sup>{}</sup>", letters.join(",")));
                }
                cell
            })
            .collect();
        let _ = writeln!(out, "| {} | {} |", row.condition.row_label(), cells.join(" | "));
    }
    let _ = writeln!(
        out,
        "\nResults of the ablation study (mean ± sample std over {} folds). Bold items indicate the \
         highest value for each metric. Superscripts a-d indicate significant differences with \
         methods (a)-(d) respectively (paired permutation test, p<{SIGNIFICANCE_LEVEL}).",
        report.rows.iter().map(|r| r.folds).max().unwrap_or(0)
    );
    out
}

pub fn render_csv(report: &AblationReport) -> String {
    let mut out = String::from("row,condition,folds");
    for m in METRIC_NAMES {
        let _ = write!(out, ",{m}_mean,{m}_std,{m}_sig");
    }
    out.push('\n');
    for row in &report.rows {
        let _ = write!(out, "{},{},{}", row.condition.row_letter(), row.condition.key(), row.folds);
        for k in 0..4 {
            let sig: String = row.superscripts[k].iter().collect();
            let _ = write!(out, ",{:.6},{:.6},{}", row.metrics[k].mean, row.metrics[k].std, sig);
        }
        out.push('\n');
    }
    out
}
