use serde::{Deserialize, Serialize};

use super::{ClassificationReport, MetricsError, Result};

/// Which averaged F1 a comparison table reports.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Average {
    #[default]
    Macro,
    Weighted,
}

impl Average {
    pub fn f1(self, report: &ClassificationReport) -> f64 {
        match self {
            Average::Macro => report.macro_avg.f1,
            Average::Weighted => report.weighted_avg.f1,
        }
    }
}

fn hundredths(x: f64) -> i64 {
    (x * 100.0).round() as i64
}

fn format_hundredths(h: i64, signed: bool) -> String {
    let sign = if h < 0 {
        "-"
    } else if signed {
        "+"
    } else {
        ""
    };
    format!("{sign}{}.{:02}", h.abs() / 100, h.abs() % 100)
}

/// `x` rounded to two decimals, as printed in the result tables.
pub fn display_2dp(x: f64) -> String {
    format_hundredths(hundredths(x), false)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Row {
    pub k: usize,
    pub f1: f64,
    pub display: String,
}

/// F1 per k for one template. `k = 0` is the zero-shot anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Table {
    pub template_id: String,
    pub average: Average,
    pub rows: Vec<F1Row>,
}

/// Builds the table from reports; all reports must share a label set.
pub fn f1_table(template_id: &str, reports: &[(usize, &ClassificationReport)], average: Average) -> Result<F1Table> {
    if let Some((_, first)) = reports.first() {
        let labels: Vec<&str> = first.labels().collect();
        if reports.iter().any(|(_, r)| !r.labels().eq(labels.iter().copied())) {
            return Err(MetricsError::LabelSetMismatch);
        }
    }
    let scores: Vec<(usize, f64)> = reports.iter().map(|(k, r)| (*k, average.f1(r))).collect();
    Ok(F1Table::from_scores(template_id, &scores, average))
}

impl F1Table {
    pub fn from_scores(template_id: &str, scores: &[(usize, f64)], average: Average) -> Self {
        F1Table {
            template_id: template_id.to_string(),
            average,
            rows: scores
                .iter()
                .map(|&(k, f1)| F1Row {
                    k,
                    f1,
                    display: display_2dp(f1),
                })
                .collect(),
        }
    }

    pub fn zero_shot(&self) -> Option<&F1Row> {
        self.rows.iter().find(|r| r.k == 0)
    }

    /// One row per k > 0, relative to the zero-shot anchor; empty without
    /// an anchor.
    pub fn deltas(&self) -> Vec<DeltaRow> {
        let Some(anchor) = self.zero_shot() else {
            return Vec::new();
        };
        self.rows
            .iter()
            .filter(|r| r.k > 0)
            .map(|r| DeltaRow::new(&self.template_id, r.k, anchor.f1, r.f1))
            .collect()
    }
}

/// Difference from zero-shot for one (template, k) cell.
///
/// `delta` is the full-precision difference. `delta_hundredths` and
/// `display` are taken between the two scores rounded to two decimals,
/// which is how differences read off a two-decimal table come out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub template_id: String,
    pub k: usize,
    pub zero_shot: f64,
    pub score: f64,
    pub delta: f64,
    pub delta_hundredths: i64,
    pub display: String,
}

impl DeltaRow {
    pub fn new(template_id: &str, k: usize, zero_shot: f64, score: f64) -> Self {
        let delta_hundredths = hundredths(score) - hundredths(zero_shot);
        DeltaRow {
            template_id: template_id.to_string(),
            k,
            zero_shot,
            score,
            delta: score - zero_shot,
            delta_hundredths,
            display: format_hundredths(delta_hundredths, true),
        }
    }
}

/// Boxplot-ready delta rows across templates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DeltaTable {
    pub rows: Vec<DeltaRow>,
}

impl DeltaTable {
    pub fn from_tables(tables: &[F1Table]) -> Self {
        DeltaTable {
            rows: tables.iter().flat_map(F1Table::deltas).collect(),
        }
    }

    /// From `(template_id, k, f1)` cells in any order.
    pub fn from_scores(cells: &[(&str, usize, f64)]) -> Self {
        let mut ids: Vec<&str> = Vec::new();
        for (id, _, _) in cells {
            if !ids.contains(id) {
                ids.push(id);
            }
        }
        let tables: Vec<F1Table> = ids
            .iter()
            .map(|id| {
                let scores: Vec<(usize, f64)> = cells
                    .iter()
                    .filter(|(t, _, _)| t == id)
                    .map(|(_, k, f)| (*k, *f))
                    .collect();
                F1Table::from_scores(id, &scores, Average::Macro)
            })
            .collect();
        Self::from_tables(&tables)
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// Tab-separated `template_id k delta` lines.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("template_id\tk\tdelta_f1\n");
        for r in &self.rows {
            out.push_str(&format!("{}\t{}\t{}\n", r.template_id, r.k, r.display));
        }
        out
    }
}
