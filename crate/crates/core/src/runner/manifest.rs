use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Task};
use super::{Result, RunnerError};
use crate::gateway::{BackendDescriptor, ParseStatus, RawOutput};
use crate::metrics::{display_2dp, ClassificationReport, ConfusionMatrix, DeltaTable, RougeScores};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrievedRef {
    pub id: String,
    pub similarity: f64,
}

/// Everything recorded for one example in one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleRecord {
    pub example_id: String,
    pub retrieved: Vec<RetrievedRef>,
    pub demo_count: usize,
    pub prompt_truncated: bool,
    /// Hex SHA-256 of the prompt's UTF-8 bytes.
    pub prompt_sha256: String,
    /// The prompt itself, kept only by dry runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_output: Option<RawOutput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mapped_label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_status: Option<ParseStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rouge: Option<RougeScores>,
    /// Set when the backend call failed; the example then counts as
    /// unparsed (classification) or as an empty summary.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RougeDisplay {
    pub r1: String,
    pub r2: String,
    pub rl: String,
    pub rlsum: String,
}

/// Mean ROUGE over a cell's examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryReport {
    pub examples: usize,
    pub mean: RougeScores,
    /// F1 values scaled by 100, two decimals.
    pub display: RougeDisplay,
}

impl SummaryReport {
    pub fn from_scores(scores: &[RougeScores]) -> Self {
        let n = scores.len().max(1) as f64;
        let mut mean = RougeScores::default();
        for s in scores {
            for (acc, x) in [
                (&mut mean.r1, s.r1),
                (&mut mean.r2, s.r2),
                (&mut mean.rl, s.rl),
                (&mut mean.rlsum, s.rlsum),
            ] {
                acc.precision += x.precision;
                acc.recall += x.recall;
                acc.f1 += x.f1;
            }
        }
        for acc in [&mut mean.r1, &mut mean.r2, &mut mean.rl, &mut mean.rlsum] {
            acc.precision /= n;
            acc.recall /= n;
            acc.f1 /= n;
        }
        let pct = |x: f64| display_2dp(x * 100.0);
        SummaryReport {
            examples: scores.len(),
            display: RougeDisplay {
                r1: pct(mean.r1.f1),
                r2: pct(mean.r2.f1),
                rl: pct(mean.rl.f1),
                rlsum: pct(mean.rlsum.f1),
            },
            mean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassificationDisplay {
    pub accuracy: String,
    pub macro_f1: String,
    pub weighted_f1: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellReport {
    Classification {
        confusion: ConfusionMatrix,
        report: ClassificationReport,
        display: ClassificationDisplay,
    },
    Summarization(SummaryReport),
}

impl CellReport {
    pub fn classification(confusion: ConfusionMatrix, report: ClassificationReport) -> Self {
        let display = ClassificationDisplay {
            accuracy: display_2dp(report.accuracy),
            macro_f1: display_2dp(report.macro_avg.f1),
            weighted_f1: display_2dp(report.weighted_avg.f1),
        };
        CellReport::Classification {
            confusion,
            report,
            display,
        }
    }

    pub fn classification_report(&self) -> Option<&ClassificationReport> {
        match self {
            CellReport::Classification { report, .. } => Some(report),
            CellReport::Summarization(_) => None,
        }
    }
}

/// One (template, k) combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellResult {
    pub template_id: String,
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<BackendDescriptor>,
    /// Checksum of the pool the demonstrations came from (after any
    /// self-prediction).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool_checksum: Option<String>,
    pub incomplete: bool,
    pub failed_examples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub records: Vec<ExampleRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<CellReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub format_version: u32,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub task: Task,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool_checksum: Option<String>,
    pub dry_run: bool,
    pub incomplete: bool,
    pub cells: Vec<CellResult>,
    /// LEAD-64 baseline (summarization).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lead_baseline: Option<SummaryReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<DeltaTable>,
}

impl RunManifest {
    pub fn cell(&self, template_id: &str, k: usize) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.template_id == template_id && c.k == k)
    }

    pub fn file_name(&self) -> String {
        manifest_file_name(&self.config_hash)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let m: RunManifest =
            serde_json::from_slice(bytes).map_err(|e| RunnerError::Schema(format!("manifest: {e}")))?;
        if m.format_version != MANIFEST_VERSION {
            return Err(RunnerError::Schema(format!(
                "manifest format {} is not supported",
                m.format_version
            )));
        }
        Ok(m)
    }
}

pub fn manifest_file_name(config_hash: &str) -> String {
    format!("manifest-{}.json", &config_hash[..config_hash.len().min(16)])
}

/// Writes `<dir>/manifest-<hash16>.json` and returns its path.
pub fn write_report(manifest: &RunManifest, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| RunnerError::io(dir, e))?;
    let path = dir.join(manifest.file_name());
    let tmp = path.with_extension("partial");
    std::fs::write(&tmp, manifest.to_json()).map_err(|e| RunnerError::io(&tmp, e))?;
    std::fs::rename(&tmp, &path).map_err(|e| RunnerError::io(&path, e))?;
    Ok(path)
}

pub fn read_report(path: &Path) -> Result<RunManifest> {
    let bytes = std::fs::read(path).map_err(|e| RunnerError::io(path, e))?;
    RunManifest::from_json(&bytes)
}
