use std::fmt::Write;

use super::manifest::{CellReport, RunManifest, SummaryReport};
use crate::metrics::display_2dp;

fn summary_line(out: &mut String, name: &str, s: &SummaryReport) {
    let d = &s.display;
    let _ = writeln!(out, "  {name:<24} R-1 {:>6}  R-2 {:>6}  R-L {:>6}  R-LSum {:>6}", d.r1, d.r2, d.rl, d.rlsum);
}

/// Plain-text rendering of a manifest for terminals.
pub fn format_report(m: &RunManifest) -> String {
    let mut out = String::new();
    let name = m.config.name.as_deref().unwrap_or("experiment");
    let _ = writeln!(out, "{name} ({:?}, config {})", m.task, &m.config_hash[..m.config_hash.len().min(16)]);
    if m.dry_run {
        let _ = writeln!(out, "dry run: prompts rendered, no backend called");
    }
    if m.incomplete {
        let _ = writeln!(out, "INCOMPLETE: some examples or cells failed");
    }
    for cell in &m.cells {
        let _ = write!(out, "\n[{} k={}]", cell.template_id, cell.k);
        if cell.failed_examples > 0 {
            let _ = write!(out, " {} failed example(s)", cell.failed_examples);
        }
        out.push('\n');
        if let Some(e) = &cell.error {
            let _ = writeln!(out, "  error: {e}");
        }
        match &cell.report {
            Some(CellReport::Classification { confusion, report, display }) => {
                let _ = writeln!(
                    out,
                    "  accuracy {}  macro F1 {}  weighted F1 {}  unparsed {}",
                    display.accuracy, display.macro_f1, display.weighted_f1, report.unparsed
                );
                let _ = writeln!(out, "  {:<20} {:>9} {:>9} {:>9} {:>8}", "label", "precision", "recall", "f1", "support");
                for c in &report.per_class {
                    let _ = writeln!(
                        out,
                        "  {:<20} {:>9} {:>9} {:>9} {:>8}",
                        c.label,
                        display_2dp(c.precision),
                        display_2dp(c.recall),
                        display_2dp(c.f1),
                        c.support
                    );
                }
                let _ = write!(out, "  confusion (rows gold, cols predicted, last unparsed):");
                for (label, (row, unparsed)) in confusion
                    .labels()
                    .iter()
                    .zip(confusion.counts().iter().zip(confusion.unparsed()))
                {
                    let cols: Vec<String> = row.iter().map(u64::to_string).collect();
                    let _ = write!(out, "\n    {label:<18} {} | {unparsed}", cols.join(" "));
                }
                out.push('\n');
            }
            Some(CellReport::Summarization(s)) => summary_line(&mut out, "mean", s),
            None if m.dry_run => {
                let _ = writeln!(out, "  {} prompt(s) rendered", cell.records.len());
            }
            None => {}
        }
    }
    if let Some(lead) = &m.lead_baseline {
        out.push_str("\nbaseline\n");
        summary_line(&mut out, "LEAD-64", lead);
    }
    if let Some(d) = m.deltas.as_ref().filter(|d| !d.is_empty()) {
        out.push_str("\ndelta vs zero-shot\n");
        for r in &d.rows {
            let _ = writeln!(
                out,
                "  {:<20} k={:<4} {} -> {}  {}",
                r.template_id,
                r.k,
                display_2dp(r.zero_shot),
                display_2dp(r.score),
                r.display
            );
        }
    }
    out
}
