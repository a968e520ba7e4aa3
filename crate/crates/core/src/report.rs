//! The resolution report: one entry per classified (or excluded) stubbing
//! definition, per-file edit summaries, and the complexity deltas. Rendered
//! as JSON and as plain text; both renderings are deterministic and carry no
//! timestamps.

use serde::{Deserialize, Serialize};

use crate::metrics::{ComplexitySnapshot, PercentDelta};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResolutionReport {
    pub summary: Summary,
    pub entries: Vec<ReportEntry>,
    pub files: Vec<FileSummary>,
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsBlock>,
}

/// Resolved counts by kind plus everything that was skipped (excluded,
/// keep-setup mode, or errored).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub tu: usize,
    pub uuh: usize,
    pub uus: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryStatus {
    Resolved,
    Skipped,
    Error,
    Detected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    /// `file:line:occ` of the stubbing definition.
    pub location: String,
    /// TU, UUH, or UUS.
    pub kind: String,
    pub status: EntryStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edits: Vec<String>,
    /// Tests whose runs produced the unnecessary occurrences, `Class#test`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub affected_tests: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub new_classes: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub moved_tests: Vec<MovedTest>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MovedTest {
    pub test: String,
    pub from_class: String,
    pub to_class: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileSummary {
    pub path: String,
    pub edits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsBlock {
    pub loc_before: u64,
    pub loc_after: u64,
    pub loc_pct: Option<f64>,
    pub cog_before: u64,
    pub cog_after: u64,
    pub cog_pct: Option<f64>,
}

impl MetricsBlock {
    pub fn from_snapshots(before: &ComplexitySnapshot, after: &ComplexitySnapshot) -> Self {
        let delta: PercentDelta = crate::metrics::percent_delta(before, after);
        MetricsBlock {
            loc_before: before.loc_total,
            loc_after: after.loc_total,
            loc_pct: delta.loc_pct,
            cog_before: before.cognitive_total,
            cog_after: after.cognitive_total,
            cog_pct: delta.cognitive_pct,
        }
    }
}

impl ResolutionReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Entries that actually changed the suite.
    pub fn resolved_entries(&self) -> impl Iterator<Item = &ReportEntry> {
        self.entries
            .iter()
            .filter(|e| e.status == EntryStatus::Resolved)
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str("unnecessary stubbing resolution report\n");
        out.push_str(&format!(
            "resolved: {} TU, {} UUH, {} UUS; skipped: {}\n\n",
            self.summary.tu, self.summary.uuh, self.summary.uus, self.summary.skipped
        ));
        for entry in &self.entries {
            let status = match entry.status {
                EntryStatus::Resolved => "resolved",
                EntryStatus::Skipped => "skipped",
                EntryStatus::Error => "error",
                EntryStatus::Detected => "detected",
            };
            out.push_str(&format!("[{}] {} {}\n", entry.kind, entry.location, status));
            if let Some(strategy) = &entry.strategy {
                out.push_str(&format!("    strategy: {strategy}\n"));
            }
            if let Some(reason) = &entry.reason {
                out.push_str(&format!("    reason: {reason}\n"));
            }
            for edit in &entry.edits {
                out.push_str(&format!("    edit: {edit}\n"));
            }
            for moved in &entry.moved_tests {
                out.push_str(&format!(
                    "    moved: {}#{} -> {}\n",
                    moved.from_class, moved.test, moved.to_class
                ));
            }
        }
        if !self.files.is_empty() {
            out.push('\n');
            for file in &self.files {
                out.push_str(&format!("{}: {} edit(s)\n", file.path, file.edits));
            }
        }
        if !self.notes.is_empty() {
            out.push('\n');
            for note in &self.notes {
                out.push_str(&format!("note: {note}\n"));
            }
        }
        if let Some(metrics) = &self.metrics {
            out.push_str(&format!(
                "\nloc: {} -> {} ({})\ncognitive: {} -> {} ({})\n",
                metrics.loc_before,
                metrics.loc_after,
                fmt_pct(metrics.loc_pct),
                metrics.cog_before,
                metrics.cog_after,
                fmt_pct(metrics.cog_pct),
            ));
        }
        out
    }
}

fn fmt_pct(pct: Option<f64>) -> String {
    match pct {
        Some(v) => format!("{v:+.2}%"),
        None => "undefined (zero base)".to_string(),
    }
}
