//! Webhook service and CLI plumbing around `revkit-core`.

pub mod service;

use std::path::Path;

use anyhow::{Context, Result};
use revkit_core::analytics::{build_report, read_records, AnalyticsReport};
use revkit_core::config::EngineConfig;
use revkit_core::pipeline::{Engine, LocalReview, Outcome, RunReport};
use revkit_core::report::ReviewReport;
use serde::{Deserialize, Serialize};

/// What `review` prints. Contains nothing time- or machine-dependent, so
/// identical inputs print identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalOutput {
    pub outcome: Outcome,
    pub report: Option<ReviewReport>,
    pub warnings: Vec<String>,
    pub errors: Vec<String>,
}

impl From<RunReport> for LocalOutput {
    fn from(r: RunReport) -> Self {
        Self {
            outcome: r.outcome,
            report: r.report,
            warnings: r.warnings,
            errors: r.errors,
        }
    }
}

impl LocalOutput {
    pub fn render_text(&self) -> String {
        let mut out = format!(
            "Outcome: {}\n",
            serde_json::to_value(self.outcome).unwrap_or_default().as_str().unwrap_or("?")
        );
        match &self.report {
            Some(r) => {
                out.push('\n');
                out.push_str(&r.render_text());
            }
            None if self.outcome == Outcome::NothingToReview => out.push_str("Nothing to review: the refs have no differences.\n"),
            None => {}
        }
        for (title, list) in [("Errors", &self.errors), ("Warnings", &self.warnings)] {
            if !list.is_empty() {
                out.push_str(&format!("\n{title}:\n"));
                for w in list {
                    out.push_str(&format!("  - {w}\n"));
                }
            }
        }
        out
    }

    pub fn render_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// 1 when the review produced errors.
    pub fn exit_code(&self) -> i32 {
        i32::from(self.outcome.is_error())
    }
}

pub fn review_local(cfg: EngineConfig, repo: &Path, base: &str, head: &str, opts: &LocalReview) -> Result<LocalOutput> {
    let engine = Engine::from_config(cfg).context("building engine")?;
    let run = engine
        .review_local(repo, base, head, opts)
        .with_context(|| format!("reviewing {}", repo.display()))?;
    Ok(run.into())
}

pub fn analytics_report(path: &Path) -> Result<AnalyticsReport> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let records = read_records(file).with_context(|| format!("reading {}", path.display()))?;
    Ok(build_report(&records)?)
}
