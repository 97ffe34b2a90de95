use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::agents::ReviewComment;
use crate::chunker::{CodeChunk, SymbolKind};
use crate::features::PrSummary;
use crate::integrations::PrRef;

/// A retrieved chunk as listed in a report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextChunkRef {
    pub chunk_id: String,
    pub file_path: String,
    pub start_line: u32,
    pub end_line: u32,
    pub symbol: String,
    pub kind: SymbolKind,
}

impl From<&CodeChunk> for ContextChunkRef {
    fn from(c: &CodeChunk) -> Self {
        Self {
            chunk_id: c.chunk_id.clone(),
            file_path: c.file_path.clone(),
            start_line: c.span.start_line,
            end_line: c.span.end_line,
            symbol: c.qualified_name(),
            kind: c.symbol_kind,
        }
    }
}

/// Final consolidated review of one pull request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewReport {
    pub pr_ref: PrRef,
    pub comments: Vec<ReviewComment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<PrSummary>,
    pub dropped_count_by_dimension: BTreeMap<String, usize>,
    #[serde(default)]
    pub retrieved_context: Vec<ContextChunkRef>,
}

impl ReviewReport {
    pub fn empty(pr_ref: PrRef) -> Self {
        Self {
            pr_ref,
            comments: Vec::new(),
            summary: None,
            dropped_count_by_dimension: BTreeMap::new(),
            retrieved_context: Vec::new(),
        }
    }

    /// Human-readable rendering used by the CLI.
    pub fn render_text(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let _ = writeln!(out, "Review of {}", self.pr_ref);
        if let Some(s) = &self.summary {
            let _ = writeln!(
                out,
                "\nSummary [{} | {} LOC | ~{} min]{}",
                s.size_class,
                s.changed_loc,
                s.estimated_review_minutes,
                if s.degraded { " (degraded)" } else { "" }
            );
            for line in s.summary_text.lines() {
                let _ = writeln!(out, "  {line}");
            }
        }
        let _ = writeln!(out, "\nRetrieved context ({} chunks):", self.retrieved_context.len());
        for c in &self.retrieved_context {
            let _ = writeln!(out, "  {}:{}-{}  {}", c.file_path, c.start_line, c.end_line, c.symbol);
        }
        let _ = writeln!(out, "\nComments ({}):", self.comments.len());
        for c in &self.comments {
            let _ = writeln!(
                out,
                "  {}:{} [{} / {}] confidence {:.2}{}",
                c.file_path,
                c.line_number,
                c.bucket,
                c.agent,
                c.confidence_score,
                if c.file_level { " (file-level)" } else { "" }
            );
            for line in c.description.lines() {
                let _ = writeln!(out, "    {line}");
            }
        }
        if !self.dropped_count_by_dimension.is_empty() {
            let _ = writeln!(out, "\nBlending:");
            for (dim, n) in &self.dropped_count_by_dimension {
                let _ = writeln!(out, "  {dim}: {n} removed");
            }
        }
        out
    }
}
