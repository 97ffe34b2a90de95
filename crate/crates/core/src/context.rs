//! The optimized review context and the per-agent slices of it.

use std::collections::{BTreeSet, HashSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::AgentKind;
use crate::chunker::CodeChunk;
use crate::diff::UnifiedDiff;
use crate::integrations::{DocSource, KnowledgeDoc, PullRequestEvent};
use crate::tokens::estimate_tokens;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizedContext {
    pub pr_title: String,
    pub pr_description: String,
    pub pr_diff: UnifiedDiff,
    pub story: Option<KnowledgeDoc>,
    pub approach: Option<KnowledgeDoc>,
    /// Most relevant first.
    pub relevant_chunks: Vec<CodeChunk>,
}

impl OptimizedContext {
    /// The chunk covering `line` of `path`, if one was retrieved.
    pub fn chunk_at(&self, path: &str, line: u32) -> Option<&CodeChunk> {
        self.relevant_chunks
            .iter()
            .find(|c| c.file_path == path && c.span.contains_line(line))
    }
}

pub fn build_optimized_context(
    event: &PullRequestEvent,
    diff: UnifiedDiff,
    docs: &[KnowledgeDoc],
    chunks: Vec<CodeChunk>,
) -> OptimizedContext {
    let first = |source| docs.iter().find(|d| d.source == source).cloned();
    let mut seen = HashSet::new();
    let relevant_chunks = chunks.into_iter().filter(|c| seen.insert(c.chunk_id.clone())).collect();
    OptimizedContext {
        pr_title: event.title.clone(),
        pr_description: event.description.clone(),
        pr_diff: diff,
        story: first(DocSource::Story),
        approach: first(DocSource::Approach),
        relevant_chunks,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReviewPass {
    SinglePass,
    Reflection,
}

impl ReviewPass {
    pub fn as_str(self) -> &'static str {
        match self {
            ReviewPass::SinglePass => "single-pass",
            ReviewPass::Reflection => "reflection",
        }
    }
}

impl fmt::Display for ReviewPass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartKind {
    Diff,
    Title,
    Description,
    ContextCode,
    UserStory,
    ConfluencePages,
    InitialLlmReview,
}

/// Which context parts an agent sees in a pass.
pub fn parts_for(agent: AgentKind, pass: ReviewPass) -> BTreeSet<PartKind> {
    use PartKind::*;
    let mut parts = BTreeSet::from([Diff, Title, Description]);
    match agent {
        AgentKind::Security | AgentKind::CodeCommunication => {}
        AgentKind::PerformanceOptimization | AgentKind::CodeMaintainability | AgentKind::Error => {
            parts.insert(ContextCode);
        }
        AgentKind::BusinessLogicValidation => {
            parts.extend([ContextCode, UserStory, ConfluencePages]);
        }
    }
    if pass == ReviewPass::Reflection {
        parts.insert(InitialLlmReview);
    }
    parts
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("reflection pass for {0} requires the initial review")]
pub struct MissingInitialReview(pub AgentKind);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentContextBundle {
    pub agent: AgentKind,
    pub pass: ReviewPass,
    pub parts: BTreeSet<PartKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_review: Option<String>,
}

pub fn bundle_for_agent(
    agent: AgentKind,
    pass: ReviewPass,
    initial_review: Option<&str>,
) -> Result<AgentContextBundle, MissingInitialReview> {
    let initial_review = match pass {
        ReviewPass::SinglePass => None,
        ReviewPass::Reflection => Some(initial_review.ok_or(MissingInitialReview(agent))?.to_string()),
    };
    Ok(AgentContextBundle {
        agent,
        pass,
        parts: parts_for(agent, pass),
        initial_review,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedContext {
    pub text: String,
    pub tokens: usize,
    /// Chunk ids left out to respect the budget.
    pub dropped_chunks: Vec<String>,
    pub warnings: Vec<String>,
}

fn render_chunk(out: &mut String, c: &CodeChunk) {
    let _ = writeln!(
        out,
        "### {}:{}-{} ({})",
        c.file_path,
        c.span.start_line,
        c.span.end_line,
        c.qualified_name()
    );
    out.push_str("```\n");
    out.push_str(&c.content);
    if !c.content.ends_with('\n') {
        out.push('\n');
    }
    out.push_str("```\n\n");
}

fn render_doc(out: &mut String, heading: &str, doc: &KnowledgeDoc) {
    let _ = writeln!(out, "## {heading}: {} ({})\n{}\n", doc.title, doc.external_key, doc.body.trim_end());
}

fn render_with(ctx: &OptimizedContext, parts: &BTreeSet<PartKind>, initial_review: Option<&str>, chunks: &[&CodeChunk]) -> String {
    let has = |p| parts.contains(&p);
    let mut out = String::new();
    if has(PartKind::Title) {
        let _ = writeln!(out, "## Pull request title\n{}\n", ctx.pr_title.trim());
    }
    if has(PartKind::Description) && !ctx.pr_description.trim().is_empty() {
        let _ = writeln!(out, "## Pull request description\n{}\n", ctx.pr_description.trim());
    }
    if has(PartKind::UserStory) {
        if let Some(doc) = &ctx.story {
            render_doc(&mut out, "User story", doc);
        }
    }
    if has(PartKind::ConfluencePages) {
        if let Some(doc) = &ctx.approach {
            render_doc(&mut out, "Approach", doc);
        }
    }
    if has(PartKind::ContextCode) && !chunks.is_empty() {
        out.push_str("## Related code\n");
        for c in chunks {
            render_chunk(&mut out, c);
        }
    }
    if has(PartKind::Diff) {
        out.push_str("## Diff\n```diff\n");
        out.push_str(&ctx.pr_diff.render());
        out.push_str("```\n");
    }
    if has(PartKind::InitialLlmReview) {
        if let Some(r) = initial_review {
            let _ = write!(out, "\n## Initial review\n{}\n", r.trim_end());
        }
    }
    out
}

/// Serializes `parts` in a fixed order: title, description, story,
/// approach, related code, diff, initial review. Empty parts are omitted.
/// When over `budget_tokens`, related-code chunks are dropped from the least
/// relevant end until the text fits. `label` prefixes warnings.
pub fn render_parts(
    ctx: &OptimizedContext,
    parts: &BTreeSet<PartKind>,
    initial_review: Option<&str>,
    label: &str,
    budget_tokens: usize,
    chars_per_token: usize,
) -> RenderedContext {
    let mut chunks: Vec<&CodeChunk> = if parts.contains(&PartKind::ContextCode) {
        ctx.relevant_chunks.iter().collect()
    } else {
        Vec::new()
    };
    let mut dropped = Vec::new();
    let mut text = render_with(ctx, parts, initial_review, &chunks);
    let mut tokens = estimate_tokens(&text, chars_per_token);
    while tokens > budget_tokens {
        let Some(c) = chunks.pop() else { break };
        dropped.push(c.chunk_id.clone());
        text = render_with(ctx, parts, initial_review, &chunks);
        tokens = estimate_tokens(&text, chars_per_token);
    }
    let mut warnings = Vec::new();
    if !dropped.is_empty() {
        warnings.push(format!(
            "{label}: dropped {} related chunk(s) to fit {budget_tokens} tokens",
            dropped.len()
        ));
    }
    if tokens > budget_tokens {
        warnings.push(format!("{label}: context is {tokens} tokens, over the {budget_tokens} budget"));
    }
    RenderedContext {
        text,
        tokens,
        dropped_chunks: dropped,
        warnings,
    }
}

/// [`render_parts`] for an agent bundle.
pub fn render_context(
    ctx: &OptimizedContext,
    bundle: &AgentContextBundle,
    budget_tokens: usize,
    chars_per_token: usize,
) -> RenderedContext {
    let label = format!("{} {}", bundle.agent, bundle.pass);
    render_parts(
        ctx,
        &bundle.parts,
        bundle.initial_review.as_deref(),
        &label,
        budget_tokens,
        chars_per_token,
    )
}
