//! Delivery of a finished review to the provider.
//!
//! Every body carries a hidden content marker. Before posting, existing
//! comments are scanned for markers so an unchanged report is never posted
//! twice.

use std::collections::HashSet;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::event::PrRef;
use super::vcs::{VcsClient, VcsError};
use crate::agents::ReviewComment;
use crate::features::render_summary_comment;
use crate::report::ReviewReport;
use crate::retry::RetryPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PostedKind {
    Inline,
    FileLevel,
    Summary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostedItem {
    pub provider_id: String,
    pub kind: PostedKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<u32>,
    /// Inline placement was refused and the comment went to the file instead.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fell_back: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostFailure {
    pub target: String,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostReceipt {
    pub posted: Vec<PostedItem>,
    pub duplicates_skipped: usize,
    pub failures: Vec<PostFailure>,
}

impl PostReceipt {
    pub fn ids(&self) -> Vec<&str> {
        self.posted.iter().map(|p| p.provider_id.as_str()).collect()
    }

    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }
}

static MARKER_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"<!-- revkit:([0-9a-f]{16}) -->").unwrap());

fn content_hash(pr: &PrRef, parts: &[&str]) -> String {
    let mut h = Sha256::new();
    h.update(pr.repo_id.as_bytes());
    h.update(pr.pr_number.to_le_bytes());
    for p in parts {
        h.update([0u8]);
        h.update(p.as_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

fn with_marker(body: &str, hash: &str) -> String {
    format!("{body}\n\n<!-- revkit:{hash} -->")
}

/// Markdown body of an inline comment.
pub fn render_comment_body(c: &ReviewComment) -> String {
    let mut body = c.description.trim().to_string();
    if let Some(code) = c.corrective_code.as_deref().filter(|s| !s.trim().is_empty()) {
        body.push_str("\n\n```\n");
        body.push_str(code.trim_matches('\n'));
        body.push_str("\n```");
    }
    body.push_str(&format!("\n\n_{} · {} · confidence {:.2}_", c.bucket, c.agent, c.confidence_score));
    body
}

/// Posts every comment inline (falling back to file level when the line
/// cannot be anchored) and the summary as a top-level comment.
pub fn post_review(pr: &PrRef, report: &ReviewReport, client: &dyn VcsClient, retry: &RetryPolicy) -> PostReceipt {
    let mut receipt = PostReceipt::default();
    let existing: HashSet<String> = match client.list_comments(pr) {
        Ok(list) => list
            .iter()
            .flat_map(|c| MARKER_RE.captures_iter(&c.body).map(|m| m[1].to_string()).collect::<Vec<_>>())
            .collect(),
        Err(e) => {
            receipt.failures.push(PostFailure {
                target: "list-comments".into(),
                error: e.to_string(),
            });
            HashSet::new()
        }
    };

    for c in &report.comments {
        let body = render_comment_body(c);
        let line = c.line_number.to_string();
        let hash = content_hash(pr, &["comment", &c.file_path, &line, &body]);
        if existing.contains(&hash) {
            receipt.duplicates_skipped += 1;
            continue;
        }
        let body = with_marker(&body, &hash);
        let target = format!("{}:{}", c.file_path, c.line_number);

        let (kind, fell_back, result) = if c.file_level {
            (PostedKind::FileLevel, false, post_file(client, retry, pr, &c.file_path, &body))
        } else {
            let (inline, _) = retry.run(
                || client.post_inline_comment(pr, &c.file_path, c.line_number, &body),
                VcsError::is_transient,
            );
            match inline {
                Err(VcsError::LineNotInDiff { .. }) => (PostedKind::FileLevel, true, post_file(client, retry, pr, &c.file_path, &body)),
                other => (PostedKind::Inline, false, other),
            }
        };
        match result {
            Ok(id) => receipt.posted.push(PostedItem {
                provider_id: id,
                kind,
                file_path: Some(c.file_path.clone()),
                line: (kind == PostedKind::Inline).then_some(c.line_number),
                fell_back,
            }),
            Err(e) => receipt.failures.push(PostFailure {
                target,
                error: e.to_string(),
            }),
        }
    }

    if let Some(summary) = &report.summary {
        let body = render_summary_comment(summary);
        let hash = content_hash(pr, &["summary", &body]);
        if existing.contains(&hash) {
            receipt.duplicates_skipped += 1;
        } else {
            let body = with_marker(&body, &hash);
            match retry.run(|| client.post_pr_comment(pr, &body), VcsError::is_transient).0 {
                Ok(id) => receipt.posted.push(PostedItem {
                    provider_id: id,
                    kind: PostedKind::Summary,
                    file_path: None,
                    line: None,
                    fell_back: false,
                }),
                Err(e) => receipt.failures.push(PostFailure {
                    target: "summary".into(),
                    error: e.to_string(),
                }),
            }
        }
    }
    receipt
}

fn post_file(client: &dyn VcsClient, retry: &RetryPolicy, pr: &PrRef, path: &str, body: &str) -> Result<String, VcsError> {
    retry.run(|| client.post_file_comment(pr, path, body), VcsError::is_transient).0
}

/// Posts a top-level notice once per distinct body.
pub fn post_notice(pr: &PrRef, body: &str, client: &dyn VcsClient, retry: &RetryPolicy) -> Result<Option<String>, VcsError> {
    let hash = content_hash(pr, &["notice", body]);
    let existing = client.list_comments(pr)?;
    if existing.iter().any(|c| c.body.contains(&format!("revkit:{hash}"))) {
        return Ok(None);
    }
    let body = with_marker(body, &hash);
    retry.run(|| client.post_pr_comment(pr, &body), VcsError::is_transient).0.map(Some)
}
