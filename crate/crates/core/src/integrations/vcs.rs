//! Version-control provider interface plus the in-memory and local-git
//! implementations.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::event::{PrRef, PullRequestEvent};
use crate::diff::{DiffParseError, UnifiedDiff};
use crate::git;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VcsError {
    #[error("branch not found: {0}")]
    BranchNotFound(String),
    #[error("pull request not found: {0}")]
    PullRequestNotFound(String),
    #[error("network error: {0}")]
    Network(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("line {line} of {path} is not part of the diff")]
    LineNotInDiff { path: String, line: u32 },
    #[error("provider rejected the request: {0}")]
    Rejected(String),
    #[error("oversized pull request: {loc} changed lines exceeds the limit of {limit}")]
    Oversized { loc: usize, limit: usize },
    #[error("could not parse diff: {0}")]
    Diff(String),
}

impl VcsError {
    pub fn is_transient(&self) -> bool {
        matches!(self, VcsError::Network(_) | VcsError::Rejected(_))
    }
}

impl From<DiffParseError> for VcsError {
    fn from(e: DiffParseError) -> Self {
        VcsError::Diff(e.to_string())
    }
}

/// A comment already present on a pull request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostedComment {
    pub id: String,
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply_to: Option<String>,
}

/// Operations the engine needs from a version-control provider.
/// Implementations must be usable from concurrent review jobs.
pub trait VcsClient: Send + Sync {
    /// Raw unified diff between the target and source branch heads.
    fn diff_text(&self, event: &PullRequestEvent) -> Result<String, VcsError>;
    fn list_comments(&self, pr: &PrRef) -> Result<Vec<PostedComment>, VcsError>;
    /// Comment attached to a line of the new file. Must fail with
    /// [`VcsError::LineNotInDiff`] when the provider cannot anchor it.
    fn post_inline_comment(&self, pr: &PrRef, path: &str, line: u32, body: &str) -> Result<String, VcsError>;
    fn post_file_comment(&self, pr: &PrRef, path: &str, body: &str) -> Result<String, VcsError>;
    fn post_pr_comment(&self, pr: &PrRef, body: &str) -> Result<String, VcsError>;
    fn post_reply(&self, pr: &PrRef, parent_id: &str, body: &str) -> Result<String, VcsError>;
}

/// Fetches and parses the pull request diff, refusing diffs above
/// `max_changed_loc`.
pub fn fetch_diff(event: &PullRequestEvent, client: &dyn VcsClient, max_changed_loc: usize) -> Result<UnifiedDiff, VcsError> {
    let text = client.diff_text(event)?;
    let diff = UnifiedDiff::parse(&text)?;
    let loc = diff.changed_loc();
    if loc > max_changed_loc {
        return Err(VcsError::Oversized {
            loc,
            limit: max_changed_loc,
        });
    }
    Ok(diff)
}

#[derive(Debug, Clone)]
struct StubPr {
    source: String,
    target: String,
    diff: String,
}

#[derive(Debug, Default)]
struct MemoryState {
    prs: HashMap<PrRef, StubPr>,
    comments: HashMap<PrRef, Vec<PostedComment>>,
    next_id: u64,
    fail_next_posts: u32,
    reject_all_posts: bool,
}

/// In-memory provider used by tests and the offline mode. Inline comments
/// are validated against the currently registered diff, so replacing the
/// diff simulates a force-push.
#[derive(Debug, Default)]
pub struct MemoryVcs {
    state: Mutex<MemoryState>,
}

impl MemoryVcs {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_pull_request(&self, pr: PrRef, source: &str, target: &str, diff: impl Into<String>) {
        self.lock().prs.insert(
            pr,
            StubPr {
                source: source.to_string(),
                target: target.to_string(),
                diff: diff.into(),
            },
        );
    }

    pub fn replace_diff(&self, pr: &PrRef, diff: impl Into<String>) {
        if let Some(p) = self.lock().prs.get_mut(pr) {
            p.diff = diff.into();
        }
    }

    /// The next `n` post calls fail with a transient rejection.
    pub fn fail_next_posts(&self, n: u32) {
        self.lock().fail_next_posts = n;
    }

    pub fn reject_all_posts(&self, on: bool) {
        self.lock().reject_all_posts = on;
    }

    pub fn comments(&self, pr: &PrRef) -> Vec<PostedComment> {
        self.lock().comments.get(pr).cloned().unwrap_or_default()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, MemoryState> {
        self.state.lock().expect("memory vcs poisoned")
    }

    fn post(&self, pr: &PrRef, mut comment: PostedComment) -> Result<String, VcsError> {
        let mut st = self.lock();
        if st.reject_all_posts {
            return Err(VcsError::Rejected("provider unavailable".into()));
        }
        if st.fail_next_posts > 0 {
            st.fail_next_posts -= 1;
            return Err(VcsError::Rejected("temporarily unavailable".into()));
        }
        if let (Some(path), Some(line)) = (&comment.file_path, comment.line) {
            let anchored = st
                .prs
                .get(pr)
                .and_then(|p| UnifiedDiff::parse(&p.diff).ok())
                .is_some_and(|d| d.file(path).is_some_and(|f| f.shows_new_line(line)));
            if !anchored {
                return Err(VcsError::LineNotInDiff { path: path.clone(), line });
            }
        }
        st.next_id += 1;
        comment.id = format!("c{}", st.next_id);
        let id = comment.id.clone();
        st.comments.entry(pr.clone()).or_default().push(comment);
        Ok(id)
    }
}

impl VcsClient for MemoryVcs {
    fn diff_text(&self, event: &PullRequestEvent) -> Result<String, VcsError> {
        let st = self.lock();
        let pr = st
            .prs
            .get(&event.pr_ref())
            .ok_or_else(|| VcsError::PullRequestNotFound(event.pr_ref().to_string()))?;
        if pr.source != event.source_branch {
            return Err(VcsError::BranchNotFound(event.source_branch.clone()));
        }
        if pr.target != event.target_branch {
            return Err(VcsError::BranchNotFound(event.target_branch.clone()));
        }
        Ok(pr.diff.clone())
    }

    fn list_comments(&self, pr: &PrRef) -> Result<Vec<PostedComment>, VcsError> {
        Ok(self.comments(pr))
    }

    fn post_inline_comment(&self, pr: &PrRef, path: &str, line: u32, body: &str) -> Result<String, VcsError> {
        self.post(
            pr,
            PostedComment {
                id: String::new(),
                body: body.into(),
                file_path: Some(path.into()),
                line: Some(line),
                reply_to: None,
            },
        )
    }

    fn post_file_comment(&self, pr: &PrRef, path: &str, body: &str) -> Result<String, VcsError> {
        self.post(
            pr,
            PostedComment {
                id: String::new(),
                body: body.into(),
                file_path: Some(path.into()),
                line: None,
                reply_to: None,
            },
        )
    }

    fn post_pr_comment(&self, pr: &PrRef, body: &str) -> Result<String, VcsError> {
        self.post(
            pr,
            PostedComment {
                id: String::new(),
                body: body.into(),
                file_path: None,
                line: None,
                reply_to: None,
            },
        )
    }

    fn post_reply(&self, pr: &PrRef, parent_id: &str, body: &str) -> Result<String, VcsError> {
        self.post(
            pr,
            PostedComment {
                id: String::new(),
                body: body.into(),
                file_path: None,
                line: None,
                reply_to: Some(parent_id.into()),
            },
        )
    }
}

/// Reads diffs from a local working tree; posted comments stay in memory.
#[derive(Debug)]
pub struct LocalGitVcs {
    repo: PathBuf,
    sink: MemoryVcs,
}

impl LocalGitVcs {
    pub fn open(repo: impl AsRef<Path>) -> Result<Self, VcsError> {
        let repo = repo.as_ref().to_path_buf();
        if !git::is_work_tree(&repo) {
            return Err(VcsError::PullRequestNotFound(format!(
                "{} is not a git working tree",
                repo.display()
            )));
        }
        Ok(Self {
            repo,
            sink: MemoryVcs::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.repo
    }

    pub fn resolve(&self, rev: &str) -> Result<String, VcsError> {
        git::rev_parse(&self.repo, rev).ok_or_else(|| VcsError::BranchNotFound(rev.to_string()))
    }

    /// Comments that would have been posted.
    pub fn posted(&self, pr: &PrRef) -> Vec<PostedComment> {
        self.sink.comments(pr)
    }
}

impl VcsClient for LocalGitVcs {
    fn diff_text(&self, event: &PullRequestEvent) -> Result<String, VcsError> {
        let target = self.resolve(&event.target_branch)?;
        let source = self.resolve(&event.source_branch)?;
        let text = git::diff(&self.repo, &target, &source).map_err(|e| VcsError::Network(e.to_string()))?;
        // Keep the local sink able to anchor inline comments.
        self.sink
            .add_pull_request(event.pr_ref(), &event.source_branch, &event.target_branch, text.clone());
        Ok(text)
    }

    fn list_comments(&self, pr: &PrRef) -> Result<Vec<PostedComment>, VcsError> {
        self.sink.list_comments(pr)
    }

    fn post_inline_comment(&self, pr: &PrRef, path: &str, line: u32, body: &str) -> Result<String, VcsError> {
        self.sink.post_inline_comment(pr, path, line, body)
    }

    fn post_file_comment(&self, pr: &PrRef, path: &str, body: &str) -> Result<String, VcsError> {
        self.sink.post_file_comment(pr, path, body)
    }

    fn post_pr_comment(&self, pr: &PrRef, body: &str) -> Result<String, VcsError> {
        self.sink.post_pr_comment(pr, body)
    }

    fn post_reply(&self, pr: &PrRef, parent_id: &str, body: &str) -> Result<String, VcsError> {
        self.sink.post_reply(pr, parent_id, body)
    }
}

#[cfg(test)]
mod tests {
    use chrono::Utc;

    use super::*;
    use crate::integrations::event::{EventKind, Provider};

    pub(crate) fn event(repo: &str, pr: u64, source: &str, target: &str) -> PullRequestEvent {
        PullRequestEvent {
            provider: Provider::Github,
            repo_url: format!("https://example.test/{repo}.git"),
            repo_id: repo.into(),
            pr_number: pr,
            source_branch: source.into(),
            target_branch: target.into(),
            title: "t".into(),
            description: String::new(),
            author: "a".into(),
            kind: EventKind::Opened,
            received_at: Utc::now(),
            comment: None,
        }
    }

    const DIFF: &str = "diff --git a/a.py b/a.py\n--- a/a.py\n+++ b/a.py\n@@ -1 +1 @@\n-x = 1\n+x = 2\n";

    #[test]
    fn one_line_change() {
        let vcs = MemoryVcs::new();
        let ev = event("o/r", 1, "feat", "main");
        vcs.add_pull_request(ev.pr_ref(), "feat", "main", DIFF);
        let d = fetch_diff(&ev, &vcs, 5000).unwrap();
        assert_eq!((d.files.len(), d.files[0].hunks.len(), d.changed_loc()), (1, 1, 2));
    }

    #[test]
    fn empty_diff() {
        let vcs = MemoryVcs::new();
        let ev = event("o/r", 1, "feat", "main");
        vcs.add_pull_request(ev.pr_ref(), "feat", "main", "");
        assert!(fetch_diff(&ev, &vcs, 5000).unwrap().is_empty());
    }

    #[test]
    fn unknown_branch() {
        let vcs = MemoryVcs::new();
        let ev = event("o/r", 1, "feat", "main");
        vcs.add_pull_request(ev.pr_ref(), "other", "main", DIFF);
        assert_eq!(fetch_diff(&ev, &vcs, 5000), Err(VcsError::BranchNotFound("feat".into())));
    }

    #[test]
    fn oversized() {
        let vcs = MemoryVcs::new();
        let ev = event("o/r", 1, "feat", "main");
        vcs.add_pull_request(ev.pr_ref(), "feat", "main", DIFF);
        assert_eq!(fetch_diff(&ev, &vcs, 1), Err(VcsError::Oversized { loc: 2, limit: 1 }));
    }

    #[test]
    fn inline_comments_must_be_anchored() {
        let vcs = MemoryVcs::new();
        let ev = event("o/r", 1, "feat", "main");
        vcs.add_pull_request(ev.pr_ref(), "feat", "main", DIFF);
        assert!(vcs.post_inline_comment(&ev.pr_ref(), "a.py", 1, "ok").is_ok());
        assert!(matches!(
            vcs.post_inline_comment(&ev.pr_ref(), "a.py", 9, "no"),
            Err(VcsError::LineNotInDiff { .. })
        ));
    }
}
