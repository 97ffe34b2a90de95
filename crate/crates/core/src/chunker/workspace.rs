use std::path::{Path, PathBuf};

use tempfile::TempDir;
use thiserror::Error;

use crate::git::{self, GitError};

#[derive(Debug, Error)]
pub enum WorkspaceError {
    #[error("clone of {url} failed: {reason}")]
    CloneFailed { url: String, reason: String },
    #[error("branch {0:?} not found")]
    BranchNotFound(String),
    #[error("could not create workspace: {0}")]
    Io(#[from] std::io::Error),
    #[error("workspace disposed")]
    Disposed,
}

/// Temporary checkout owned by one review job. The directory is removed on
/// [`dispose`](WorkspaceHandle::dispose) or drop.
#[derive(Debug)]
pub struct WorkspaceHandle {
    dir: Option<TempDir>,
    root: PathBuf,
    branch: String,
    commit: String,
}

impl WorkspaceHandle {
    pub fn root(&self) -> Result<&Path, WorkspaceError> {
        match self.dir {
            Some(_) => Ok(&self.root),
            None => Err(WorkspaceError::Disposed),
        }
    }

    pub fn branch(&self) -> &str {
        &self.branch
    }

    pub fn commit(&self) -> &str {
        &self.commit
    }

    pub fn dispose(&mut self) {
        if let Some(dir) = self.dir.take() {
            if let Err(e) = dir.close() {
                tracing::warn!("failed to remove workspace: {e}");
            }
        }
    }

    pub fn is_disposed(&self) -> bool {
        self.dir.is_none()
    }
}

impl Drop for WorkspaceHandle {
    fn drop(&mut self) {
        self.dispose();
    }
}

/// Clones `repo_url` into a temporary directory and checks out `branch`
/// (a branch name, tag or commit).
pub fn clone_ephemeral(repo_url: &str, branch: &str) -> Result<WorkspaceHandle, WorkspaceError> {
    let dir = tempfile::Builder::new().prefix("revkit-ws-").tempdir()?;
    let target = dir.path().join("repo");
    let target_str = target.to_string_lossy().into_owned();
    let parent = dir.path();

    let clone_failed = |e: GitError| WorkspaceError::CloneFailed {
        url: repo_url.to_string(),
        reason: e.to_string(),
    };

    let shallow = git::run(
        parent,
        &[
            "clone",
            "--quiet",
            "--depth",
            "1",
            "--single-branch",
            "--branch",
            branch,
            repo_url,
            &target_str,
        ],
    );
    if shallow.is_err() {
        // Not a branch or tag (or the server refuses shallow clones).
        if target.exists() {
            std::fs::remove_dir_all(&target)?;
        }
        git::run(parent, &["clone", "--quiet", "--no-checkout", repo_url, &target_str]).map_err(clone_failed)?;
        let rev = [format!("origin/{branch}"), branch.to_string()]
            .into_iter()
            .find(|r| git::rev_parse(&target, r).is_some())
            .ok_or_else(|| WorkspaceError::BranchNotFound(branch.to_string()))?;
        git::run(&target, &["checkout", "--quiet", "--detach", &rev]).map_err(clone_failed)?;
    }
    let commit = git::rev_parse(&target, "HEAD").ok_or_else(|| WorkspaceError::BranchNotFound(branch.to_string()))?;

    Ok(WorkspaceHandle {
        dir: Some(dir),
        root: target,
        branch: branch.to_string(),
        commit,
    })
}
