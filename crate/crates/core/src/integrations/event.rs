use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provider {
    Github,
    Gitlab,
    Bitbucket,
}

impl Provider {
    pub const ALL: [Provider; 3] = [Provider::Github, Provider::Gitlab, Provider::Bitbucket];

    pub fn as_str(self) -> &'static str {
        match self {
            Provider::Github => "github",
            Provider::Gitlab => "gitlab",
            Provider::Bitbucket => "bitbucket",
        }
    }
}

impl fmt::Display for Provider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown provider {0:?}")]
pub struct UnknownProvider(pub String);

impl FromStr for Provider {
    type Err = UnknownProvider;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "github" => Ok(Provider::Github),
            "gitlab" => Ok(Provider::Gitlab),
            "bitbucket" => Ok(Provider::Bitbucket),
            _ => Err(UnknownProvider(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Opened,
    Updated,
    CommentAdded,
}

/// A comment carried by a `comment-added` event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrComment {
    pub id: String,
    pub body: String,
    pub author: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<u32>,
}

/// Identifies one pull request.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PrRef {
    pub repo_id: String,
    pub pr_number: u64,
}

impl fmt::Display for PrRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.repo_id, self.pr_number)
    }
}

/// Provider-independent pull request event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PullRequestEvent {
    pub provider: Provider,
    pub repo_url: String,
    pub repo_id: String,
    pub pr_number: u64,
    pub source_branch: String,
    pub target_branch: String,
    pub title: String,
    pub description: String,
    pub author: String,
    pub kind: EventKind,
    pub received_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<PrComment>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EventInvariantError {
    #[error("branch invariant violated: source and target are both {0:?}")]
    SameBranch(String),
    #[error("pull request title is empty")]
    EmptyTitle,
    #[error("pull request number must be positive")]
    ZeroNumber,
}

impl PullRequestEvent {
    /// A freshly opened PR with empty description and author, received now.
    pub fn opened(provider: Provider, repo_id: &str, pr_number: u64, source_branch: &str, target_branch: &str, title: &str) -> Self {
        Self {
            provider,
            repo_url: String::new(),
            repo_id: repo_id.to_string(),
            pr_number,
            source_branch: source_branch.to_string(),
            target_branch: target_branch.to_string(),
            title: title.to_string(),
            description: String::new(),
            author: String::new(),
            kind: EventKind::Opened,
            received_at: chrono::Utc::now(),
            comment: None,
        }
    }

    pub fn pr_ref(&self) -> PrRef {
        PrRef {
            repo_id: self.repo_id.clone(),
            pr_number: self.pr_number,
        }
    }

    pub fn validate(&self) -> Result<(), EventInvariantError> {
        if self.pr_number == 0 {
            return Err(EventInvariantError::ZeroNumber);
        }
        if self.source_branch == self.target_branch {
            return Err(EventInvariantError::SameBranch(self.source_branch.clone()));
        }
        if self.title.trim().is_empty() {
            return Err(EventInvariantError::EmptyTitle);
        }
        Ok(())
    }
}
