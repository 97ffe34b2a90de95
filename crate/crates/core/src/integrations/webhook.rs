//! Normalization of GitHub, GitLab and Bitbucket pull request webhooks.

use chrono::{DateTime, Utc};
use hmac::{Hmac, Mac};
use serde_json::Value;
use sha2::Sha256;
use thiserror::Error;

use super::event::{EventInvariantError, EventKind, PrComment, Provider, PullRequestEvent, UnknownProvider};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WebhookError {
    #[error(transparent)]
    UnknownProvider(#[from] UnknownProvider),
    #[error("payload is not valid JSON: {0}")]
    InvalidJson(String),
    #[error("missing mandatory field `{0}`")]
    MissingField(String),
    #[error("field `{path}` is invalid: {reason}")]
    InvalidField { path: String, reason: String },
    #[error(transparent)]
    Invariant(#[from] EventInvariantError),
    #[error("webhook signature header missing")]
    MissingSignature,
    #[error("webhook signature verification failed")]
    BadSignature,
    /// A well-formed event that does not trigger a review (closed, merged, ...).
    #[error("event ignored: {0}")]
    Ignored(String),
}

/// Everything needed to normalize one delivery.
#[derive(Debug, Clone, Copy)]
pub struct WebhookRequest<'a> {
    pub provider: Provider,
    pub body: &'a [u8],
    /// `X-GitHub-Event`, `X-Gitlab-Event` or `X-Event-Key`.
    pub event_header: Option<&'a str>,
    /// `X-Hub-Signature-256` (GitHub), `X-Hub-Signature` (Bitbucket) or
    /// `X-Gitlab-Token` (GitLab).
    pub signature: Option<&'a str>,
}

impl<'a> WebhookRequest<'a> {
    pub fn new(provider: Provider, body: &'a [u8]) -> Self {
        Self {
            provider,
            body,
            event_header: None,
            signature: None,
        }
    }
}

/// Header that carries the signature for a provider.
pub fn signature_header(provider: Provider) -> &'static str {
    match provider {
        Provider::Github => "x-hub-signature-256",
        Provider::Gitlab => "x-gitlab-token",
        Provider::Bitbucket => "x-hub-signature",
    }
}

/// Header that carries the event type for a provider.
pub fn event_header(provider: Provider) -> &'static str {
    match provider {
        Provider::Github => "x-github-event",
        Provider::Gitlab => "x-gitlab-event",
        Provider::Bitbucket => "x-event-key",
    }
}

/// `sha256=<hex>` HMAC of `body` under `secret`.
pub fn sign(secret: &str, body: &[u8]) -> String {
    let mut mac = Hmac::<Sha256>::new_from_slice(secret.as_bytes()).expect("hmac accepts any key length");
    mac.update(body);
    format!("sha256={}", hex::encode(mac.finalize().into_bytes()))
}

pub fn verify_signature(provider: Provider, secret: &str, body: &[u8], signature: Option<&str>) -> Result<(), WebhookError> {
    let sig = signature.ok_or(WebhookError::MissingSignature)?;
    match provider {
        Provider::Gitlab => {
            if constant_time_eq(sig.trim().as_bytes(), secret.as_bytes()) {
                Ok(())
            } else {
                Err(WebhookError::BadSignature)
            }
        }
        Provider::Github | Provider::Bitbucket => {
            let hex_part = sig.trim().strip_prefix("sha256=").ok_or(WebhookError::BadSignature)?;
            let expected = hex::decode(hex_part).map_err(|_| WebhookError::BadSignature)?;
            let mut mac = Hmac::<Sha256>::new_from_slice(secret.as_bytes()).expect("hmac accepts any key length");
            mac.update(body);
            mac.verify_slice(&expected).map_err(|_| WebhookError::BadSignature)
        }
    }
}

fn constant_time_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

/// Normalizes a payload with no headers and no secret.
pub fn parse_webhook(raw: &[u8], provider: Provider) -> Result<PullRequestEvent, WebhookError> {
    parse_request(&WebhookRequest::new(provider, raw), None, Utc::now())
}

/// Verifies (when `secret` is set) and normalizes one delivery.
pub fn parse_request(req: &WebhookRequest<'_>, secret: Option<&str>, received_at: DateTime<Utc>) -> Result<PullRequestEvent, WebhookError> {
    if let Some(secret) = secret {
        verify_signature(req.provider, secret, req.body, req.signature)?;
    }
    let v: Value = serde_json::from_slice(req.body).map_err(|e| WebhookError::InvalidJson(e.to_string()))?;
    if !v.is_object() {
        return Err(WebhookError::InvalidJson("top-level value is not an object".into()));
    }
    let event = match req.provider {
        Provider::Github => github(&v, req.event_header, received_at)?,
        Provider::Gitlab => gitlab(&v, req.event_header, received_at)?,
        Provider::Bitbucket => bitbucket(&v, req.event_header, received_at)?,
    };
    event.validate()?;
    Ok(event)
}

fn lookup<'v>(v: &'v Value, path: &str) -> Option<&'v Value> {
    path.split('.').try_fold(v, |cur, key| cur.get(key)).filter(|x| !x.is_null())
}

fn req_str(v: &Value, path: &str) -> Result<String, WebhookError> {
    match lookup(v, path) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(Value::Number(n)) => Ok(n.to_string()),
        Some(_) => Err(WebhookError::InvalidField {
            path: path.into(),
            reason: "expected a string".into(),
        }),
        None => Err(WebhookError::MissingField(path.into())),
    }
}

fn opt_str(v: &Value, path: &str) -> Option<String> {
    match lookup(v, path)? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn req_u64(v: &Value, path: &str) -> Result<u64, WebhookError> {
    let invalid = |reason: &str| WebhookError::InvalidField {
        path: path.into(),
        reason: reason.into(),
    };
    match lookup(v, path) {
        Some(Value::Number(n)) => n.as_u64().filter(|&n| n > 0).ok_or_else(|| invalid("expected a positive integer")),
        Some(Value::String(s)) => s
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| invalid("expected a positive integer")),
        Some(_) => Err(invalid("expected a positive integer")),
        None => Err(WebhookError::MissingField(path.into())),
    }
}

fn opt_u32(v: &Value, path: &str) -> Option<u32> {
    lookup(v, path)?.as_u64().and_then(|n| u32::try_from(n).ok())
}

fn github(v: &Value, header: Option<&str>, received_at: DateTime<Utc>) -> Result<PullRequestEvent, WebhookError> {
    let has_comment = lookup(v, "comment").is_some();
    let kind = match (header, has_comment) {
        (Some("issue_comment"), _) => return Err(WebhookError::Ignored("issue_comment payloads carry no branch information".into())),
        (Some("pull_request_review_comment"), _) | (None, true) => match opt_str(v, "action").as_deref() {
            Some("created") | None => EventKind::CommentAdded,
            Some(other) => return Err(WebhookError::Ignored(format!("comment action {other}"))),
        },
        (Some("pull_request"), _) | (None, false) => match opt_str(v, "action").as_deref() {
            Some("opened" | "reopened" | "ready_for_review") | None => EventKind::Opened,
            Some("synchronize" | "edited") => EventKind::Updated,
            Some(other) => return Err(WebhookError::Ignored(format!("pull_request action {other}"))),
        },
        (Some(other), _) => return Err(WebhookError::Ignored(format!("event type {other}"))),
    };
    let comment = if kind == EventKind::CommentAdded {
        Some(PrComment {
            id: req_str(v, "comment.id")?,
            body: req_str(v, "comment.body")?,
            author: opt_str(v, "comment.user.login").unwrap_or_default(),
            file_path: opt_str(v, "comment.path"),
            line: opt_u32(v, "comment.line").or_else(|| opt_u32(v, "comment.original_line")),
        })
    } else {
        None
    };
    Ok(PullRequestEvent {
        provider: Provider::Github,
        repo_url: req_str(v, "repository.clone_url")?,
        repo_id: req_str(v, "repository.full_name")?,
        pr_number: req_u64(v, "pull_request.number")?,
        source_branch: req_str(v, "pull_request.head.ref")?,
        target_branch: req_str(v, "pull_request.base.ref")?,
        title: req_str(v, "pull_request.title")?,
        description: opt_str(v, "pull_request.body").unwrap_or_default(),
        author: req_str(v, "pull_request.user.login")?,
        kind,
        received_at,
        comment,
    })
}

fn gitlab(v: &Value, header: Option<&str>, received_at: DateTime<Utc>) -> Result<PullRequestEvent, WebhookError> {
    let object_kind = opt_str(v, "object_kind").or_else(|| header.map(|h| h.to_ascii_lowercase()));
    match object_kind.as_deref() {
        Some("merge_request" | "merge request hook") | None => {
            let kind = match opt_str(v, "object_attributes.action").as_deref() {
                Some("open" | "reopen") | None => EventKind::Opened,
                Some("update") => EventKind::Updated,
                Some(other) => return Err(WebhookError::Ignored(format!("merge_request action {other}"))),
            };
            Ok(PullRequestEvent {
                provider: Provider::Gitlab,
                repo_url: req_str(v, "project.git_http_url")?,
                repo_id: req_str(v, "project.path_with_namespace")?,
                pr_number: req_u64(v, "object_attributes.iid")?,
                source_branch: req_str(v, "object_attributes.source_branch")?,
                target_branch: req_str(v, "object_attributes.target_branch")?,
                title: req_str(v, "object_attributes.title")?,
                description: opt_str(v, "object_attributes.description").unwrap_or_default(),
                author: req_str(v, "user.username")?,
                kind,
                received_at,
                comment: None,
            })
        }
        Some("note" | "note hook") => {
            if opt_str(v, "object_attributes.noteable_type").as_deref() != Some("MergeRequest") {
                return Err(WebhookError::Ignored("note is not on a merge request".into()));
            }
            Ok(PullRequestEvent {
                provider: Provider::Gitlab,
                repo_url: req_str(v, "project.git_http_url")?,
                repo_id: req_str(v, "project.path_with_namespace")?,
                pr_number: req_u64(v, "merge_request.iid")?,
                source_branch: req_str(v, "merge_request.source_branch")?,
                target_branch: req_str(v, "merge_request.target_branch")?,
                title: req_str(v, "merge_request.title")?,
                description: opt_str(v, "merge_request.description").unwrap_or_default(),
                author: opt_str(v, "merge_request.author.username").unwrap_or_default(),
                kind: EventKind::CommentAdded,
                received_at,
                comment: Some(PrComment {
                    id: req_str(v, "object_attributes.id")?,
                    body: req_str(v, "object_attributes.note")?,
                    author: opt_str(v, "user.username").unwrap_or_default(),
                    file_path: opt_str(v, "object_attributes.position.new_path"),
                    line: opt_u32(v, "object_attributes.position.new_line"),
                }),
            })
        }
        Some(other) => Err(WebhookError::Ignored(format!("object kind {other}"))),
    }
}

fn bitbucket(v: &Value, header: Option<&str>, received_at: DateTime<Utc>) -> Result<PullRequestEvent, WebhookError> {
    let has_comment = lookup(v, "comment").is_some();
    let kind = match header {
        Some("pullrequest:created") => EventKind::Opened,
        Some("pullrequest:updated") => EventKind::Updated,
        Some("pullrequest:comment_created") => EventKind::CommentAdded,
        Some(other) => return Err(WebhookError::Ignored(format!("event key {other}"))),
        None if has_comment => EventKind::CommentAdded,
        None => EventKind::Opened,
    };
    let comment = if kind == EventKind::CommentAdded {
        Some(PrComment {
            id: req_str(v, "comment.id")?,
            body: req_str(v, "comment.content.raw")?,
            author: opt_str(v, "comment.user.nickname")
                .or_else(|| opt_str(v, "comment.user.display_name"))
                .unwrap_or_default(),
            file_path: opt_str(v, "comment.inline.path"),
            line: opt_u32(v, "comment.inline.to"),
        })
    } else {
        None
    };
    Ok(PullRequestEvent {
        provider: Provider::Bitbucket,
        repo_url: req_str(v, "repository.links.html.href")?,
        repo_id: req_str(v, "repository.full_name")?,
        pr_number: req_u64(v, "pullrequest.id")?,
        source_branch: req_str(v, "pullrequest.source.branch.name")?,
        target_branch: req_str(v, "pullrequest.destination.branch.name")?,
        title: req_str(v, "pullrequest.title")?,
        description: opt_str(v, "pullrequest.description").unwrap_or_default(),
        author: opt_str(v, "pullrequest.author.nickname")
            .or_else(|| opt_str(v, "pullrequest.author.display_name"))
            .ok_or_else(|| WebhookError::MissingField("pullrequest.author.nickname".into()))?,
        kind,
        received_at,
        comment,
    })
}
