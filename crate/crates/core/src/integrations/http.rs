//! Live HTTP adapters for GitHub, GitLab, Bitbucket, Jira and Confluence.
//!
//! These are deliberately thin: each call maps to one REST request and
//! HTTP status codes are mapped onto [`VcsError`] / [`KnowledgeError`].

use std::time::Duration;

use reqwest::blocking::{Client, RequestBuilder, Response};
use reqwest::StatusCode;
use serde_json::{json, Value};

use super::event::{PrRef, PullRequestEvent};
use super::knowledge::{KnowledgeError, RawDoc, TrackerClient, WikiClient};
use super::vcs::{PostedComment, VcsClient, VcsError};

fn client() -> Client {
    Client::builder()
        .timeout(Duration::from_secs(30))
        .user_agent(concat!("revkit/", env!("CARGO_PKG_VERSION")))
        .build()
        .expect("reqwest client builds with static config")
}

fn send(req: RequestBuilder) -> Result<Response, VcsError> {
    let resp = req.send().map_err(|e| VcsError::Network(e.to_string()))?;
    let status = resp.status();
    if status.is_success() {
        return Ok(resp);
    }
    let body = resp.text().unwrap_or_default();
    Err(match status {
        StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => VcsError::Auth(body),
        StatusCode::NOT_FOUND => VcsError::PullRequestNotFound(body),
        s if s == StatusCode::TOO_MANY_REQUESTS || s.is_server_error() => VcsError::Network(format!("{s}: {body}")),
        s => VcsError::Rejected(format!("{s}: {body}")),
    })
}

fn json_of(resp: Response) -> Result<Value, VcsError> {
    resp.json().map_err(|e| VcsError::Network(e.to_string()))
}

/// Inline placement errors come back as 4xx validation failures.
fn inline_error(e: VcsError, path: &str, line: u32) -> VcsError {
    match e {
        VcsError::Rejected(msg) if msg.starts_with("422") || msg.starts_with("400") => VcsError::LineNotInDiff { path: path.into(), line },
        other => other,
    }
}

pub struct GithubClient {
    http: Client,
    api: String,
    token: String,
}

impl GithubClient {
    pub fn new(api_base: &str, token: &str) -> Self {
        Self {
            http: client(),
            api: api_base.trim_end_matches('/').to_string(),
            token: token.to_string(),
        }
    }

    fn req(&self, method: reqwest::Method, path: &str) -> RequestBuilder {
        self.http
            .request(method, format!("{}{path}", self.api))
            .bearer_auth(&self.token)
            .header("Accept", "application/vnd.github+json")
    }

    fn head_sha(&self, pr: &PrRef) -> Result<String, VcsError> {
        let v = json_of(send(
            self.req(reqwest::Method::GET, &format!("/repos/{}/pulls/{}", pr.repo_id, pr.pr_number)),
        )?)?;
        v.pointer("/head/sha")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| VcsError::Network("pull request has no head sha".into()))
    }

    fn post_json(&self, path: &str, body: Value) -> Result<String, VcsError> {
        let v = json_of(send(self.req(reqwest::Method::POST, path).json(&body))?)?;
        Ok(v.get("id").map(|id| id.to_string()).unwrap_or_default())
    }
}

impl VcsClient for GithubClient {
    fn diff_text(&self, event: &PullRequestEvent) -> Result<String, VcsError> {
        let path = format!("/repos/{}/pulls/{}", event.repo_id, event.pr_number);
        send(
            self.req(reqwest::Method::GET, &path)
                .header("Accept", "application/vnd.github.v3.diff"),
        )?
        .text()
        .map_err(|e| VcsError::Network(e.to_string()))
    }

    fn list_comments(&self, pr: &PrRef) -> Result<Vec<PostedComment>, VcsError> {
        let mut out = Vec::new();
        for kind in ["issues", "pulls"] {
            let path = format!("/repos/{}/{kind}/{}/comments?per_page=100", pr.repo_id, pr.pr_number);
            let v = json_of(send(self.req(reqwest::Method::GET, &path))?)?;
            for c in v.as_array().into_iter().flatten() {
                out.push(PostedComment {
                    id: c.get("id").map(|i| i.to_string()).unwrap_or_default(),
                    body: c.get("body").and_then(Value::as_str).unwrap_or_default().to_string(),
                    file_path: c.get("path").and_then(Value::as_str).map(str::to_string),
                    line: c.get("line").and_then(Value::as_u64).map(|l| l as u32),
                    reply_to: None,
                });
            }
        }
        Ok(out)
    }

    fn post_inline_comment(&self, pr: &PrRef, path: &str, line: u32, body: &str) -> Result<String, VcsError> {
        let sha = self.head_sha(pr)?;
        self.post_json(
            &format!("/repos/{}/pulls/{}/comments", pr.repo_id, pr.pr_number),
            json!({"body": body, "commit_id": sha, "path": path, "line": line, "side": "RIGHT"}),
        )
        .map_err(|e| inline_error(e, path, line))
    }

    fn post_file_comment(&self, pr: &PrRef, path: &str, body: &str) -> Result<String, VcsError> {
        let sha = self.head_sha(pr)?;
        self.post_json(
            &format!("/repos/{}/pulls/{}/comments", pr.repo_id, pr.pr_number),
            json!({"body": body, "commit_id": sha, "path": path, "subject_type": "file"}),
        )
    }

    fn post_pr_comment(&self, pr: &PrRef, body: &str) -> Result<String, VcsError> {
        self.post_json(
            &format!("/repos/{}/issues/{}/comments", pr.repo_id, pr.pr_number),
            json!({"body": body}),
        )
    }

    fn post_reply(&self, pr: &PrRef, parent_id: &str, body: &str) -> Result<String, VcsError> {
        self.post_json(
            &format!("/repos/{}/pulls/{}/comments/{parent_id}/replies", pr.repo_id, pr.pr_number),
            json!({"body": body}),
        )
    }
}

pub struct GitlabClient {
    http: Client,
    api: String,
    token: String,
}

impl GitlabClient {
    pub fn new(api_base: &str, token: &str) -> Self {
        Self {
            http: client(),
            api: api_base.trim_end_matches('/').to_string(),
            token: token.to_string(),
        }
    }

    fn mr_path(pr: &PrRef) -> String {
        format!("/projects/{}/merge_requests/{}", pr.repo_id.replace('/', "%2F"), pr.pr_number)
    }

    fn req(&self, method: reqwest::Method, path: &str) -> RequestBuilder {
        self.http
            .request(method, format!("{}{path}", self.api))
            .header("PRIVATE-TOKEN", &self.token)
    }

    fn diff_refs(&self, pr: &PrRef) -> Result<Value, VcsError> {
        let v = json_of(send(self.req(reqwest::Method::GET, &Self::mr_path(pr)))?)?;
        v.get("diff_refs")
            .cloned()
            .ok_or_else(|| VcsError::Network("merge request has no diff_refs".into()))
    }

    fn post_json(&self, path: &str, body: Value) -> Result<String, VcsError> {
        let v = json_of(send(self.req(reqwest::Method::POST, path).json(&body))?)?;
        Ok(v.get("id")
            .map(|id| id.to_string().trim_matches('"').to_string())
            .unwrap_or_default())
    }

    fn discussion(&self, pr: &PrRef, body: &str, mut position: Value) -> Result<String, VcsError> {
        let refs = self.diff_refs(pr)?;
        for k in ["base_sha", "start_sha", "head_sha"] {
            position[k] = refs.get(k).cloned().unwrap_or(Value::Null);
        }
        self.post_json(
            &format!("{}/discussions", Self::mr_path(pr)),
            json!({"body": body, "position": position}),
        )
    }
}

impl VcsClient for GitlabClient {
    fn diff_text(&self, event: &PullRequestEvent) -> Result<String, VcsError> {
        send(self.req(reqwest::Method::GET, &format!("{}/raw_diffs", Self::mr_path(&event.pr_ref()))))?
            .text()
            .map_err(|e| VcsError::Network(e.to_string()))
    }

    fn list_comments(&self, pr: &PrRef) -> Result<Vec<PostedComment>, VcsError> {
        let v = json_of(send(
            self.req(reqwest::Method::GET, &format!("{}/notes?per_page=100", Self::mr_path(pr))),
        )?)?;
        Ok(v.as_array()
            .into_iter()
            .flatten()
            .map(|n| PostedComment {
                id: n.get("id").map(|i| i.to_string()).unwrap_or_default(),
                body: n.get("body").and_then(Value::as_str).unwrap_or_default().to_string(),
                file_path: n.pointer("/position/new_path").and_then(Value::as_str).map(str::to_string),
                line: n.pointer("/position/new_line").and_then(Value::as_u64).map(|l| l as u32),
                reply_to: None,
            })
            .collect())
    }

    fn post_inline_comment(&self, pr: &PrRef, path: &str, line: u32, body: &str) -> Result<String, VcsError> {
        self.discussion(
            pr,
            body,
            json!({"position_type": "text", "new_path": path, "old_path": path, "new_line": line}),
        )
        .map_err(|e| inline_error(e, path, line))
    }

    fn post_file_comment(&self, pr: &PrRef, path: &str, body: &str) -> Result<String, VcsError> {
        self.discussion(pr, body, json!({"position_type": "file", "new_path": path, "old_path": path}))
    }

    fn post_pr_comment(&self, pr: &PrRef, body: &str) -> Result<String, VcsError> {
        self.post_json(&format!("{}/notes", Self::mr_path(pr)), json!({"body": body}))
    }

    fn post_reply(&self, pr: &PrRef, parent_id: &str, body: &str) -> Result<String, VcsError> {
        self.post_json(
            &format!("{}/discussions/{parent_id}/notes", Self::mr_path(pr)),
            json!({"body": body}),
        )
    }
}

pub struct BitbucketClient {
    http: Client,
    api: String,
    token: String,
}

impl BitbucketClient {
    pub fn new(api_base: &str, token: &str) -> Self {
        Self {
            http: client(),
            api: api_base.trim_end_matches('/').to_string(),
            token: token.to_string(),
        }
    }

    fn pr_path(pr: &PrRef) -> String {
        format!("/repositories/{}/pullrequests/{}", pr.repo_id, pr.pr_number)
    }

    fn req(&self, method: reqwest::Method, path: &str) -> RequestBuilder {
        self.http.request(method, format!("{}{path}", self.api)).bearer_auth(&self.token)
    }

    fn comment(&self, pr: &PrRef, body: Value) -> Result<String, VcsError> {
        let v = json_of(send(
            self.req(reqwest::Method::POST, &format!("{}/comments", Self::pr_path(pr)))
                .json(&body),
        )?)?;
        Ok(v.get("id").map(|id| id.to_string()).unwrap_or_default())
    }
}

impl VcsClient for BitbucketClient {
    fn diff_text(&self, event: &PullRequestEvent) -> Result<String, VcsError> {
        send(self.req(reqwest::Method::GET, &format!("{}/diff", Self::pr_path(&event.pr_ref()))))?
            .text()
            .map_err(|e| VcsError::Network(e.to_string()))
    }

    fn list_comments(&self, pr: &PrRef) -> Result<Vec<PostedComment>, VcsError> {
        let v = json_of(send(
            self.req(reqwest::Method::GET, &format!("{}/comments?pagelen=100", Self::pr_path(pr))),
        )?)?;
        Ok(v.get("values")
            .and_then(Value::as_array)
            .into_iter()
            .flatten()
            .map(|c| PostedComment {
                id: c.get("id").map(|i| i.to_string()).unwrap_or_default(),
                body: c.pointer("/content/raw").and_then(Value::as_str).unwrap_or_default().to_string(),
                file_path: c.pointer("/inline/path").and_then(Value::as_str).map(str::to_string),
                line: c.pointer("/inline/to").and_then(Value::as_u64).map(|l| l as u32),
                reply_to: c.pointer("/parent/id").map(|i| i.to_string()),
            })
            .collect())
    }

    fn post_inline_comment(&self, pr: &PrRef, path: &str, line: u32, body: &str) -> Result<String, VcsError> {
        self.comment(pr, json!({"content": {"raw": body}, "inline": {"path": path, "to": line}}))
            .map_err(|e| inline_error(e, path, line))
    }

    fn post_file_comment(&self, pr: &PrRef, path: &str, body: &str) -> Result<String, VcsError> {
        self.comment(pr, json!({"content": {"raw": body}, "inline": {"path": path}}))
    }

    fn post_pr_comment(&self, pr: &PrRef, body: &str) -> Result<String, VcsError> {
        self.comment(pr, json!({"content": {"raw": body}}))
    }

    fn post_reply(&self, pr: &PrRef, parent_id: &str, body: &str) -> Result<String, VcsError> {
        let parent: Value = parent_id.parse::<u64>().map(Value::from).unwrap_or_else(|_| Value::from(parent_id));
        self.comment(pr, json!({"content": {"raw": body}, "parent": {"id": parent}}))
    }
}

fn knowledge_send(req: RequestBuilder, what: &str) -> Result<Value, KnowledgeError> {
    let resp = req.send().map_err(|e| KnowledgeError::Fetch(e.to_string()))?;
    match resp.status() {
        s if s.is_success() => resp.json().map_err(|e| KnowledgeError::Fetch(e.to_string())),
        StatusCode::NOT_FOUND => Err(KnowledgeError::NotFound(what.into())),
        s => Err(KnowledgeError::Fetch(format!("{s} fetching {what}"))),
    }
}

/// Jira Cloud issue fetcher.
pub struct JiraClient {
    http: Client,
    base: String,
    user: String,
    token: String,
}

impl JiraClient {
    pub fn new(base_url: &str, user: &str, token: &str) -> Self {
        Self {
            http: client(),
            base: base_url.trim_end_matches('/').to_string(),
            user: user.into(),
            token: token.into(),
        }
    }
}

impl TrackerClient for JiraClient {
    fn fetch_issue(&self, key: &str) -> Result<RawDoc, KnowledgeError> {
        let url = format!("{}/rest/api/2/issue/{key}?fields=summary,description", self.base);
        let v = knowledge_send(self.http.get(url).basic_auth(&self.user, Some(&self.token)), key)?;
        Ok(RawDoc {
            title: v.pointer("/fields/summary").and_then(Value::as_str).unwrap_or_default().to_string(),
            body: v
                .pointer("/fields/description")
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_string(),
        })
    }
}

/// Confluence page fetcher; owns URLs under its base.
pub struct ConfluenceClient {
    http: Client,
    base: String,
    user: String,
    token: String,
}

impl ConfluenceClient {
    pub fn new(base_url: &str, user: &str, token: &str) -> Self {
        Self {
            http: client(),
            base: base_url.trim_end_matches('/').to_string(),
            user: user.into(),
            token: token.into(),
        }
    }
}

/// Page id from `.../pages/<id>/...` style URLs.
pub fn confluence_page_id(url: &str) -> Option<&str> {
    let rest = &url[url.find("/pages/")? + "/pages/".len()..];
    let id = rest.split(['/', '?', '#']).next()?;
    (!id.is_empty() && id.bytes().all(|b| b.is_ascii_digit())).then_some(id)
}

impl WikiClient for ConfluenceClient {
    fn fetch_page(&self, url: &str) -> Result<RawDoc, KnowledgeError> {
        let id = confluence_page_id(url).ok_or_else(|| KnowledgeError::NotFound(url.into()))?;
        let api = format!("{}/rest/api/content/{id}?expand=body.storage", self.base);
        let v = knowledge_send(self.http.get(api).basic_auth(&self.user, Some(&self.token)), url)?;
        Ok(RawDoc {
            title: v.get("title").and_then(Value::as_str).unwrap_or_default().to_string(),
            body: v
                .pointer("/body/storage/value")
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_string(),
        })
    }

    fn owns_url(&self, url: &str) -> bool {
        url.starts_with(&self.base)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn page_ids() {
        assert_eq!(
            confluence_page_id("https://x.atlassian.net/wiki/spaces/E/pages/12345/Title"),
            Some("12345")
        );
        assert_eq!(confluence_page_id("https://x/wiki/pages/99?focus=1"), Some("99"));
        assert_eq!(confluence_page_id("https://x/wiki/display/E/Title"), None);
    }

    #[test]
    fn inline_rejections_become_line_errors() {
        let e = inline_error(VcsError::Rejected("422 Unprocessable Entity: line".into()), "a.py", 3);
        assert_eq!(
            e,
            VcsError::LineNotInDiff {
                path: "a.py".into(),
                line: 3
            }
        );
        let e = inline_error(VcsError::Network("boom".into()), "a.py", 3);
        assert!(matches!(e, VcsError::Network(_)));
    }
}
