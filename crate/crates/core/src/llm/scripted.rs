//! Deterministic provider driven by a response script.
//!
//! Script files are JSON objects. Keys are matched against each request in
//! this order:
//!
//! 1. the prompt digest ([`prompt_digest`]) of the request;
//! 2. `"contains:<text>"` keys, in file order, matching when the system or
//!    user prompt contains `<text>`;
//! 3. the `"*"` key.
//!
//! A value is either a response string or an array of steps consumed one per
//! matching call (the last step repeats). A step is a string or an object
//! `{"error": "transient" | "auth" | "<message>"}`.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{LlmError, ModelProvider, ModelRequest, ModelResponse};
use crate::tokens::{estimate_tokens, DEFAULT_CHARS_PER_TOKEN};

/// Hex sha256 of the system prompt, a NUL byte, and the user prompt.
pub fn prompt_digest(system: &str, user: &str) -> String {
    let mut h = Sha256::new();
    h.update(system.as_bytes());
    h.update([0u8]);
    h.update(user.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptStep {
    Text(String),
    Transient,
    Auth,
    Fail(String),
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("cannot read script {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("script is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("script entry {key:?}: {message}")]
    Entry { key: String, message: String },
}

#[derive(Debug, Clone)]
enum Matcher {
    Digest(String),
    Contains(String),
    Any,
}

#[derive(Debug)]
struct Rule {
    matcher: Matcher,
    steps: Vec<ScriptStep>,
}

#[derive(Debug)]
pub struct ScriptedProvider {
    rules: Vec<Rule>,
    cursors: Mutex<HashMap<usize, usize>>,
    log: Mutex<Vec<ModelRequest>>,
    context_limit: usize,
}

impl Default for ScriptedProvider {
    fn default() -> Self {
        Self::new()
    }
}

impl ScriptedProvider {
    pub fn new() -> Self {
        Self {
            rules: Vec::new(),
            cursors: Mutex::new(HashMap::new()),
            log: Mutex::new(Vec::new()),
            context_limit: 200_000,
        }
    }

    pub fn with_context_limit(mut self, limit: usize) -> Self {
        self.context_limit = limit;
        self
    }

    fn push(mut self, matcher: Matcher, steps: Vec<ScriptStep>) -> Self {
        self.rules.push(Rule { matcher, steps });
        self
    }

    pub fn with_digest(self, digest: &str, text: &str) -> Self {
        self.push(Matcher::Digest(digest.to_string()), vec![ScriptStep::Text(text.to_string())])
    }

    pub fn with_contains(self, needle: &str, text: &str) -> Self {
        self.with_contains_steps(needle, vec![ScriptStep::Text(text.to_string())])
    }

    pub fn with_contains_steps(self, needle: &str, steps: Vec<ScriptStep>) -> Self {
        self.push(Matcher::Contains(needle.to_string()), steps)
    }

    pub fn with_default(self, text: &str) -> Self {
        self.with_default_steps(vec![ScriptStep::Text(text.to_string())])
    }

    pub fn with_default_steps(self, steps: Vec<ScriptStep>) -> Self {
        self.push(Matcher::Any, steps)
    }

    pub fn from_json(text: &str) -> Result<Self, ScriptError> {
        let Value::Object(map) = serde_json::from_str::<Value>(text)? else {
            return Err(ScriptError::Entry {
                key: String::new(),
                message: "script must be a JSON object".into(),
            });
        };
        let mut p = Self::new();
        let mut digests = Vec::new();
        let mut contains = Vec::new();
        let mut any = Vec::new();
        for (key, value) in map {
            let steps = parse_steps(&key, &value)?;
            if key == "*" {
                any.push(Rule {
                    matcher: Matcher::Any,
                    steps,
                });
            } else if let Some(needle) = key.strip_prefix("contains:") {
                contains.push(Rule {
                    matcher: Matcher::Contains(needle.to_string()),
                    steps,
                });
            } else {
                digests.push(Rule {
                    matcher: Matcher::Digest(key),
                    steps,
                });
            }
        }
        p.rules = digests.into_iter().chain(contains).chain(any).collect();
        Ok(p)
    }

    pub fn from_file(path: &Path) -> Result<Self, ScriptError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScriptError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Every request received, in arrival order.
    pub fn requests(&self) -> Vec<ModelRequest> {
        self.log.lock().expect("log poisoned").clone()
    }

    fn find(&self, req: &ModelRequest) -> Option<usize> {
        let digest = prompt_digest(&req.system_prompt, &req.user_prompt);
        let pos = |f: &dyn Fn(&Matcher) -> bool| self.rules.iter().position(|r| f(&r.matcher));
        pos(&|m| matches!(m, Matcher::Digest(d) if *d == digest))
            .or_else(|| pos(&|m| matches!(m, Matcher::Contains(n) if req.system_prompt.contains(n.as_str()) || req.user_prompt.contains(n.as_str()))))
            .or_else(|| pos(&|m| matches!(m, Matcher::Any)))
    }
}

fn parse_step(key: &str, v: &Value) -> Result<ScriptStep, ScriptError> {
    match v {
        Value::String(s) => Ok(ScriptStep::Text(s.clone())),
        Value::Object(o) => match o.get("error").and_then(Value::as_str) {
            Some("transient") => Ok(ScriptStep::Transient),
            Some("auth") => Ok(ScriptStep::Auth),
            Some(msg) => Ok(ScriptStep::Fail(msg.to_string())),
            None => Err(ScriptError::Entry {
                key: key.to_string(),
                message: "step objects need an \"error\" string".into(),
            }),
        },
        _ => Err(ScriptError::Entry {
            key: key.to_string(),
            message: "expected a string, an error object or an array of those".into(),
        }),
    }
}

fn parse_steps(key: &str, v: &Value) -> Result<Vec<ScriptStep>, ScriptError> {
    match v {
        Value::Array(items) if items.is_empty() => Err(ScriptError::Entry {
            key: key.to_string(),
            message: "empty step list".into(),
        }),
        Value::Array(items) => items.iter().map(|i| parse_step(key, i)).collect(),
        other => Ok(vec![parse_step(key, other)?]),
    }
}

impl ModelProvider for ScriptedProvider {
    fn name(&self) -> &str {
        "scripted"
    }

    fn context_limit(&self, _model_id: &str) -> usize {
        self.context_limit
    }

    fn complete(&self, req: &ModelRequest) -> Result<ModelResponse, LlmError> {
        self.log.lock().expect("log poisoned").push(req.clone());
        let Some(idx) = self.find(req) else {
            return Err(LlmError::Provider(format!(
                "no scripted response for digest {}",
                prompt_digest(&req.system_prompt, &req.user_prompt)
            )));
        };
        let rule = &self.rules[idx];
        let step = {
            let mut cursors = self.cursors.lock().expect("cursors poisoned");
            let cur = cursors.entry(idx).or_insert(0);
            let step = rule.steps[(*cur).min(rule.steps.len() - 1)].clone();
            *cur += 1;
            step
        };
        match step {
            ScriptStep::Text(text) => Ok(ModelResponse {
                input_tokens: (estimate_tokens(&req.system_prompt, DEFAULT_CHARS_PER_TOKEN)
                    + estimate_tokens(&req.user_prompt, DEFAULT_CHARS_PER_TOKEN)) as u64,
                output_tokens: estimate_tokens(&text, DEFAULT_CHARS_PER_TOKEN) as u64,
                text,
                latency: Duration::ZERO,
            }),
            ScriptStep::Transient => Err(LlmError::Transient("scripted transient failure".into())),
            ScriptStep::Auth => Err(LlmError::Auth("scripted auth failure".into())),
            ScriptStep::Fail(msg) => Err(LlmError::Provider(msg)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(system: &str, user: &str) -> ModelRequest {
        ModelRequest {
            model_id: "m".into(),
            system_prompt: system.into(),
            user_prompt: user.into(),
            max_output_tokens: 1,
            temperature: 0.0,
            structured_mode: false,
        }
    }

    #[test]
    fn digest_beats_contains_beats_default() {
        let d = prompt_digest("s", "u");
        let script = format!(r#"{{"*": "any", "contains:needle": "found", "{d}": "exact"}}"#);
        let p = ScriptedProvider::from_json(&script).unwrap();
        assert_eq!(p.complete(&req("s", "u")).unwrap().text, "exact");
        assert_eq!(p.complete(&req("s", "a needle here")).unwrap().text, "found");
        assert_eq!(p.complete(&req("s", "other")).unwrap().text, "any");
        assert_eq!(p.requests().len(), 3);
    }

    #[test]
    fn sequences_advance_and_repeat_last() {
        let p = ScriptedProvider::from_json(r#"{"*": [{"error": "transient"}, "one", "two"]}"#).unwrap();
        assert!(matches!(p.complete(&req("", "")), Err(LlmError::Transient(_))));
        assert_eq!(p.complete(&req("", "")).unwrap().text, "one");
        assert_eq!(p.complete(&req("", "")).unwrap().text, "two");
        assert_eq!(p.complete(&req("", "")).unwrap().text, "two");
    }

    #[test]
    fn unmatched_prompt_is_a_provider_error() {
        let p = ScriptedProvider::new();
        assert!(matches!(p.complete(&req("a", "b")), Err(LlmError::Provider(m)) if m.contains("no scripted response")));
    }

    #[test]
    fn bad_scripts_are_rejected() {
        assert!(ScriptedProvider::from_json("[]").is_err());
        assert!(ScriptedProvider::from_json(r#"{"*": 3}"#).is_err());
        assert!(ScriptedProvider::from_json(r#"{"*": []}"#).is_err());
        assert!(ScriptedProvider::from_json(r#"{"*": {"oops": 1}}"#).is_err());
    }
}
