//! Issue-tracker stories and wiki pages referenced from a PR description.

use std::collections::{HashMap, HashSet};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocSource {
    /// From the issue tracker.
    Story,
    /// From the wiki.
    Approach,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeDoc {
    pub source: DocSource,
    pub external_key: String,
    pub title: String,
    /// Plain text; markup already stripped.
    pub body: String,
}

/// What a tracker or wiki returns before markup stripping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDoc {
    pub title: String,
    pub body: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KnowledgeError {
    #[error("{0} not found")]
    NotFound(String),
    #[error("fetch failed: {0}")]
    Fetch(String),
}

pub trait TrackerClient: Send + Sync {
    fn fetch_issue(&self, key: &str) -> Result<RawDoc, KnowledgeError>;
}

pub trait WikiClient: Send + Sync {
    fn fetch_page(&self, url: &str) -> Result<RawDoc, KnowledgeError>;
    /// Whether `url` points into this wiki.
    fn owns_url(&self, url: &str) -> bool {
        url.contains("/wiki/")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Reference {
    Ticket(String),
    Wiki(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ResolvedDocs {
    pub docs: Vec<KnowledgeDoc>,
    pub warnings: Vec<String>,
}

static URL_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#"https?://[^\s<>()\[\]"'`]+"#).unwrap());
static TICKET_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b[A-Z][A-Z0-9]{1,9}-[1-9][0-9]*\b").unwrap());

/// Ticket keys and wiki URLs in order of first appearance. Ticket-like
/// text inside URLs is not treated as a separate reference.
pub fn extract_references(description: &str, is_wiki_url: impl Fn(&str) -> bool) -> Vec<Reference> {
    let mut found: Vec<(usize, Reference)> = Vec::new();
    let mut url_spans = Vec::new();
    for m in URL_RE.find_iter(description) {
        url_spans.push(m.range());
        let url = m.as_str().trim_end_matches(['.', ',', ';', ':', '!', '?']);
        if is_wiki_url(url) {
            found.push((m.start(), Reference::Wiki(url.to_string())));
        }
    }
    for m in TICKET_RE.find_iter(description) {
        if url_spans.iter().any(|r| r.contains(&m.start())) {
            continue;
        }
        found.push((m.start(), Reference::Ticket(m.as_str().to_string())));
    }
    found.sort_by_key(|(pos, _)| *pos);
    let mut seen = HashSet::new();
    found.into_iter().map(|(_, r)| r).filter(|r| seen.insert(r.clone())).collect()
}

/// Fetches every referenced story and wiki page. Fetch failures become
/// warnings; the returned docs keep reference order.
pub fn resolve_knowledge_docs(description: &str, tracker: &dyn TrackerClient, wiki: &dyn WikiClient) -> ResolvedDocs {
    let mut out = ResolvedDocs::default();
    for reference in extract_references(description, |u| wiki.owns_url(u)) {
        let (source, key, fetched) = match &reference {
            Reference::Ticket(k) => (DocSource::Story, k.clone(), tracker.fetch_issue(k)),
            Reference::Wiki(u) => (DocSource::Approach, u.clone(), wiki.fetch_page(u)),
        };
        match fetched {
            Ok(raw) => out.docs.push(KnowledgeDoc {
                source,
                external_key: key,
                title: strip_markup(&raw.title),
                body: strip_markup(&raw.body),
            }),
            Err(e) => out.warnings.push(format!("could not resolve {key}: {e}")),
        }
    }
    out
}

static TAG_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?s)<[^>]*>").unwrap());
static BLOCK_TAG_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)<\s*/?\s*(p|div|br|li|ul|ol|h[1-6]|tr|table|pre|blockquote)\b[^>]*>").unwrap());
static JIRA_MACRO_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{(code|noformat|quote|panel|color)(:[^}]*)?\}").unwrap());
static JIRA_HEADING_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?m)^h[1-6]\.\s+").unwrap());
static JIRA_LINK_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[([^\[\]|]+)\|[^\[\]]+\]").unwrap());
static ENTITY_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"&(#[0-9]+|#x[0-9a-fA-F]+|[a-zA-Z]+);").unwrap());
static BLANK_RUN_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\n{3,}").unwrap());

/// Reduces HTML (wiki storage format) or tracker wiki markup to plain text.
pub fn strip_markup(text: &str) -> String {
    let s = BLOCK_TAG_RE.replace_all(text, "\n");
    let s = TAG_RE.replace_all(&s, "");
    let s = JIRA_MACRO_RE.replace_all(&s, "");
    let s = JIRA_HEADING_RE.replace_all(&s, "");
    let s = JIRA_LINK_RE.replace_all(&s, "$1");
    let s = ENTITY_RE.replace_all(&s, |c: &regex::Captures<'_>| {
        decode_entity(&c[1]).unwrap_or_else(|| c[0].to_string())
    });
    let lines: Vec<&str> = s.lines().map(str::trim_end).collect();
    let joined = lines.join("\n");
    BLANK_RUN_RE.replace_all(joined.trim(), "\n\n").into_owned()
}

fn decode_entity(name: &str) -> Option<String> {
    let c = match name {
        "amp" => '&',
        "lt" => '<',
        "gt" => '>',
        "quot" => '"',
        "apos" => '\'',
        "nbsp" => ' ',
        n if n.starts_with("#x") => char::from_u32(u32::from_str_radix(&n[2..], 16).ok()?)?,
        n if n.starts_with('#') => char::from_u32(n[1..].parse().ok()?)?,
        _ => return None,
    };
    Some(c.to_string())
}

/// Tracker stub backed by a map.
#[derive(Debug, Default)]
pub struct MemoryTracker {
    issues: HashMap<String, RawDoc>,
}

impl MemoryTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_issue(mut self, key: &str, title: &str, body: &str) -> Self {
        self.issues.insert(
            key.into(),
            RawDoc {
                title: title.into(),
                body: body.into(),
            },
        );
        self
    }
}

impl TrackerClient for MemoryTracker {
    fn fetch_issue(&self, key: &str) -> Result<RawDoc, KnowledgeError> {
        self.issues.get(key).cloned().ok_or_else(|| KnowledgeError::NotFound(key.into()))
    }
}

/// Wiki stub backed by a map; owns every URL under `base_url`.
#[derive(Debug, Default)]
pub struct MemoryWiki {
    base_url: Option<String>,
    pages: HashMap<String, RawDoc>,
}

impl MemoryWiki {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_base_url(mut self, base: &str) -> Self {
        self.base_url = Some(base.into());
        self
    }

    pub fn with_page(mut self, url: &str, title: &str, body: &str) -> Self {
        self.pages.insert(
            url.into(),
            RawDoc {
                title: title.into(),
                body: body.into(),
            },
        );
        self
    }
}

impl WikiClient for MemoryWiki {
    fn fetch_page(&self, url: &str) -> Result<RawDoc, KnowledgeError> {
        self.pages.get(url).cloned().ok_or_else(|| KnowledgeError::NotFound(url.into()))
    }

    fn owns_url(&self, url: &str) -> bool {
        match &self.base_url {
            Some(base) => url.starts_with(base.as_str()),
            None => url.contains("/wiki/"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_ticket() {
        let tracker = MemoryTracker::new().with_issue("PROJ-123", "Cap discounts", "B");
        let r = resolve_knowledge_docs("Implements PROJ-123", &tracker, &MemoryWiki::new());
        assert_eq!(
            r.docs,
            vec![KnowledgeDoc {
                source: DocSource::Story,
                external_key: "PROJ-123".into(),
                title: "Cap discounts".into(),
                body: "B".into(),
            }]
        );
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn no_references() {
        let r = resolve_knowledge_docs("just a refactor", &MemoryTracker::new(), &MemoryWiki::new());
        assert_eq!(r, ResolvedDocs::default());
    }

    #[test]
    fn ticket_then_wiki_in_order() {
        let url = "https://acme.atlassian.net/wiki/spaces/ENG/pages/42/Discounts";
        let tracker = MemoryTracker::new().with_issue("SHOP-9", "story", "<p>Limit to <b>50%</b></p>");
        let wiki = MemoryWiki::new().with_page(url, "Approach", "h1. Plan\nUse [the doc|http://x]");
        let desc = format!("Fixes SHOP-9. Design: {url}.");
        let r = resolve_knowledge_docs(&desc, &tracker, &wiki);
        assert_eq!(r.docs.len(), 2);
        assert_eq!(r.docs[0].source, DocSource::Story);
        assert_eq!(r.docs[0].body, "Limit to 50%");
        assert_eq!(r.docs[1].source, DocSource::Approach);
        assert_eq!(r.docs[1].external_key, url);
        assert_eq!(r.docs[1].body, "Plan\nUse the doc");
    }

    #[test]
    fn order_follows_appearance() {
        let refs = extract_references("see https://w/wiki/p then ABC-1 and ABC-1 again", |u| u.contains("/wiki/"));
        assert_eq!(
            refs,
            vec![Reference::Wiki("https://w/wiki/p".into()), Reference::Ticket("ABC-1".into())]
        );
    }

    #[test]
    fn tickets_inside_urls_are_not_tickets() {
        let refs = extract_references("https://jira.x/browse/ABC-12", |_| false);
        assert!(refs.is_empty());
    }

    #[test]
    fn fetch_failures_are_warnings() {
        let r = resolve_knowledge_docs("PROJ-1 and https://w/wiki/missing", &MemoryTracker::new(), &MemoryWiki::new());
        assert!(r.docs.is_empty());
        assert_eq!(r.warnings.len(), 2);
    }

    #[test]
    fn markup_entities() {
        assert_eq!(strip_markup("a &amp; b&#33; &lt;x&gt;"), "a & b! <x>");
        assert_eq!(strip_markup("{code:python}x = 1{code}"), "x = 1");
        assert_eq!(strip_markup("one<br/>two"), "one\ntwo");
    }
}
