//! VCS webhooks, diffs, ticket/wiki lookups and comment delivery.

mod event;
pub mod http;
mod knowledge;
mod post;
mod vcs;
mod webhook;

pub use event::{EventInvariantError, EventKind, PrComment, PrRef, Provider, PullRequestEvent, UnknownProvider};
pub use knowledge::{
    extract_references, resolve_knowledge_docs, strip_markup, DocSource, KnowledgeDoc, KnowledgeError, MemoryTracker, MemoryWiki, RawDoc,
    Reference, ResolvedDocs, TrackerClient, WikiClient,
};
pub use post::{post_notice, post_review, render_comment_body, PostFailure, PostReceipt, PostedItem, PostedKind};
pub use vcs::{fetch_diff, LocalGitVcs, MemoryVcs, PostedComment, VcsClient, VcsError};
pub use webhook::{event_header, parse_request, parse_webhook, sign, signature_header, verify_signature, WebhookError, WebhookRequest};
